use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 4;

/// The four target classes.
///
/// The discriminant is the class index used by every matrix in the crate:
/// Welsh, English, Irish, Scottish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Welsh = 0,
    English = 1,
    Irish = 2,
    Scottish = 3,
}

impl Language {
    pub const ALL: [Language; NUM_CLASSES] =
        [Language::Welsh, Language::English, Language::Irish, Language::Scottish];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Language> {
        Self::ALL.get(i).copied()
    }

    /// ISO 639-1 code used in corpus files.
    pub fn code(self) -> &'static str {
        match self {
            Language::Welsh => "cy",
            Language::English => "en",
            Language::Irish => "ga",
            Language::Scottish => "gd",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Welsh => "welsh",
            Language::English => "english",
            Language::Irish => "irish",
            Language::Scottish => "scottish",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = String;

    /// Accepts the ISO code or the lowercase class name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cy" | "welsh" => Ok(Language::Welsh),
            "en" | "english" => Ok(Language::English),
            "ga" | "irish" => Ok(Language::Irish),
            "gd" | "scottish" => Ok(Language::Scottish),
            other => Err(other.to_string()),
        }
    }
}
