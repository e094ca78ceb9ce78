use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const DEFAULT_MAX_LEN: usize = 128;

/// Character to integer mapping. Known characters get contiguous ids from 2
/// in codepoint order; 0 is padding and 1 is any unseen character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    char_to_id: BTreeMap<char, u32>,
}

impl Alphabet {
    pub fn fit<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let mut chars = std::collections::BTreeSet::new();
        for t in texts {
            chars.extend(t.chars());
        }
        Self::from_chars(chars)
    }

    pub fn from_chars<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let mut sorted: Vec<char> = chars.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        let char_to_id = sorted.into_iter().zip(2u32..).collect();
        Self { char_to_id }
    }

    pub fn id(&self, c: char) -> u32 {
        self.char_to_id.get(&c).copied().unwrap_or(UNK_ID)
    }

    /// Number of distinct ids including pad and unk.
    pub fn size(&self) -> usize {
        self.char_to_id.len() + 2
    }

    pub fn chars(&self) -> impl Iterator<Item = (char, u32)> + '_ {
        self.char_to_id.iter().map(|(&c, &i)| (c, i))
    }

    /// Left-aligned ids, truncated or right-padded with [`PAD_ID`] to
    /// exactly `max_len`.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<u32> {
        let mut out: Vec<u32> = text.chars().take(max_len).map(|c| self.id(c)).collect();
        out.resize(max_len, PAD_ID);
        out
    }
}

pub fn encode_chars(text: &str, alphabet: &Alphabet, max_len: usize) -> Vec<u32> {
    alphabet.encode(text, max_len)
}
