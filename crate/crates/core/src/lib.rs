//! Language identification for closely related low-resource languages
//! (Irish, Scottish Gaelic, Welsh, English) from single sentences.
//!
//! The crate covers the whole pipeline: corpus handling, deterministic
//! feature extraction, label-free feature learners (clustering ensemble,
//! variational autoencoder, LDA topic model), supervised classifiers, and
//! evaluation plus an experiment runner.

pub mod classify;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod matrix;
pub mod nn;
pub mod runner;
pub mod seed;
pub mod unsup;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, ErrorKind, Result};
