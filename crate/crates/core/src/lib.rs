//! Per-bias n-gram language models for news text, a bias scorer, machine-text
//! detectors and annotation-study metrics.

pub mod bias;
pub mod corpus;
pub mod detection;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod linear;
pub mod lm;
pub mod pipeline;
pub mod tokenizer;

pub use error::{Error, Result};
