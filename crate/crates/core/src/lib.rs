//! Script-evolution toolkit: staged glyph corpora, an eleven-task benchmark
//! generator with exact scoring, and a three-stage glyph curriculum model.

pub mod benchgen;
pub mod cli;
pub mod corpus;
pub mod curriculum;
pub mod embed;
pub mod error;
pub mod harness;
pub mod project;
pub mod scorer;
pub mod seed;

pub use error::{Error, Result};
