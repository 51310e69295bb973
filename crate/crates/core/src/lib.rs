//! Context-sensitive derivational morphology generation.
//!
//! Given a sentence with one word removed and the base-form lemma of that
//! word, predict the derived form that fits the context (e.g. *succeed* →
//! *success* in "the play was a great ___"). The crate provides a
//! character-level encoder–decoder trained from scratch with its own
//! reverse-mode differentiation, a trigram Kneser–Ney rescoring baseline,
//! the dataset pipeline and the evaluation harness.

pub mod checkpoint;
pub mod data;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod lstm;
pub mod model;
pub mod ngram;
pub mod optim;
pub mod param;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod synth;
pub mod vocab;

pub use error::{Error, Result};
