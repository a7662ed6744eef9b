//! Tri-training for dependency parsing: CoNLL-U handling, evaluation,
//! learners, the tri-training loop, tree ensembles and score-pool analysis.

pub mod analysis;
pub mod conllu;
pub mod ensemble;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod seed;
pub mod synthetic;
pub mod tritraining;

pub use error::{Error, Result};
