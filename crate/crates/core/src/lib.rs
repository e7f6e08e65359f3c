//! Protolanguage reconstruction with neural edit models.
//!
//! Given cognate sets from several daughter languages, the crate infers
//! ancestral word forms and per-branch sound-change models by Monte-Carlo
//! expectation maximization.

pub mod alphabet;
pub mod distance;
pub mod edit;
pub mod editmodel;
pub mod logspace;
pub mod transduction;
pub mod data;
pub mod prior;
pub mod em;
