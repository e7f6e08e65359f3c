//! Character-level edit models `q_sub` and `q_ins`.
//!
//! Every model maps an edit context `(x, i, y′)` to two distributions over
//! `|Σ| + 1` slots: the phonemes followed by the head's stop outcome
//! (`<del>` for substitutions, `<end>` for insertions). Three
//! implementations share the [`EditModel`] trait:
//!
//! * [`UntrainedModel`]: fixed, context-free probabilities.
//! * [`MultinomialEditModel`]: count tables over a local window, the
//!   classical baseline.
//! * [`NeuralEditModel`]: recurrent encoders over the input word and the
//!   output prefix with two softmax heads.

mod context;
mod counts;
mod multinomial;
pub mod neural;
mod train;
mod untrained;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::SymbolId;
use crate::transduction::EditProbes;

pub use context::EditContext;
pub use counts::{ExpectedCounts, PairLattice};
pub use multinomial::{fit_multinomial, MultinomialEditModel};
pub use neural::{NeuralConfig, NeuralEditModel};
pub use train::{train_neural, TrainConfig, TrainReport};
pub use untrained::{untrained_model, UntrainedModel, UntrainedParams};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid edit model configuration: {0}")]
    Config(String),
    #[error("non-finite training loss at epoch {epoch}, batch {batch} (loss = {loss}); lower the learning rate")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
}

/// The two edit heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Head {
    Sub,
    Ins,
}

/// Log-probabilities of both heads at one context. Index `|Σ|` is the
/// stop outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EditDistribution {
    pub log_sub: Vec<f64>,
    pub log_ins: Vec<f64>,
}

impl EditDistribution {
    pub fn head(&self, head: Head) -> &[f64] {
        match head {
            Head::Sub => &self.log_sub,
            Head::Ins => &self.log_ins,
        }
    }
}

/// How many symbols of context a model sees on each side of the edited
/// input position (and `radius + 1` symbols of output history).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ContextRadius {
    Finite(usize),
    #[default]
    Unbounded,
}

impl fmt::Display for ContextRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextRadius::Finite(k) => write!(f, "{k}"),
            ContextRadius::Unbounded => f.write_str("inf"),
        }
    }
}

impl From<ContextRadius> for String {
    fn from(r: ContextRadius) -> Self {
        r.to_string()
    }
}

impl TryFrom<String> for ContextRadius {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for ContextRadius {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "∞" | "infinity" => Ok(ContextRadius::Unbounded),
            other => other
                .parse::<usize>()
                .map(ContextRadius::Finite)
                .map_err(|_| format!("context radius must be a non-negative integer or `inf`, got `{s}`")),
        }
    }
}

/// A conditional edit model for one language branch.
///
/// Implementations must be re-entrant: evaluation never mutates the model.
pub trait EditModel: Send + Sync {
    /// `|Σ|`; distributions have `num_symbols() + 1` slots.
    fn num_symbols(&self) -> usize;

    /// Distributions for each `(i, y′)` context of input `x`.
    ///
    /// # Panics
    ///
    /// When some `i >= x.len()` or a context holds a non-phoneme id.
    fn distributions(&self, x: &[SymbolId], contexts: &[(usize, &[SymbolId])]) -> Vec<EditDistribution>;

    /// Edit probes for every lattice context of `(x, y)`.
    fn probes(&self, x: &[SymbolId], y: &[SymbolId]) -> EditProbes {
        let mut contexts = Vec::with_capacity(x.len() * (y.len() + 1));
        for i in 0..x.len() {
            for j in 0..=y.len() {
                contexts.push((i, &y[..j]));
            }
        }
        let dists = self.distributions(x, &contexts);
        EditProbes::from_distributions(x.len(), y, &dists)
    }

    /// Probes for several inputs against one output word.
    fn probes_for_target(&self, xs: &[&[SymbolId]], y: &[SymbolId]) -> Vec<EditProbes> {
        xs.iter().map(|x| self.probes(x, y)).collect()
    }

    /// A scorer for many candidate inputs against the fixed output `y`.
    /// Implementations may precompute everything that depends on `y` only.
    fn for_target<'a>(&'a self, y: &[SymbolId]) -> Box<dyn TargetProbes + 'a> {
        Box::new(PlainTarget {
            model: self,
            y: y.to_vec(),
        })
    }
}

/// Lattice probes of varying inputs against one output word.
pub trait TargetProbes: Send + Sync {
    fn probes(&self, x: &[SymbolId]) -> EditProbes;
}

struct PlainTarget<'a, M: ?Sized> {
    model: &'a M,
    y: Vec<SymbolId>,
}

impl<M: EditModel + ?Sized> TargetProbes for PlainTarget<'_, M> {
    fn probes(&self, x: &[SymbolId]) -> EditProbes {
        self.model.probes(x, &self.y)
    }
}

/// Batched evaluation of edit distributions at the given contexts of `x`.
pub fn evaluate_edits(
    model: &dyn EditModel,
    x: &[SymbolId],
    contexts: &[(usize, &[SymbolId])],
) -> Vec<EditDistribution> {
    model.distributions(x, contexts)
}
