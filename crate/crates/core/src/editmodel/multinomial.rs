use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::alphabet::SymbolId;
use crate::logspace::safe_ln;

use super::counts::context_keys;
use super::{EditContext, EditDistribution, EditModel, ExpectedCounts, Head, UntrainedModel, UntrainedParams};

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Stored {
    counts: ExpectedCounts,
    alpha: f64,
    fallback: UntrainedModel,
}

/// Classical multinomial edit model: one smoothed outcome distribution per
/// local context `(x[i−r..=i+r], y′[−1])`.
///
/// Counts are kept at three levels: the full context, the centre symbol
/// alone and the head alone. Each level is smoothed toward the next more
/// general one with `α·(|Σ|+1)` pseudo-counts; the head level is smoothed
/// toward uniform. Contexts without counts use the most specific level that
/// has some, and untrained defaults when there are none at all.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "Stored", into = "Stored")]
pub struct MultinomialEditModel {
    stored: Stored,
    log_probs: HashMap<Vec<SymbolId>, Vec<f64>>,
}

impl From<Stored> for MultinomialEditModel {
    fn from(stored: Stored) -> Self {
        let outcomes = stored.counts.num_symbols() + 1;
        let mass = stored.alpha * outcomes as f64;
        let uniform = vec![1.0 / outcomes as f64; outcomes];
        let mut probs: HashMap<Vec<SymbolId>, Vec<f64>> = HashMap::new();
        let radius = stored.counts.radius();
        let full_len = 2 * radius + 3;
        // general levels first: each row is shrunk toward its parent row
        for len in [1, 2, full_len] {
            for (key, row) in stored.counts.entries().filter(|(k, _)| k.len() == len) {
                let denom = row.iter().sum::<f64>() + mass;
                if denom <= 0.0 {
                    continue;
                }
                let parent = match len {
                    1 => None,
                    2 => probs.get(&key[..1]),
                    _ => probs.get(&[key[0], key[1 + radius]][..]),
                }
                .unwrap_or(&uniform);
                let p: Vec<f64> = row.iter().zip(parent).map(|(&c, &q)| (c + mass * q) / denom).collect();
                probs.insert(key.clone(), p);
            }
        }
        let log_probs = probs
            .into_iter()
            .map(|(k, p)| (k, p.into_iter().map(safe_ln).collect()))
            .collect();
        MultinomialEditModel { stored, log_probs }
    }
}

impl From<MultinomialEditModel> for Stored {
    fn from(m: MultinomialEditModel) -> Self {
        m.stored
    }
}

/// Fits smoothed relative frequencies `(count + α·(|Σ|+1)·parent) /
/// (total + α·(|Σ|+1))`, where `parent` is the fitted distribution of the
/// next more general context (uniform for the head level, which gives
/// `(count + α) / (total + α·(|Σ|+1))`). `α = 0` is the plain maximum
/// likelihood estimate. Empty counts give a model that answers with
/// untrained defaults.
pub fn fit_multinomial(counts: &ExpectedCounts, alpha: f64) -> MultinomialEditModel {
    fit_multinomial_with_fallback(
        counts,
        alpha,
        UntrainedModel::from_params(counts.num_symbols(), &UntrainedParams::default())
            .expect("default untrained parameters are valid"),
    )
}

pub fn fit_multinomial_with_fallback(
    counts: &ExpectedCounts,
    alpha: f64,
    fallback: UntrainedModel,
) -> MultinomialEditModel {
    assert!(alpha >= 0.0, "smoothing constant must be non-negative");
    MultinomialEditModel::from(Stored {
        counts: counts.clone(),
        alpha,
        fallback,
    })
}

impl MultinomialEditModel {
    pub fn radius(&self) -> usize {
        self.stored.counts.radius()
    }

    pub fn alpha(&self) -> f64 {
        self.stored.alpha
    }

    pub fn counts(&self) -> &ExpectedCounts {
        &self.stored.counts
    }

    fn head_distribution(&self, ctx: &EditContext<'_>, head: Head) -> Vec<f64> {
        let n = self.stored.counts.num_symbols();
        for key in context_keys(ctx, head, self.radius(), n) {
            if let Some(row) = self.log_probs.get(&key) {
                return row.clone();
            }
        }
        let d = self.stored.fallback.distribution(ctx.x[ctx.i]);
        match head {
            Head::Sub => d.log_sub,
            Head::Ins => d.log_ins,
        }
    }

    pub fn distribution(&self, ctx: &EditContext<'_>) -> EditDistribution {
        EditDistribution {
            log_sub: self.head_distribution(ctx, Head::Sub),
            log_ins: self.head_distribution(ctx, Head::Ins),
        }
    }
}

impl EditModel for MultinomialEditModel {
    fn num_symbols(&self) -> usize {
        self.stored.counts.num_symbols()
    }

    fn distributions(&self, x: &[SymbolId], contexts: &[(usize, &[SymbolId])]) -> Vec<EditDistribution> {
        contexts
            .iter()
            .map(|&(i, prefix)| self.distribution(&EditContext::new(x, i, prefix)))
            .collect()
    }
}
