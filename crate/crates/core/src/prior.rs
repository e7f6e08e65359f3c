//! Phoneme bigram model of the protolanguage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::SymbolId;
use crate::logspace::safe_ln;

pub const DEFAULT_PRIOR_ALPHA: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum PriorError {
    #[error("cannot fit a bigram prior on an empty corpus")]
    EmptyCorpus,
    #[error("symbol id {0} is outside the prior's alphabet")]
    UnknownSymbol(SymbolId),
    #[error("smoothing constant must be finite and non-negative, got {0}")]
    BadAlpha(f64),
}

/// Transition table over `(Σ ∪ {<bos>}) × (Σ ∪ {<eos>})`. Row `|Σ|` is
/// `<bos>`; column `|Σ|` is `<eos>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigramPrior {
    num_symbols: usize,
    alpha: f64,
    log_probs: Vec<Vec<f64>>,
}

/// Fits add-α smoothed bigram transitions, including the word-boundary
/// transitions. A conditioning symbol that never occurs with `α = 0`
/// gets a uniform row.
pub fn fit_bigram(corpus: &[Vec<SymbolId>], num_symbols: usize, alpha: f64) -> Result<BigramPrior, PriorError> {
    if corpus.is_empty() {
        return Err(PriorError::EmptyCorpus);
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(PriorError::BadAlpha(alpha));
    }
    let n = num_symbols;
    let mut counts = vec![vec![0.0f64; n + 1]; n + 1];
    for word in corpus {
        let mut prev = n;
        for &s in word {
            if s as usize >= n {
                return Err(PriorError::UnknownSymbol(s));
            }
            counts[prev][s as usize] += 1.0;
            prev = s as usize;
        }
        counts[prev][n] += 1.0;
    }
    let log_probs = counts
        .iter()
        .map(|row| {
            let denom = row.iter().sum::<f64>() + alpha * (n + 1) as f64;
            if denom == 0.0 {
                vec![-((n + 1) as f64).ln(); n + 1]
            } else {
                row.iter().map(|&c| safe_ln((c + alpha) / denom)).collect()
            }
        })
        .collect();
    Ok(BigramPrior {
        num_symbols,
        alpha,
        log_probs,
    })
}

impl BigramPrior {
    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `log p(next | prev)`; `None` stands for `<bos>` as `prev` and
    /// `<eos>` as `next`.
    pub fn transition(&self, prev: Option<SymbolId>, next: Option<SymbolId>) -> f64 {
        let n = self.num_symbols;
        let r = prev.map_or(n, |s| s as usize);
        let c = next.map_or(n, |s| s as usize);
        self.log_probs[r][c]
    }

    pub fn log_prior(&self, x: &[SymbolId]) -> Result<f64, PriorError> {
        let n = self.num_symbols;
        let mut prev = n;
        let mut total = 0.0;
        for &s in x {
            if s as usize >= n {
                return Err(PriorError::UnknownSymbol(s));
            }
            total += self.log_probs[prev][s as usize];
            prev = s as usize;
        }
        Ok(total + self.log_probs[prev][n])
    }
}

/// `log p(x)` under `prior`.
pub fn log_prior(prior: &BigramPrior, x: &[SymbolId]) -> Result<f64, PriorError> {
    prior.log_prior(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: SymbolId = 0;
    const B: SymbolId = 1;
    const C: SymbolId = 2;

    #[test]
    fn single_word_corpus() {
        let p = fit_bigram(&[vec![A, B]], 2, 0.0).unwrap();
        assert_eq!(p.log_prior(&[A, B]).unwrap(), 0.0);
        assert_eq!(p.log_prior(&[B, A]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn relative_frequency() {
        let p = fit_bigram(&[vec![A, B], vec![A, C]], 3, 0.0).unwrap();
        assert!((p.transition(Some(A), Some(B)).exp() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn add_one_smoothing() {
        // outcomes after `a`: a, b, <eos>; one observed `b`
        let p = fit_bigram(&[vec![A, B]], 2, 1.0).unwrap();
        assert!((p.transition(Some(A), Some(B)).exp() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_word_and_errors() {
        let p = fit_bigram(&[vec![A]], 2, 0.5).unwrap();
        assert_eq!(p.log_prior(&[]).unwrap(), p.transition(None, None));
        assert_eq!(fit_bigram(&[], 2, 0.1), Err(PriorError::EmptyCorpus));
        assert_eq!(p.log_prior(&[5]), Err(PriorError::UnknownSymbol(5)));
    }

    #[test]
    fn rows_normalize() {
        let p = fit_bigram(&[vec![A, B, A], vec![B]], 3, 0.0).unwrap();
        for prev in [None, Some(A), Some(B), Some(C)] {
            let total: f64 = (0..3)
                .map(|s| p.transition(prev, Some(s)).exp())
                .sum::<f64>()
                + p.transition(prev, None).exp();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}
