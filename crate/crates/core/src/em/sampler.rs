use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::alphabet::WordForm;
use crate::distance::min_edit_path_strings;
use crate::editmodel::{EditModel, TargetProbes};
use crate::prior::BigramPrior;
use crate::transduction::forward_probes;

/// `log p(x) + Σ_l log p_l(y_l | x)`.
pub fn log_joint(x: &[u32], cognates: &[WordForm], models: &[&dyn EditModel], prior: &BigramPrior) -> f64 {
    assert_eq!(cognates.len(), models.len(), "one model per branch");
    let lp = prior.log_prior(x).unwrap_or(f64::NEG_INFINITY);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    cognates
        .iter()
        .zip(models)
        .map(|(y, m)| forward_probes(m.probes(x, y)).log_likelihood())
        .fold(lp, |acc, v| acc + v)
}

/// Every string on a minimum edit path from `x` to some cognate, plus `x`
/// itself; sorted and deduplicated.
pub fn propose_candidates(x: &WordForm, cognates: &[WordForm]) -> Vec<WordForm> {
    let mut all: BTreeSet<WordForm> = BTreeSet::new();
    all.insert(x.clone());
    for y in cognates {
        all.extend(min_edit_path_strings(x, y));
    }
    all.into_iter().collect()
}

/// Log-joint evaluation for one cognate set under frozen models, memoized
/// by candidate.
pub struct SetScorer<'a> {
    cognates: &'a [WordForm],
    targets: Vec<Box<dyn TargetProbes + 'a>>,
    prior: &'a BigramPrior,
    cache: HashMap<WordForm, f64>,
}

impl<'a> SetScorer<'a> {
    pub fn new(cognates: &'a [WordForm], models: &[&'a dyn EditModel], prior: &'a BigramPrior) -> Self {
        assert_eq!(cognates.len(), models.len(), "one model per branch");
        let targets = cognates.iter().zip(models).map(|(y, m)| m.for_target(y)).collect();
        SetScorer {
            cognates,
            targets,
            prior,
            cache: HashMap::new(),
        }
    }

    pub fn cognates(&self) -> &'a [WordForm] {
        self.cognates
    }

    pub fn log_joint(&mut self, x: &WordForm) -> f64 {
        if let Some(&v) = self.cache.get(x) {
            return v;
        }
        let mut total = self.prior.log_prior(x).unwrap_or(f64::NEG_INFINITY);
        if total > f64::NEG_INFINITY {
            for t in &self.targets {
                total += forward_probes(t.probes(x)).log_likelihood();
                if total == f64::NEG_INFINITY {
                    break;
                }
            }
        }
        self.cache.insert(x.clone(), total);
        total
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }
}

/// Index drawn with probability proportional to `exp(log_weights)`, or
/// `None` when every weight is zero.
pub fn sample_proportional<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let weights: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return Some(k);
        }
        u -= w;
    }
    // rounding left a sliver past the last positive weight
    weights.iter().rposition(|&w| w > 0.0)
}

/// One sampling move: draws the next state from the candidate set of
/// `current` with probability proportional to the joint.
pub fn mh_step<R: Rng + ?Sized>(scorer: &mut SetScorer<'_>, current: &WordForm, rng: &mut R) -> WordForm {
    let candidates = propose_candidates(current, scorer.cognates());
    let joints: Vec<f64> = candidates.iter().map(|c| scorer.log_joint(c)).collect();
    match sample_proportional(&joints, rng) {
        Some(k) => candidates[k].clone(),
        None => {
            log::warn!("every candidate has zero joint probability; keeping the current sample");
            current.clone()
        }
    }
}

/// Greedy ascent over candidate sets: moves to the highest-joint candidate
/// (lexicographically smallest among ties) until the incumbent wins or
/// `max_rounds` is reached. Returns the final word and the incumbent joint
/// after each round.
pub fn decode_one(scorer: &mut SetScorer<'_>, start: &WordForm, max_rounds: usize) -> (WordForm, Vec<f64>) {
    let mut current = start.clone();
    let mut trace = vec![scorer.log_joint(&current)];
    for _ in 0..max_rounds {
        let candidates = propose_candidates(&current, scorer.cognates());
        let mut best: Option<(f64, &WordForm)> = None;
        for c in &candidates {
            let j = scorer.log_joint(c);
            if best.is_none_or(|(b, _)| j > b) {
                best = Some((j, c));
            }
        }
        let (joint, word) = best.expect("candidates include the incumbent");
        if *word == current {
            break;
        }
        current = word.clone();
        trace.push(joint);
    }
    (current, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn proportional_sampling_is_shift_invariant() {
        let a = [0.0, 1.0, -2.0];
        let b: Vec<f64> = a.iter().map(|v| v + 500.0).collect();
        let mut r1 = ChaCha8Rng::seed_from_u64(4);
        let mut r2 = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            assert_eq!(sample_proportional(&a, &mut r1), sample_proportional(&b, &mut r2));
        }
        assert_eq!(sample_proportional(&[f64::NEG_INFINITY; 2], &mut r1), None);
        assert_eq!(sample_proportional(&[f64::NEG_INFINITY, 0.0], &mut r1), Some(1));
    }

    #[test]
    fn identical_cognates_give_single_candidate() {
        let w = WordForm(vec![0, 1, 2]);
        assert_eq!(propose_candidates(&w, &[w.clone(), w.clone()]), vec![w]);
    }
}
