use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alphabet::WordForm;
use crate::distance::levenshtein;

use super::DataError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean segment-level edit distance to the gold ancestors.
    pub mean_distance: f64,
    /// Fraction of sets reconstructed exactly.
    pub exact_match: f64,
    /// `(id, distance)` in gold order.
    pub distances: Vec<(String, usize)>,
}

/// Scores reconstructions against gold ancestors. Both lists must carry
/// the same ids.
pub fn evaluate(recon: &[(String, WordForm)], gold: &[(String, WordForm)]) -> Result<EvalReport, DataError> {
    let by_id: BTreeMap<&str, &WordForm> = recon.iter().map(|(id, w)| (id.as_str(), w)).collect();
    if by_id.len() != recon.len() {
        return Err(DataError::IdMismatch("duplicate ids among reconstructions".into()));
    }
    if recon.len() != gold.len() {
        return Err(DataError::IdMismatch(format!(
            "{} reconstructions for {} gold forms",
            recon.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(DataError::Empty);
    }
    let mut distances = Vec::with_capacity(gold.len());
    for (id, g) in gold {
        let r = by_id
            .get(id.as_str())
            .ok_or_else(|| DataError::IdMismatch(format!("no reconstruction for `{id}`")))?;
        distances.push((id.clone(), levenshtein(r, g)));
    }
    let n = distances.len() as f64;
    let mean_distance = distances.iter().map(|(_, d)| *d as f64).sum::<f64>() / n;
    let exact_match = distances.iter().filter(|(_, d)| *d == 0).count() as f64 / n;
    Ok(EvalReport {
        mean_distance,
        exact_match,
        distances,
    })
}
