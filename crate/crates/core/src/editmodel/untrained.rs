use serde::{Deserialize, Serialize};

use crate::alphabet::{PhonemeAlphabet, SymbolId};
use crate::logspace::safe_ln;

use super::{EditDistribution, EditModel, ModelError};

const TOLERANCE: f64 = 1e-9;

/// Context-free edit probabilities of the untrained baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UntrainedParams {
    pub p_self: f64,
    pub p_sub_other: f64,
    pub p_del: f64,
    pub p_end: f64,
}

impl Default for UntrainedParams {
    fn default() -> Self {
        UntrainedParams {
            p_self: 0.85,
            p_sub_other: 0.05,
            p_del: 0.10,
            p_end: 0.90,
        }
    }
}

/// A model that ignores context: copy with `p_self`, substitute another
/// phoneme uniformly out of `p_sub_other`, delete with `p_del`; insert a
/// uniform phoneme out of `1 - p_end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UntrainedModel {
    num_symbols: usize,
    log_self: f64,
    log_other: f64,
    log_del: f64,
    log_ins_each: f64,
    log_end: f64,
}

/// Builds the untrained model, validating that both heads normalize.
pub fn untrained_model(
    alphabet: &PhonemeAlphabet,
    p_self: f64,
    p_sub_other: f64,
    p_del: f64,
    p_ins: f64,
    p_end: f64,
) -> Result<UntrainedModel, ModelError> {
    UntrainedModel::new(alphabet.len(), p_self, p_sub_other, p_del, p_ins, p_end)
}

impl UntrainedModel {
    pub fn new(
        num_symbols: usize,
        p_self: f64,
        p_sub_other: f64,
        p_del: f64,
        p_ins: f64,
        p_end: f64,
    ) -> Result<Self, ModelError> {
        let all = [p_self, p_sub_other, p_del, p_ins, p_end];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ModelError::Config(format!("probabilities must lie in [0, 1]: {all:?}")));
        }
        if (p_self + p_sub_other + p_del - 1.0).abs() > TOLERANCE {
            return Err(ModelError::Config(format!(
                "substitution head sums to {}, not 1",
                p_self + p_sub_other + p_del
            )));
        }
        if (p_ins + p_end - 1.0).abs() > TOLERANCE {
            return Err(ModelError::Config(format!("insertion head sums to {}, not 1", p_ins + p_end)));
        }
        if num_symbols == 0 {
            return Err(ModelError::Config("empty alphabet".into()));
        }
        // a one-symbol alphabet has no other phoneme; that mass copies
        let (p_self, p_sub_other) = if num_symbols == 1 {
            (p_self + p_sub_other, 0.0)
        } else {
            (p_self, p_sub_other)
        };
        let others = (num_symbols - 1).max(1) as f64;
        Ok(UntrainedModel {
            num_symbols,
            log_self: safe_ln(p_self),
            log_other: safe_ln(p_sub_other / others),
            log_del: safe_ln(p_del),
            log_ins_each: safe_ln(p_ins / num_symbols as f64),
            log_end: safe_ln(p_end),
        })
    }

    pub fn from_params(num_symbols: usize, p: &UntrainedParams) -> Result<Self, ModelError> {
        Self::new(num_symbols, p.p_self, p.p_sub_other, p.p_del, 1.0 - p.p_end, p.p_end)
    }

    /// Copies every symbol with probability one.
    pub fn identity(num_symbols: usize) -> Self {
        Self::new(num_symbols, 1.0, 0.0, 0.0, 0.0, 1.0).expect("identity parameters are valid")
    }

    /// Deletes every symbol with probability one.
    pub fn deleting(num_symbols: usize) -> Self {
        Self::new(num_symbols, 0.0, 0.0, 1.0, 0.0, 1.0).expect("deletion parameters are valid")
    }

    pub(crate) fn distribution(&self, centre: SymbolId) -> EditDistribution {
        let n = self.num_symbols;
        let mut log_sub = vec![self.log_other; n + 1];
        log_sub[centre as usize] = self.log_self;
        log_sub[n] = self.log_del;
        let mut log_ins = vec![self.log_ins_each; n + 1];
        log_ins[n] = self.log_end;
        EditDistribution { log_sub, log_ins }
    }
}

impl EditModel for UntrainedModel {
    fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    fn distributions(&self, x: &[SymbolId], contexts: &[(usize, &[SymbolId])]) -> Vec<EditDistribution> {
        contexts
            .iter()
            .map(|&(i, _)| {
                assert!(i < x.len(), "input index {i} out of range");
                self.distribution(x[i])
            })
            .collect()
    }
}
