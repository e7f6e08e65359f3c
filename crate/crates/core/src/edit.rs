//! Character-level edits and their replay automaton.
//!
//! The automaton walks the input left to right. Each input position first
//! receives one substitution outcome; `<del>` skips to the next position,
//! any phoneme is emitted and opens an insertion phase that emits phonemes
//! until `<end>` closes it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{SymbolId, WordForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EditOp {
    Sub,
    Ins,
}

/// Outcome of one edit: a phoneme or the head's stop token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Emit(SymbolId),
    /// `<del>` for substitutions, `<end>` for insertions.
    Stop,
}

/// One edit together with the indices that locate its context `(x, i, y′)`.
///
/// `input_index` is the 0-based position in `x` being edited and
/// `prefix_len` is `|y′|`, the length of the output produced before the edit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edit {
    pub op: EditOp,
    pub outcome: Outcome,
    pub input_index: usize,
    pub prefix_len: usize,
}

impl Edit {
    pub fn sub(input_index: usize, prefix_len: usize, outcome: Outcome) -> Self {
        Edit {
            op: EditOp::Sub,
            outcome,
            input_index,
            prefix_len,
        }
    }

    pub fn ins(input_index: usize, prefix_len: usize, outcome: Outcome) -> Self {
        Edit {
            op: EditOp::Ins,
            outcome,
            input_index,
            prefix_len,
        }
    }
}

/// Ordered edit list. `truncated` marks a sequence whose insertion run was
/// force-closed by the sampler's insertion cap.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSequence {
    pub edits: Vec<Edit>,
    pub truncated: bool,
}

impl EditSequence {
    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// The edit sequence that copies `x` unchanged.
    pub fn identity(x: &[SymbolId]) -> Self {
        let mut edits = Vec::with_capacity(2 * x.len());
        for (i, &c) in x.iter().enumerate() {
            edits.push(Edit::sub(i, i, Outcome::Emit(c)));
            edits.push(Edit::ins(i, i + 1, Outcome::Stop));
        }
        EditSequence {
            edits,
            truncated: false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("edit {position}: expected a {expected:?} edit")]
    WrongOp { position: usize, expected: EditOp },
    #[error("edit {position}: input index {found} but the automaton is at {expected}")]
    IndexSkip {
        position: usize,
        expected: usize,
        found: usize,
    },
    #[error("edit {position}: prefix length {found} but {expected} symbols were produced")]
    PrefixMismatch {
        position: usize,
        expected: usize,
        found: usize,
    },
    #[error("edit {position}: edit past the end of the input")]
    PastEnd { position: usize },
    #[error("sequence ends before the input is consumed")]
    Incomplete,
}

/// Replays `edits` over `x` and returns the produced output.
pub fn replay(x: &[SymbolId], edits: &EditSequence) -> Result<WordForm, ReplayError> {
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut inserting = false;
    for (position, e) in edits.edits.iter().enumerate() {
        if i >= x.len() {
            return Err(ReplayError::PastEnd { position });
        }
        let expected = if inserting { EditOp::Ins } else { EditOp::Sub };
        if e.op != expected {
            return Err(ReplayError::WrongOp { position, expected });
        }
        if e.input_index != i {
            return Err(ReplayError::IndexSkip {
                position,
                expected: i,
                found: e.input_index,
            });
        }
        if e.prefix_len != out.len() {
            return Err(ReplayError::PrefixMismatch {
                position,
                expected: out.len(),
                found: e.prefix_len,
            });
        }
        match e.outcome {
            Outcome::Emit(s) => {
                out.push(s);
                inserting = true;
            }
            Outcome::Stop => {
                i += 1;
                inserting = false;
            }
        }
    }
    if inserting || i != x.len() {
        return Err(ReplayError::Incomplete);
    }
    Ok(WordForm(out))
}
