//! Cognate datasets: TSV ingestion, synthetic language families with known
//! ancestors, and reconstruction scoring.

mod eval;
mod synthetic;
mod tsv;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{AlphabetError, PhonemeAlphabet, WordForm};

pub use eval::{evaluate, EvalReport};
pub use synthetic::{default_benchmark, generate_family, proto_alphabet, Action, BranchSpec, Context, SoundRule};
pub use tsv::{
    load_corpus, load_dataset, load_reconstructions, parse_corpus, parse_dataset, parse_reconstructions,
    save_dataset, save_reconstructions, write_dataset, write_reconstructions, EMPTY_WORD,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: expected {expected} cells, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}: duplicate cognate-set id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: empty cell in column `{column}` (cognate sets must be full)")]
    MissingForm { row: usize, column: String },
    #[error("row {row}: {source}")]
    Symbol {
        row: usize,
        #[source]
        source: AlphabetError,
    },
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error("reconstruction ids do not match gold ids: {0}")]
    IdMismatch(String),
    #[error("invalid generator configuration: {0}")]
    Config(String),
}

/// Observed forms of one proto-word, one per language, plus the ancestor
/// when known.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CognateSet {
    pub id: String,
    pub forms: Vec<WordForm>,
    pub gold: Option<WordForm>,
}

/// A row before symbol interning: the id, one segment list per language
/// and the optional gold ancestor.
pub type RawSet = (String, Vec<Vec<String>>, Option<Vec<String>>);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CognateDataset {
    pub languages: Vec<String>,
    /// Header name of the gold column, if the data carries ancestors.
    pub gold_language: Option<String>,
    pub sets: Vec<CognateSet>,
    pub alphabet: PhonemeAlphabet,
}

impl CognateDataset {
    /// Interns segment strings over the sorted union of all symbols seen.
    pub fn from_raw(
        languages: Vec<String>,
        gold_language: Option<String>,
        rows: Vec<RawSet>,
    ) -> Result<Self, DataError> {
        if languages.is_empty() {
            return Err(DataError::Header("at least one language column is required".into()));
        }
        let mut symbols = BTreeSet::new();
        for (_, forms, gold) in &rows {
            for seg in forms.iter().flatten().chain(gold.iter().flatten()) {
                symbols.insert(seg.clone());
            }
        }
        let alphabet = PhonemeAlphabet::from_tokens(symbols)?;
        let intern = |segs: &[String]| WordForm(segs.iter().map(|s| alphabet.id(s).expect("collected above")).collect());
        let sets = rows
            .iter()
            .map(|(id, forms, gold)| CognateSet {
                id: id.clone(),
                forms: forms.iter().map(|f| intern(f)).collect(),
                gold: gold.as_deref().map(intern),
            })
            .collect();
        Ok(CognateDataset {
            languages,
            gold_language,
            sets,
            alphabet,
        })
    }

    pub fn num_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn has_gold(&self) -> bool {
        self.sets.iter().all(|s| s.gold.is_some()) && !self.sets.is_empty()
    }

    /// Gold ancestors in set order (sets without one are skipped).
    pub fn gold_forms(&self) -> Vec<WordForm> {
        self.sets.iter().filter_map(|s| s.gold.clone()).collect()
    }

    /// Re-interns every form over the union of the current alphabet and
    /// `extra`, keeping the sorted-token order.
    pub fn extend_alphabet<I, S>(&mut self, extra: I) -> Result<(), DataError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut symbols: BTreeSet<String> = self.alphabet.symbols().iter().cloned().collect();
        symbols.extend(extra.into_iter().map(Into::into));
        let new = PhonemeAlphabet::from_tokens(symbols)?;
        if new == self.alphabet {
            return Ok(());
        }
        let remap: Vec<u32> = self
            .alphabet
            .symbols()
            .iter()
            .map(|s| new.id(s).expect("superset"))
            .collect();
        let apply = |w: &mut WordForm| w.0.iter_mut().for_each(|s| *s = remap[*s as usize]);
        for set in &mut self.sets {
            set.forms.iter_mut().for_each(apply);
            if let Some(g) = &mut set.gold {
                apply(g);
            }
        }
        self.alphabet = new;
        Ok(())
    }

    /// Checks the structural invariants: every form is over the alphabet,
    /// every set is full, ids are unique.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.languages.is_empty() {
            return Err(DataError::Header("no languages".into()));
        }
        let mut seen = BTreeSet::new();
        for (row, set) in self.sets.iter().enumerate() {
            if !seen.insert(&set.id) {
                return Err(DataError::DuplicateId {
                    row: row + 1,
                    id: set.id.clone(),
                });
            }
            if set.forms.len() != self.languages.len() {
                return Err(DataError::Ragged {
                    row: row + 1,
                    expected: self.languages.len(),
                    found: set.forms.len(),
                });
            }
            for w in set.forms.iter().chain(set.gold.iter()) {
                if let Some(&bad) = w.iter().find(|&&s| !self.alphabet.is_symbol(s)) {
                    return Err(DataError::Symbol {
                        row: row + 1,
                        source: AlphabetError::Unknown(format!("#{bad}")),
                    });
                }
            }
        }
        Ok(())
    }
}
