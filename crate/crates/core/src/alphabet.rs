//! Phoneme inventories and word forms.
//!
//! Every phoneme is an opaque token (one IPA segment, possibly several code
//! points). Words are stored as sequences of integer ids into a
//! [`PhonemeAlphabet`]. Four control tokens (`<del>`, `<end>`, `<bos>`,
//! `<eos>`) have fixed ids directly above the symbol range and are never
//! part of a word.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer id of a phoneme or control token.
pub type SymbolId = u32;

pub const DEL_TOKEN: &str = "<del>";
pub const END_TOKEN: &str = "<end>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";

const CONTROL_TOKENS: [&str; 4] = [DEL_TOKEN, END_TOKEN, BOS_TOKEN, EOS_TOKEN];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("duplicate phoneme `{0}` in alphabet")]
    Duplicate(String),
    #[error("`{0}` is a reserved control token")]
    Reserved(String),
    #[error("empty phoneme token")]
    EmptyToken,
    #[error("unknown phoneme `{0}`")]
    Unknown(String),
}

/// Ordered set of phoneme tokens with a bijective integer index.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct PhonemeAlphabet {
    symbols: Vec<String>,
    index: HashMap<String, SymbolId>,
}

impl PhonemeAlphabet {
    /// Builds an alphabet keeping the given order. Duplicates are rejected.
    pub fn new<I, S>(symbols: I) -> Result<Self, AlphabetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = PhonemeAlphabet {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for s in symbols {
            let s = s.into();
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(AlphabetError::EmptyToken);
            }
            if CONTROL_TOKENS.contains(&s.as_str()) {
                return Err(AlphabetError::Reserved(s));
            }
            if out.index.contains_key(&s) {
                return Err(AlphabetError::Duplicate(s));
            }
            out.index.insert(s.clone(), out.symbols.len() as SymbolId);
            out.symbols.push(s);
        }
        Ok(out)
    }

    /// Builds an alphabet from arbitrary (possibly repeated) tokens, sorted
    /// by their string value so the result is independent of input order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, AlphabetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set: Vec<String> = tokens.into_iter().map(Into::into).collect();
        set.sort();
        set.dedup();
        Self::new(set)
    }

    /// Number of real phonemes (control tokens excluded).
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, symbol: &str) -> Option<SymbolId> {
        self.index.get(symbol).copied()
    }

    /// Token for an id, including the control tokens above the symbol range.
    pub fn symbol(&self, id: SymbolId) -> Option<&str> {
        let n = self.symbols.len() as SymbolId;
        if id < n {
            Some(&self.symbols[id as usize])
        } else {
            CONTROL_TOKENS.get((id - n) as usize).copied()
        }
    }

    pub fn del_id(&self) -> SymbolId {
        self.symbols.len() as SymbolId
    }

    pub fn end_id(&self) -> SymbolId {
        self.symbols.len() as SymbolId + 1
    }

    pub fn bos_id(&self) -> SymbolId {
        self.symbols.len() as SymbolId + 2
    }

    pub fn eos_id(&self) -> SymbolId {
        self.symbols.len() as SymbolId + 3
    }

    pub fn is_symbol(&self, id: SymbolId) -> bool {
        (id as usize) < self.symbols.len()
    }

    /// Parses space-separated segments, e.g. `"p r ɨ s ɐ̃ u"`.
    pub fn parse(&self, text: &str) -> Result<WordForm, AlphabetError> {
        text.split_whitespace()
            .map(|tok| self.id(tok).ok_or_else(|| AlphabetError::Unknown(tok.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(WordForm)
    }

    /// Parses a word where every `char` is one segment, e.g. `"absEns"`.
    pub fn parse_compact(&self, text: &str) -> Result<WordForm, AlphabetError> {
        let mut buf = [0u8; 4];
        text.chars()
            .map(|c| {
                let tok: &str = c.encode_utf8(&mut buf);
                self.id(tok).ok_or_else(|| AlphabetError::Unknown(tok.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(WordForm)
    }

    /// Space-separated rendering; inverse of [`parse`](Self::parse).
    pub fn render(&self, word: &[SymbolId]) -> String {
        let parts: Vec<&str> = word.iter().map(|&id| self.symbol(id).unwrap_or("?")).collect();
        parts.join(" ")
    }

    /// Concatenated rendering; only unambiguous for single-char segments.
    pub fn render_compact(&self, word: &[SymbolId]) -> String {
        word.iter().map(|&id| self.symbol(id).unwrap_or("?")).collect()
    }
}

impl TryFrom<Vec<String>> for PhonemeAlphabet {
    type Error = AlphabetError;

    fn try_from(symbols: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(symbols)
    }
}

impl From<PhonemeAlphabet> for Vec<String> {
    fn from(a: PhonemeAlphabet) -> Self {
        a.symbols
    }
}

impl fmt::Debug for PhonemeAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("PhonemeAlphabet").field(&self.symbols).finish()
    }
}

/// A word as a sequence of phoneme ids. The empty word is legal.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordForm(pub Vec<SymbolId>);

impl WordForm {
    pub fn new(ids: Vec<SymbolId>) -> Self {
        WordForm(ids)
    }

    pub fn empty() -> Self {
        WordForm(Vec::new())
    }

    pub fn ids(&self) -> &[SymbolId] {
        &self.0
    }

    /// True when every id names a real phoneme of `alphabet`.
    pub fn is_valid_for(&self, alphabet: &PhonemeAlphabet) -> bool {
        self.0.iter().all(|&id| alphabet.is_symbol(id))
    }
}

impl Deref for WordForm {
    type Target = [SymbolId];

    fn deref(&self) -> &[SymbolId] {
        &self.0
    }
}

impl From<Vec<SymbolId>> for WordForm {
    fn from(v: Vec<SymbolId>) -> Self {
        WordForm(v)
    }
}

impl From<&[SymbolId]> for WordForm {
    fn from(v: &[SymbolId]) -> Self {
        WordForm(v.to_vec())
    }
}
