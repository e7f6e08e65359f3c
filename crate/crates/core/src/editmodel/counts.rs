use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alphabet::{SymbolId, WordForm};
use crate::transduction::{EditPosteriors, PosteriorEvent};

use super::{ContextRadius, EditContext, Head};

/// Posterior-weighted edits of one `(x, y)` pair: the training examples
/// the M-step extracts from a backward lattice. The context of an event at
/// `(i, j)` is `(x, i, y[..j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairLattice {
    pub x: WordForm,
    pub y: WordForm,
    pub events: Vec<PosteriorEvent>,
}

/// Events below this weight are not materialized as training examples.
pub const EVENT_THRESHOLD: f64 = 1e-6;

impl PairLattice {
    pub fn from_posteriors(x: WordForm, y: WordForm, posteriors: &EditPosteriors) -> Self {
        let events = posteriors.events(EVENT_THRESHOLD);
        PairLattice { x, y, events }
    }

    pub fn total_weight(&self) -> f64 {
        self.events.iter().map(|e| e.weight).sum()
    }
}

fn head_code(head: Head) -> SymbolId {
    match head {
        Head::Sub => 0,
        Head::Ins => 1,
    }
}

/// Backoff keys for a context, most specific first.
pub(crate) fn context_keys(
    ctx: &EditContext<'_>,
    head: Head,
    radius: usize,
    num_symbols: usize,
) -> [Vec<SymbolId>; 3] {
    let pad = num_symbols as SymbolId;
    let mut full = vec![head_code(head)];
    full.extend(ctx.input_window(ContextRadius::Finite(radius), pad));
    full.push(ctx.prefix.last().copied().unwrap_or(pad));
    [full, vec![head_code(head), ctx.x[ctx.i]], vec![head_code(head)]]
}

/// Expected edit counts keyed by local context, aggregated over pairs.
///
/// Each event is recorded under three keys: the full window
/// `(x[i−r..=i+r], y′[−1])`, the centre symbol alone, and the head alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    num_symbols: usize,
    radius: usize,
    #[serde(with = "pairs")]
    table: BTreeMap<Vec<SymbolId>, Vec<f64>>,
}

impl ExpectedCounts {
    pub fn new(num_symbols: usize, radius: usize) -> Self {
        ExpectedCounts {
            num_symbols,
            radius,
            table: BTreeMap::new(),
        }
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Adds `weight` to outcome `slot` of `head` at `ctx`.
    pub fn add_event(&mut self, ctx: &EditContext<'_>, head: Head, slot: usize, weight: f64) {
        assert!(slot <= self.num_symbols, "outcome slot {slot} out of range");
        for key in context_keys(ctx, head, self.radius, self.num_symbols) {
            let row = self
                .table
                .entry(key)
                .or_insert_with(|| vec![0.0; self.num_symbols + 1]);
            row[slot] += weight;
        }
    }

    pub fn add_lattice(&mut self, lattice: &PairLattice) {
        for e in &lattice.events {
            let ctx = EditContext::new(&lattice.x, e.i, &lattice.y[..e.j]);
            let head = if e.is_substitution_head() { Head::Sub } else { Head::Ins };
            self.add_event(&ctx, head, e.outcome_slot(&lattice.y, self.num_symbols), e.weight);
        }
    }

    /// Raw outcome counts recorded under the most specific key of `ctx`.
    pub fn counts(&self, ctx: &EditContext<'_>, head: Head) -> Option<&[f64]> {
        let [full, _, _] = context_keys(ctx, head, self.radius, self.num_symbols);
        self.table.get(&full).map(Vec::as_slice)
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (&Vec<SymbolId>, &Vec<f64>)> {
        self.table.iter()
    }

    /// Full-context entries `(key, counts)`; keys start with the head code.
    pub fn full_contexts(&self) -> impl Iterator<Item = (&[SymbolId], &[f64])> {
        let full_len = 2 * self.radius + 3;
        self.table
            .iter()
            .filter(move |(k, _)| k.len() == full_len)
            .map(|(k, v)| (k.as_slice(), v.as_slice()))
    }
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::alphabet::SymbolId;

    type Table = BTreeMap<Vec<SymbolId>, Vec<f64>>;

    pub fn serialize<S: Serializer>(table: &Table, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<(&Vec<SymbolId>, &Vec<f64>)> = table.iter().collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Table, D::Error> {
        let entries: Vec<(Vec<SymbolId>, Vec<f64>)> = Vec::deserialize(d)?;
        Ok(entries.into_iter().collect())
    }
}
