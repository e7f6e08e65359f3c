//! The word-level edit process: sampling, the forward DP for `p(y | x)` and
//! the backward DP for posterior edit probabilities.
//!
//! Lattice conventions (all indices 0-based):
//!
//! * `sub(i, j)`: positions `x[..i]` are fully edited into `y[..j]` and the
//!   next operation is the substitution of `x[i]` (for `i = |x|` the process
//!   has finished).
//! * `ins(i, j)`: `x[i]` has been substituted by a phoneme, `y[..j]` has been
//!   produced and the insertion phase of `x[i]` is active.
//!
//! Edit probes are evaluated at context `(x, i, y[..j])`: `δ_sub(i, j)` and
//! `δ_ins(i, j)` are the probabilities of emitting `y[j]`, `δ_del(i, j)` and
//! `δ_end(i, j)` those of the stop outcomes.

use rand::Rng;
use thiserror::Error;

use crate::alphabet::{SymbolId, WordForm};
use crate::edit::{Edit, EditSequence, Outcome};
use crate::editmodel::{EditDistribution, EditModel};
use crate::logspace::{log_add_exp, LOG_ZERO};

/// Insertion cap of the generative sampler: after this many consecutive
/// insertions at one input position the phase is closed with `<end>`.
pub const DEFAULT_INSERTION_CAP: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum TransductionError {
    #[error("p(y | x) = 0: edit posteriors are undefined for an impossible pair")]
    ImpossiblePair,
}

/// Log-probabilities of every edit the lattice of `(x, y)` can take.
#[derive(Clone, Debug, PartialEq)]
pub struct EditProbes {
    x_len: usize,
    y_len: usize,
    log_sub: Vec<f64>,
    log_del: Vec<f64>,
    log_ins: Vec<f64>,
    log_end: Vec<f64>,
}

impl EditProbes {
    /// Builds probes from one distribution per context, ordered by `i` then
    /// `j` over `0..|x|` × `0..=|y|`.
    pub fn from_distributions(
        x_len: usize,
        y: &[SymbolId],
        dists: &[EditDistribution],
    ) -> Self {
        let cols = y.len() + 1;
        assert_eq!(dists.len(), x_len * cols, "one distribution per lattice context");
        let mut probes = EditProbes::empty(x_len, y.len());
        for i in 0..x_len {
            for j in 0..cols {
                let d = &dists[i * cols + j];
                probes.set(i, j, d, y.get(j).copied());
            }
        }
        probes
    }

    pub(crate) fn empty(x_len: usize, y_len: usize) -> Self {
        let size = x_len * (y_len + 1);
        EditProbes {
            x_len,
            y_len,
            log_sub: vec![LOG_ZERO; size],
            log_del: vec![LOG_ZERO; size],
            log_ins: vec![LOG_ZERO; size],
            log_end: vec![LOG_ZERO; size],
        }
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, d: &EditDistribution, next: Option<SymbolId>) {
        let k = self.idx(i, j);
        let stop = d.log_sub.len() - 1;
        self.log_del[k] = d.log_sub[stop];
        self.log_end[k] = d.log_ins[stop];
        if let Some(s) = next {
            self.log_sub[k] = d.log_sub[s as usize];
            self.log_ins[k] = d.log_ins[s as usize];
        }
    }

    /// Direct assignment of the four probes at `(i, j)`, in log-space.
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.x_len && j <= self.y_len);
        i * (self.y_len + 1) + j
    }

    pub fn x_len(&self) -> usize {
        self.x_len
    }

    pub fn y_len(&self) -> usize {
        self.y_len
    }

    /// `log δ_sub(i, j)`; `-inf` when `j = |y|`.
    #[inline]
    pub fn sub(&self, i: usize, j: usize) -> f64 {
        self.log_sub[self.idx(i, j)]
    }

    #[inline]
    pub fn del(&self, i: usize, j: usize) -> f64 {
        self.log_del[self.idx(i, j)]
    }

    #[inline]
    pub fn ins(&self, i: usize, j: usize) -> f64 {
        self.log_ins[self.idx(i, j)]
    }

    #[inline]
    pub fn end(&self, i: usize, j: usize) -> f64 {
        self.log_end[self.idx(i, j)]
    }
}

/// Row-major `(|x|+1) × (|y|+1)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Grid {
            cols,
            data: vec![v; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Forward lattice `f_sub`, `f_ins` in log-space, with the probes it was
/// computed from so [`backward`] can reuse them.
#[derive(Clone, Debug)]
pub struct ForwardTable {
    pub probes: EditProbes,
    pub log_sub: Grid,
    pub log_ins: Grid,
}

impl ForwardTable {
    /// `log p(y | x) = log f_sub(|x|, |y|)`.
    pub fn log_likelihood(&self) -> f64 {
        self.log_sub.get(self.probes.x_len, self.probes.y_len)
    }
}

/// Computes `log p(y | x)` by summing over every edit sequence.
pub fn forward(x: &[SymbolId], y: &[SymbolId], model: &dyn EditModel) -> ForwardTable {
    forward_probes(model.probes(x, y))
}

/// Forward DP over precomputed probes.
pub fn forward_probes(probes: EditProbes) -> ForwardTable {
    let (n, m) = (probes.x_len, probes.y_len);
    let mut f_sub = Grid::filled(n + 1, m + 1, LOG_ZERO);
    let mut f_ins = Grid::filled(n + 1, m + 1, LOG_ZERO);
    f_sub.set(0, 0, 0.0);
    for i in 0..=n {
        if i > 0 {
            for j in 0..=m {
                let ended = f_ins.get(i - 1, j) + probes.end(i - 1, j);
                let deleted = f_sub.get(i - 1, j) + probes.del(i - 1, j);
                f_sub.set(i, j, log_add_exp(ended, deleted));
            }
        }
        if i < n {
            for j in 1..=m {
                let substituted = f_sub.get(i, j - 1) + probes.sub(i, j - 1);
                let inserted = f_ins.get(i, j - 1) + probes.ins(i, j - 1);
                f_ins.set(i, j, log_add_exp(substituted, inserted));
            }
        }
    }
    ForwardTable {
        probes,
        log_sub: f_sub,
        log_ins: f_ins,
    }
}

/// `log p(y | x)` under the insertion-capped process: after `cap`
/// consecutive insertions `<end>` is forced with probability one.
pub fn forward_capped(probes: &EditProbes, cap: usize) -> f64 {
    let (n, m) = (probes.x_len, probes.y_len);
    let runs = cap + 1;
    let mut sub = Grid::filled(n + 1, m + 1, LOG_ZERO);
    // ins[(j, r)] for the current row: r insertions already made
    let mut ins = vec![LOG_ZERO; (m + 1) * runs];
    sub.set(0, 0, 0.0);
    for i in 0..n {
        ins.fill(LOG_ZERO);
        for j in 1..=m {
            ins[j * runs] = sub.get(i, j - 1) + probes.sub(i, j - 1);
            for r in 1..runs {
                ins[j * runs + r] = ins[(j - 1) * runs + r - 1] + probes.ins(i, j - 1);
            }
        }
        for j in 0..=m {
            let mut acc = sub.get(i, j) + probes.del(i, j);
            for r in 0..cap {
                acc = log_add_exp(acc, ins[j * runs + r] + probes.end(i, j));
            }
            acc = log_add_exp(acc, ins[j * runs + cap]);
            sub.set(i + 1, j, acc);
        }
    }
    sub.get(n, m)
}

/// Which edit of the lattice an [`EditPosteriors`] entry refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// substitution of `x[i]` by `y[j]`
    Sub,
    /// substitution of `x[i]` by `<del>`
    Del,
    /// insertion of `y[j]` during the phase of `x[i]`
    Ins,
    /// `<end>` closing the phase of `x[i]`
    End,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorEvent {
    pub kind: EventKind,
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl PosteriorEvent {
    /// Index of the outcome in the head's distribution (`|Σ|` is the stop slot).
    pub fn outcome_slot(&self, y: &[SymbolId], num_symbols: usize) -> usize {
        match self.kind {
            EventKind::Sub | EventKind::Ins => y[self.j] as usize,
            EventKind::Del | EventKind::End => num_symbols,
        }
    }

    pub fn is_substitution_head(&self) -> bool {
        matches!(self.kind, EventKind::Sub | EventKind::Del)
    }
}

/// Posterior probability `p(edit ∈ Δ | x, y)` of every lattice edit, plus
/// the state-occupancy tables `g_sub`, `g_ins`.
#[derive(Clone, Debug)]
pub struct EditPosteriors {
    pub log_likelihood: f64,
    pub sub: Grid,
    pub del: Grid,
    pub ins: Grid,
    pub end: Grid,
    pub g_sub: Grid,
    pub g_ins: Grid,
}

impl EditPosteriors {
    pub fn x_len(&self) -> usize {
        self.sub.rows() - 1
    }

    pub fn y_len(&self) -> usize {
        self.sub.cols() - 1
    }

    /// All events with posterior weight above `threshold`, ordered by
    /// `(i, j)` then kind.
    pub fn events(&self, threshold: f64) -> Vec<PosteriorEvent> {
        let mut out = Vec::new();
        for i in 0..self.x_len() {
            for j in 0..=self.y_len() {
                for (kind, grid) in [
                    (EventKind::Sub, &self.sub),
                    (EventKind::Del, &self.del),
                    (EventKind::Ins, &self.ins),
                    (EventKind::End, &self.end),
                ] {
                    let weight = grid.get(i, j);
                    if weight > threshold {
                        out.push(PosteriorEvent { kind, i, j, weight });
                    }
                }
            }
        }
        out
    }

    /// Expected number of edits `E[|Δ| | x, y]`.
    pub fn expected_length(&self) -> f64 {
        [&self.sub, &self.del, &self.ins, &self.end]
            .iter()
            .map(|g| g.values().iter().sum::<f64>())
            .sum()
    }
}

/// Posterior edit probabilities given a forward table.
pub fn backward(fwd: &ForwardTable) -> Result<EditPosteriors, TransductionError> {
    let probes = &fwd.probes;
    let (n, m) = (probes.x_len, probes.y_len);
    let z = fwd.log_likelihood();
    if z == LOG_ZERO || z.is_nan() {
        return Err(TransductionError::ImpossiblePair);
    }
    // beta_*(i, j): log-probability of producing y[j..] from the state
    let mut beta_sub = Grid::filled(n + 1, m + 1, LOG_ZERO);
    let mut beta_ins = Grid::filled(n + 1, m + 1, LOG_ZERO);
    beta_sub.set(n, m, 0.0);
    for i in (0..n).rev() {
        for j in (0..=m).rev() {
            let next_sub = beta_sub.get(i + 1, j);
            let mut s = probes.del(i, j) + next_sub;
            let mut t = probes.end(i, j) + next_sub;
            if j < m {
                let next_ins = beta_ins.get(i, j + 1);
                s = log_add_exp(s, probes.sub(i, j) + next_ins);
                t = log_add_exp(t, probes.ins(i, j) + next_ins);
            }
            beta_sub.set(i, j, s);
            if j > 0 {
                beta_ins.set(i, j, t);
            }
        }
    }

    let post = |v: f64| if v == LOG_ZERO { 0.0 } else { (v - z).exp() };
    let mut out = EditPosteriors {
        log_likelihood: z,
        sub: Grid::filled(n + 1, m + 1, 0.0),
        del: Grid::filled(n + 1, m + 1, 0.0),
        ins: Grid::filled(n + 1, m + 1, 0.0),
        end: Grid::filled(n + 1, m + 1, 0.0),
        g_sub: Grid::filled(n + 1, m + 1, 0.0),
        g_ins: Grid::filled(n + 1, m + 1, 0.0),
    };
    for i in 0..=n {
        for j in 0..=m {
            let fs = fwd.log_sub.get(i, j);
            let fi = fwd.log_ins.get(i, j);
            out.g_sub.set(i, j, post(fs + beta_sub.get(i, j)));
            out.g_ins.set(i, j, post(fi + beta_ins.get(i, j)));
            if i == n {
                continue;
            }
            let next_sub = beta_sub.get(i + 1, j);
            out.del.set(i, j, post(fs + probes.del(i, j) + next_sub));
            out.end.set(i, j, post(fi + probes.end(i, j) + next_sub));
            if j < m {
                let next_ins = beta_ins.get(i, j + 1);
                out.sub.set(i, j, post(fs + probes.sub(i, j) + next_ins));
                out.ins.set(i, j, post(fi + probes.ins(i, j) + next_ins));
            }
        }
    }
    Ok(out)
}

/// Convenience: forward then backward.
pub fn posteriors(
    x: &[SymbolId],
    y: &[SymbolId],
    model: &dyn EditModel,
) -> Result<EditPosteriors, TransductionError> {
    backward(&forward(x, y, model))
}

fn sample_slot<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &lp) in log_probs.iter().enumerate() {
        let p = lp.exp();
        if p > 0.0 {
            last_positive = k;
        }
        acc += p;
        if u < acc {
            return k;
        }
    }
    last_positive
}

/// Draws `(y, Δ)` from the generative edit process.
///
/// At most `insertion_cap` consecutive insertions are made per input
/// position; a longer run is closed with a forced `<end>` and the returned
/// sequence is marked `truncated`.
pub fn sample_edit_process<R: Rng + ?Sized>(
    x: &[SymbolId],
    model: &dyn EditModel,
    insertion_cap: usize,
    rng: &mut R,
) -> (WordForm, EditSequence) {
    let stop = model.num_symbols();
    let mut y: Vec<SymbolId> = Vec::new();
    let mut seq = EditSequence::default();
    for i in 0..x.len() {
        let d = model.distributions(x, &[(i, &y)]).remove(0);
        let slot = sample_slot(&d.log_sub, rng);
        if slot == stop {
            seq.edits.push(Edit::sub(i, y.len(), Outcome::Stop));
            continue;
        }
        seq.edits.push(Edit::sub(i, y.len(), Outcome::Emit(slot as SymbolId)));
        y.push(slot as SymbolId);
        let mut inserted = 0;
        loop {
            if inserted == insertion_cap {
                seq.edits.push(Edit::ins(i, y.len(), Outcome::Stop));
                seq.truncated = true;
                break;
            }
            let d = model.distributions(x, &[(i, &y)]).remove(0);
            let slot = sample_slot(&d.log_ins, rng);
            if slot == stop {
                seq.edits.push(Edit::ins(i, y.len(), Outcome::Stop));
                break;
            }
            seq.edits.push(Edit::ins(i, y.len(), Outcome::Emit(slot as SymbolId)));
            y.push(slot as SymbolId);
            inserted += 1;
        }
    }
    (WordForm(y), seq)
}
