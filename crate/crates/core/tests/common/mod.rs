#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use protoform::alphabet::SymbolId;
use protoform::edit::{Edit, EditOp, EditSequence, Outcome};
use protoform::editmodel::{EditDistribution, EditModel, NeuralEditModel, PairLattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A strictly positive edit model whose distributions are a deterministic
/// pseudo-random function of the full context `(x, i, y′)`.
pub struct RandomModel {
    pub num_symbols: usize,
    pub seed: u64,
}

impl RandomModel {
    pub fn new(num_symbols: usize, seed: u64) -> Self {
        RandomModel { num_symbols, seed }
    }

    fn row(&self, tag: u8, x: &[SymbolId], i: usize, prefix: &[SymbolId]) -> Vec<f64> {
        let mut h = DefaultHasher::new();
        (self.seed, tag, x, i, prefix).hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let w: Vec<f64> = (0..=self.num_symbols).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|v| (v / total).ln()).collect()
    }
}

impl EditModel for RandomModel {
    fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    fn distributions(&self, x: &[SymbolId], contexts: &[(usize, &[SymbolId])]) -> Vec<EditDistribution> {
        contexts
            .iter()
            .map(|&(i, prefix)| EditDistribution {
                log_sub: self.row(0, x, i, prefix),
                log_ins: self.row(1, x, i, prefix),
            })
            .collect()
    }
}

/// One complete run of the edit process with its output and probability.
pub struct Path {
    pub y: Vec<SymbolId>,
    pub edits: EditSequence,
    pub prob: f64,
}

/// Every edit sequence over `x` whose output has at most `max_len`
/// symbols, with probabilities evaluated one edit at a time. With
/// `Some(cap)`, `<end>` is forced with probability one after `cap`
/// consecutive insertions.
pub fn enumerate_paths(x: &[SymbolId], model: &dyn EditModel, max_len: usize, cap: Option<usize>) -> Vec<Path> {
    let mut out = Vec::new();
    let mut y = Vec::new();
    let mut edits = Vec::new();
    walk_sub(x, model, max_len, cap, 0, &mut y, &mut edits, 1.0, &mut out);
    out
}

fn dist(model: &dyn EditModel, x: &[SymbolId], i: usize, y: &[SymbolId]) -> EditDistribution {
    model.distributions(x, &[(i, y)]).remove(0)
}

#[allow(clippy::too_many_arguments)]
fn walk_sub(
    x: &[SymbolId],
    model: &dyn EditModel,
    max_len: usize,
    cap: Option<usize>,
    i: usize,
    y: &mut Vec<SymbolId>,
    edits: &mut Vec<Edit>,
    prob: f64,
    out: &mut Vec<Path>,
) {
    if i == x.len() {
        out.push(Path {
            y: y.clone(),
            edits: EditSequence {
                edits: edits.clone(),
                truncated: false,
            },
            prob,
        });
        return;
    }
    let n = model.num_symbols();
    let d = dist(model, x, i, y);
    edits.push(Edit::sub(i, y.len(), Outcome::Stop));
    walk_sub(x, model, max_len, cap, i + 1, y, edits, prob * d.log_sub[n].exp(), out);
    edits.pop();
    if y.len() < max_len {
        for s in 0..n {
            edits.push(Edit::sub(i, y.len(), Outcome::Emit(s as SymbolId)));
            y.push(s as SymbolId);
            walk_ins(x, model, max_len, cap, i, 0, y, edits, prob * d.log_sub[s].exp(), out);
            y.pop();
            edits.pop();
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn walk_ins(
    x: &[SymbolId],
    model: &dyn EditModel,
    max_len: usize,
    cap: Option<usize>,
    i: usize,
    run: usize,
    y: &mut Vec<SymbolId>,
    edits: &mut Vec<Edit>,
    prob: f64,
    out: &mut Vec<Path>,
) {
    let n = model.num_symbols();
    let d = dist(model, x, i, y);
    let forced = cap == Some(run);
    let p_end = if forced { 1.0 } else { d.log_ins[n].exp() };
    edits.push(Edit::ins(i, y.len(), Outcome::Stop));
    walk_sub(x, model, max_len, cap, i + 1, y, edits, prob * p_end, out);
    edits.pop();
    if y.len() < max_len && !forced {
        for s in 0..n {
            edits.push(Edit::ins(i, y.len(), Outcome::Emit(s as SymbolId)));
            y.push(s as SymbolId);
            walk_ins(x, model, max_len, cap, i, run + 1, y, edits, prob * d.log_ins[s].exp(), out);
            y.pop();
            edits.pop();
        }
    }
}

/// All words over `num_symbols` symbols of length at most `max_len`.
pub fn all_words(num_symbols: usize, max_len: usize) -> Vec<Vec<SymbolId>> {
    let mut words = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for s in 0..num_symbols {
                let mut v: Vec<SymbolId> = w.clone();
                v.push(s as SymbolId);
                next.push(v);
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    words
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tolerance {tol})");
}

/// Context-free model with explicit substitution and insertion rows,
/// indexed `[from][outcome]` for substitutions.
pub struct TableModel {
    pub sub: Vec<Vec<f64>>,
    pub ins: Vec<f64>,
}

impl EditModel for TableModel {
    fn num_symbols(&self) -> usize {
        self.ins.len() - 1
    }

    fn distributions(&self, x: &[SymbolId], contexts: &[(usize, &[SymbolId])]) -> Vec<EditDistribution> {
        contexts
            .iter()
            .map(|&(i, _)| EditDistribution {
                log_sub: self.sub[x[i] as usize].iter().map(|p| p.ln()).collect(),
                log_ins: self.ins.iter().map(|p| p.ln()).collect(),
            })
            .collect()
    }
}

/// The states reachable from `start` under candidate moves and the limiting
/// distribution of the move chain started there, by power iteration on the
/// explicit transition matrix.
pub fn restricted_stationary(
    cognates: &[protoform::alphabet::WordForm],
    models: &[&dyn EditModel],
    prior: &protoform::prior::BigramPrior,
    start: &protoform::alphabet::WordForm,
) -> (Vec<protoform::alphabet::WordForm>, Vec<f64>) {
    use protoform::em::{log_joint, propose_candidates};
    let mut states = vec![start.clone()];
    let mut k = 0;
    while k < states.len() {
        for c in propose_candidates(&states[k], cognates) {
            if !states.contains(&c) {
                states.push(c);
            }
        }
        k += 1;
    }
    let joint: Vec<f64> = states.iter().map(|s| log_joint(s, cognates, models, prior).exp()).collect();
    let n = states.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for (a, s) in states.iter().enumerate() {
        let cands: Vec<usize> = propose_candidates(s, cognates)
            .iter()
            .map(|c| states.iter().position(|t| t == c).unwrap())
            .collect();
        let total: f64 = cands.iter().map(|&b| joint[b]).sum();
        for b in cands {
            matrix[a][b] = joint[b] / total;
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                next[b] += pi[a] * matrix[a][b];
            }
        }
        let change: f64 = next.iter().zip(&pi).map(|(u, v)| (u - v).abs()).sum();
        pi = next;
        if change < 1e-15 {
            break;
        }
    }
    (states, pi)
}

/// Total-variation distance between visit frequencies of a `rounds`-step
/// move chain from `start` and `target` over `states`.
pub fn chain_distance(
    cognates: &[protoform::alphabet::WordForm],
    models: &[&dyn EditModel],
    prior: &protoform::prior::BigramPrior,
    states: &[protoform::alphabet::WordForm],
    target: &[f64],
    rounds: usize,
    seed: u64,
) -> f64 {
    use protoform::em::{mh_step, SetScorer};
    let mut scorer = SetScorer::new(cognates, models, prior);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; states.len()];
    let mut x = states[0].clone();
    for _ in 0..rounds {
        x = mh_step(&mut scorer, &x, &mut rng);
        counts[states.iter().position(|s| *s == x).expect("chain stays in the closure")] += 1;
    }
    0.5 * counts
        .iter()
        .zip(target)
        .map(|(&c, &p)| (c as f64 / rounds as f64 - p).abs())
        .sum::<f64>()
}

/// Posterior-weighted edit indicators from enumeration, keyed by
/// `(op, is_stop, i, j)`, plus the expected sequence length.
pub fn enumerated_posteriors(
    x: &[SymbolId],
    y: &[SymbolId],
    model: &dyn EditModel,
) -> (f64, HashMap<(EditOp, bool, usize, usize), f64>, f64) {
    let paths: Vec<_> = enumerate_paths(x, model, y.len(), None)
        .into_iter()
        .filter(|p| p.y == y)
        .collect();
    let z: f64 = paths.iter().map(|p| p.prob).sum();
    let mut events = HashMap::new();
    let mut length = 0.0;
    for p in &paths {
        let w = p.prob / z;
        length += w * p.edits.len() as f64;
        for e in &p.edits.edits {
            let key = (e.op, e.outcome == Outcome::Stop, e.input_index, e.prefix_len);
            *events.entry(key).or_insert(0.0) += w;
        }
    }
    (z, events, length)
}

/// Pairs with `p(y | x) > 0` under a strictly positive model: an empty input
/// can only produce the empty output.
pub fn pairs(num_symbols: usize, max_len: usize) -> Vec<(Vec<SymbolId>, Vec<SymbolId>)> {
    let words = all_words(num_symbols, max_len);
    let mut out = Vec::new();
    for x in &words {
        for y in words.iter().filter(|y| !x.is_empty() || y.is_empty()) {
            out.push((x.clone(), y.clone()));
        }
    }
    out
}

/// Per-tensor relative error `‖a − n‖ / max(‖a‖, ‖n‖)` between the analytic
/// gradient and central differences.
pub fn gradient_errors(model: &NeuralEditModel, data: &[PairLattice]) -> Vec<(&'static str, f64)> {
    let (_, grad) = model.loss_and_gradient(data);
    let eps = 1e-5;
    grad.tensors()
        .into_iter()
        .enumerate()
        .map(|(t, (name, g))| {
            let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
            for k in 0..g.data.len() {
                let mut plus = model.clone();
                plus.params_mut().tensors_mut()[t].1.data[k] += eps;
                let mut minus = model.clone();
                minus.params_mut().tensors_mut()[t].1.data[k] -= eps;
                let numeric = (plus.loss(data) - minus.loss(data)) / (2.0 * eps);
                diff += (numeric - g.data[k]).powi(2);
                norm_a += g.data[k].powi(2);
                norm_n += numeric * numeric;
            }
            let scale = norm_a.sqrt().max(norm_n.sqrt()).max(1e-12);
            (name, diff.sqrt() / scale)
        })
        .collect()
}

