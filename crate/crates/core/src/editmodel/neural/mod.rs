//! Recurrent edit model.
//!
//! A bidirectional LSTM encodes the input word (`h(x)[i]` is the sum of
//! the forward and backward states at position `i`) and a unidirectional
//! LSTM encodes `<bos> + y′` (`g(y′)[−1]` is its last state). The context
//! vector `h(x)[i] + g(y′)[−1]` feeds two affine softmax heads, one over
//! `Σ ∪ {<del>}` and one over `Σ ∪ {<end>}`.
//!
//! A finite context radius `k` restricts the input encoder to the
//! `2k + 1`-token window around `i` and the prefix encoder to the last
//! `k + 1` tokens of `<bos> + y′`.

mod lstm;
mod tensor;

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::SymbolId;
use crate::logspace::log_softmax_in_place;
use crate::transduction::EditProbes;

use super::context::prefix_tokens;
use super::{ContextRadius, EditContext, EditDistribution, EditModel, Head, PairLattice, TargetProbes};

pub use lstm::LstmParams;
pub use tensor::Tensor;

use lstm::LstmStep;
use tensor::axpy;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralConfig {
    pub num_symbols: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub radius: ContextRadius,
    /// Weights start uniform in `[-init_scale, init_scale]`; biases at zero.
    pub init_scale: f64,
}

impl NeuralConfig {
    pub fn new(num_symbols: usize, radius: ContextRadius) -> Self {
        NeuralConfig {
            num_symbols,
            embedding_dim: 50,
            hidden_dim: 50,
            radius,
            init_scale: 0.08,
        }
    }
}

/// Every trainable tensor of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralParams {
    /// `(|Σ|+1) × d`; the last row embeds the word-boundary padding token.
    pub input_embedding: Tensor,
    pub input_forward: LstmParams,
    pub input_backward: LstmParams,
    /// `(|Σ|+1) × d`; the last row embeds `<bos>`.
    pub prefix_embedding: Tensor,
    pub prefix_lstm: LstmParams,
    pub sub_weight: Tensor,
    pub sub_bias: Tensor,
    pub ins_weight: Tensor,
    pub ins_bias: Tensor,
}

impl NeuralParams {
    fn init(cfg: &NeuralConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, d, h, s) = (cfg.num_symbols + 1, cfg.embedding_dim, cfg.hidden_dim, cfg.init_scale);
        NeuralParams {
            input_embedding: Tensor::uniform(v, d, s, &mut rng),
            input_forward: LstmParams::new(d, h, s, &mut rng),
            input_backward: LstmParams::new(d, h, s, &mut rng),
            prefix_embedding: Tensor::uniform(v, d, s, &mut rng),
            prefix_lstm: LstmParams::new(d, h, s, &mut rng),
            sub_weight: Tensor::uniform(v, h, s, &mut rng),
            sub_bias: Tensor::zeros(v, 1),
            ins_weight: Tensor::uniform(v, h, s, &mut rng),
            ins_bias: Tensor::zeros(v, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        NeuralParams {
            input_embedding: self.input_embedding.zeros_like(),
            input_forward: self.input_forward.zeros_like(),
            input_backward: self.input_backward.zeros_like(),
            prefix_embedding: self.prefix_embedding.zeros_like(),
            prefix_lstm: self.prefix_lstm.zeros_like(),
            sub_weight: self.sub_weight.zeros_like(),
            sub_bias: self.sub_bias.zeros_like(),
            ins_weight: self.ins_weight.zeros_like(),
            ins_bias: self.ins_bias.zeros_like(),
        }
    }

    /// All tensors in a fixed order, paired with their names.
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("input_embedding", &self.input_embedding),
            ("input_forward.weight", &self.input_forward.weight),
            ("input_forward.bias", &self.input_forward.bias),
            ("input_backward.weight", &self.input_backward.weight),
            ("input_backward.bias", &self.input_backward.bias),
            ("prefix_embedding", &self.prefix_embedding),
            ("prefix_lstm.weight", &self.prefix_lstm.weight),
            ("prefix_lstm.bias", &self.prefix_lstm.bias),
            ("sub_weight", &self.sub_weight),
            ("sub_bias", &self.sub_bias),
            ("ins_weight", &self.ins_weight),
            ("ins_bias", &self.ins_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("input_embedding", &mut self.input_embedding),
            ("input_forward.weight", &mut self.input_forward.weight),
            ("input_forward.bias", &mut self.input_forward.bias),
            ("input_backward.weight", &mut self.input_backward.weight),
            ("input_backward.bias", &mut self.input_backward.bias),
            ("prefix_embedding", &mut self.prefix_embedding),
            ("prefix_lstm.weight", &mut self.prefix_lstm.weight),
            ("prefix_lstm.bias", &mut self.prefix_lstm.bias),
            ("sub_weight", &mut self.sub_weight),
            ("sub_bias", &mut self.sub_bias),
            ("ins_weight", &mut self.ins_weight),
            ("ins_bias", &mut self.ins_bias),
        ]
    }

    pub fn add_assign(&mut self, other: &NeuralParams) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralEditModel {
    config: NeuralConfig,
    params: NeuralParams,
}

/// Token sequences to encode and, per requested position, which run and
/// which step of that run to read.
struct Plan {
    runs: Vec<Vec<SymbolId>>,
    reads: Vec<(usize, usize)>,
}

struct BiTrace {
    forward: Vec<LstmStep>,
    backward: Vec<LstmStep>,
}

/// One head evaluation inside a lattice, with its target outcome weights.
struct Cell {
    i: usize,
    j: usize,
    head: Head,
    targets: Vec<(usize, f64)>,
}

impl NeuralEditModel {
    pub fn new(config: NeuralConfig, seed: u64) -> Self {
        NeuralEditModel {
            params: NeuralParams::init(&config, seed),
            config,
        }
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn params(&self) -> &NeuralParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NeuralParams {
        &mut self.params
    }

    pub fn radius(&self) -> ContextRadius {
        self.config.radius
    }

    fn pad(&self) -> SymbolId {
        self.config.num_symbols as SymbolId
    }

    fn input_plan(&self, x: &[SymbolId]) -> Plan {
        match self.config.radius {
            ContextRadius::Unbounded => Plan {
                runs: vec![x.to_vec()],
                reads: (0..x.len()).map(|i| (0, i)).collect(),
            },
            ContextRadius::Finite(k) => Plan {
                runs: (0..x.len())
                    .map(|i| EditContext::new(x, i, &[]).input_window(self.config.radius, self.pad()))
                    .collect(),
                reads: (0..x.len()).map(|i| (i, k)).collect(),
            },
        }
    }

    /// Plan for the lattice prefixes `y[..j]`, `j = 0..=|y|`.
    fn prefix_plan(&self, y: &[SymbolId]) -> Plan {
        match self.config.radius {
            ContextRadius::Unbounded => Plan {
                runs: vec![prefix_tokens(y, ContextRadius::Unbounded, self.pad())],
                reads: (0..=y.len()).map(|j| (0, j)).collect(),
            },
            ContextRadius::Finite(_) => {
                let runs: Vec<Vec<SymbolId>> = (0..=y.len())
                    .map(|j| prefix_tokens(&y[..j], self.config.radius, self.pad()))
                    .collect();
                let reads = runs.iter().enumerate().map(|(j, r)| (j, r.len() - 1)).collect();
                Plan { runs, reads }
            }
        }
    }

    fn run_input(&self, tokens: &[SymbolId]) -> BiTrace {
        let p = &self.params;
        let forward = p
            .input_forward
            .forward(tokens.iter().map(|&t| p.input_embedding.row(t as usize)));
        let mut backward = p
            .input_backward
            .forward(tokens.iter().rev().map(|&t| p.input_embedding.row(t as usize)));
        backward.reverse();
        BiTrace { forward, backward }
    }

    fn run_prefix(&self, tokens: &[SymbolId]) -> Vec<LstmStep> {
        let p = &self.params;
        p.prefix_lstm
            .forward(tokens.iter().map(|&t| p.prefix_embedding.row(t as usize)))
    }

    /// `h(x)[i]` for every position.
    fn encode_input(&self, x: &[SymbolId]) -> Vec<Vec<f64>> {
        let plan = self.input_plan(x);
        let traces: Vec<BiTrace> = plan.runs.iter().map(|r| self.run_input(r)).collect();
        plan.reads
            .iter()
            .map(|&(r, pos)| {
                let mut h = traces[r].forward[pos].h.clone();
                axpy(1.0, &traces[r].backward[pos].h, &mut h);
                h
            })
            .collect()
    }

    /// `g(y[..j])[−1]` for `j = 0..=|y|`.
    fn encode_lattice_prefixes(&self, y: &[SymbolId]) -> Vec<Vec<f64>> {
        let plan = self.prefix_plan(y);
        let traces: Vec<Vec<LstmStep>> = plan.runs.iter().map(|r| self.run_prefix(r)).collect();
        plan.reads
            .iter()
            .map(|&(r, pos)| traces[r][pos].h.clone())
            .collect()
    }

    fn encode_prefix(&self, prefix: &[SymbolId]) -> Vec<f64> {
        let tokens = prefix_tokens(prefix, self.config.radius, self.pad());
        self.run_prefix(&tokens).pop().expect("prefix run is never empty").h
    }

    /// Bias-free head projections `(W_sub·v, W_ins·v)`.
    fn project(&self, v: &[f64]) -> Projection {
        let n = self.config.num_symbols + 1;
        let mut sub = vec![0.0; n];
        let mut ins = vec![0.0; n];
        self.params.sub_weight.matvec_add(v, &mut sub);
        self.params.ins_weight.matvec_add(v, &mut ins);
        (sub, ins)
    }

    fn combine(&self, a: &Projection, b: &Projection) -> EditDistribution {
        let mut log_sub: Vec<f64> = a
            .0
            .iter()
            .zip(&b.0)
            .zip(&self.params.sub_bias.data)
            .map(|((u, v), w)| u + v + w)
            .collect();
        let mut log_ins: Vec<f64> = a
            .1
            .iter()
            .zip(&b.1)
            .zip(&self.params.ins_bias.data)
            .map(|((u, v), w)| u + v + w)
            .collect();
        log_softmax_in_place(&mut log_sub);
        log_softmax_in_place(&mut log_ins);
        EditDistribution { log_sub, log_ins }
    }

    fn probes_from(&self, input_proj: &[Projection], prefix_proj: &[Projection], y: &[SymbolId]) -> EditProbes {
        let mut probes = EditProbes::empty(input_proj.len(), y.len());
        for (i, a) in input_proj.iter().enumerate() {
            for (j, b) in prefix_proj.iter().enumerate() {
                let d = self.combine(a, b);
                probes.set(i, j, &d, y.get(j).copied());
            }
        }
        probes
    }

    fn lattice_cells(&self, lattice: &PairLattice) -> Vec<Cell> {
        let n = self.config.num_symbols;
        let mut grouped: BTreeMap<(usize, usize, Head), Vec<(usize, f64)>> = BTreeMap::new();
        for e in &lattice.events {
            let head = if e.is_substitution_head() { Head::Sub } else { Head::Ins };
            grouped
                .entry((e.i, e.j, head))
                .or_default()
                .push((e.outcome_slot(&lattice.y, n), e.weight));
        }
        grouped
            .into_iter()
            .map(|((i, j, head), targets)| Cell { i, j, head, targets })
            .collect()
    }

    /// Weighted cross-entropy `−Σ δ′ · log q(ω | context)` of one lattice.
    /// When `grad` is given, adds `scale ×` the loss gradient to it.
    pub fn lattice_loss(&self, lattice: &PairLattice, scale: f64, grad: Option<&mut NeuralParams>) -> f64 {
        let cells = self.lattice_cells(lattice);
        if cells.is_empty() {
            return 0.0;
        }
        let p = &self.params;
        let hd = self.config.hidden_dim;
        let x = &lattice.x;
        let y = &lattice.y;

        let in_plan = self.input_plan(x);
        let in_traces: Vec<BiTrace> = in_plan.runs.iter().map(|r| self.run_input(r)).collect();
        let h: Vec<Vec<f64>> = in_plan
            .reads
            .iter()
            .map(|&(r, pos)| {
                let mut v = in_traces[r].forward[pos].h.clone();
                axpy(1.0, &in_traces[r].backward[pos].h, &mut v);
                v
            })
            .collect();
        let pre_plan = self.prefix_plan(y);
        let pre_traces: Vec<Vec<LstmStep>> = pre_plan.runs.iter().map(|r| self.run_prefix(r)).collect();
        let g: Vec<&[f64]> = pre_plan
            .reads
            .iter()
            .map(|&(r, pos)| pre_traces[r][pos].h.as_slice())
            .collect();

        let mut loss = 0.0;
        let mut dh = vec![vec![0.0; hd]; x.len()];
        let mut dg = vec![vec![0.0; hd]; y.len() + 1];
        let want_grad = grad.is_some();
        let mut head_grads: Vec<(Head, Vec<f64>, Vec<f64>)> = Vec::new();
        for cell in &cells {
            let mut z = h[cell.i].clone();
            axpy(1.0, g[cell.j], &mut z);
            let (weight, bias) = match cell.head {
                Head::Sub => (&p.sub_weight, &p.sub_bias),
                Head::Ins => (&p.ins_weight, &p.ins_bias),
            };
            let mut logp = bias.data.clone();
            weight.matvec_add(&z, &mut logp);
            log_softmax_in_place(&mut logp);
            let mut total = 0.0;
            for &(slot, w) in &cell.targets {
                loss -= w * logp[slot];
                total += w;
            }
            if want_grad {
                // d loss / d logits = total·softmax − targets
                let mut dlogits: Vec<f64> = logp.iter().map(|&l| scale * total * l.exp()).collect();
                for &(slot, w) in &cell.targets {
                    dlogits[slot] -= scale * w;
                }
                let mut dz = vec![0.0; hd];
                weight.matvec_t_add(&dlogits, &mut dz);
                axpy(1.0, &dz, &mut dh[cell.i]);
                axpy(1.0, &dz, &mut dg[cell.j]);
                head_grads.push((cell.head, dlogits, z));
            }
        }

        let Some(grad) = grad else {
            return loss;
        };
        for (head, dlogits, z) in &head_grads {
            let (gw, gb) = match head {
                Head::Sub => (&mut grad.sub_weight, &mut grad.sub_bias),
                Head::Ins => (&mut grad.ins_weight, &mut grad.ins_bias),
            };
            gw.outer_add(dlogits, z);
            axpy(1.0, dlogits, &mut gb.data);
        }

        // input encoder
        let mut run_dh: Vec<Vec<Vec<f64>>> = in_plan
            .runs
            .iter()
            .map(|r| vec![vec![0.0; hd]; r.len()])
            .collect();
        for (i, &(r, pos)) in in_plan.reads.iter().enumerate() {
            axpy(1.0, &dh[i], &mut run_dh[r][pos]);
        }
        for ((tokens, trace), dseq) in in_plan.runs.iter().zip(&in_traces).zip(&run_dh) {
            if dseq.iter().all(|v| v.iter().all(|&d| d == 0.0)) {
                continue;
            }
            let dx_fwd = p.input_forward.backward(&trace.forward, dseq, &mut grad.input_forward);
            // the backward LSTM consumed the tokens in reverse
            let mut bwd_steps: Vec<LstmStep> = trace.backward.clone();
            bwd_steps.reverse();
            let dseq_rev: Vec<Vec<f64>> = dseq.iter().rev().cloned().collect();
            let mut dx_bwd = p.input_backward.backward(&bwd_steps, &dseq_rev, &mut grad.input_backward);
            dx_bwd.reverse();
            for (t, &tok) in tokens.iter().enumerate() {
                let row = grad.input_embedding.row_mut(tok as usize);
                axpy(1.0, &dx_fwd[t], row);
                axpy(1.0, &dx_bwd[t], row);
            }
        }

        // prefix encoder
        let mut run_dg: Vec<Vec<Vec<f64>>> = pre_plan
            .runs
            .iter()
            .map(|r| vec![vec![0.0; hd]; r.len()])
            .collect();
        for (j, &(r, pos)) in pre_plan.reads.iter().enumerate() {
            axpy(1.0, &dg[j], &mut run_dg[r][pos]);
        }
        for ((tokens, trace), dseq) in pre_plan.runs.iter().zip(&pre_traces).zip(&run_dg) {
            if dseq.iter().all(|v| v.iter().all(|&d| d == 0.0)) {
                continue;
            }
            let dx = p.prefix_lstm.backward(trace, dseq, &mut grad.prefix_lstm);
            for (t, &tok) in tokens.iter().enumerate() {
                axpy(1.0, &dx[t], grad.prefix_embedding.row_mut(tok as usize));
            }
        }
        loss
    }

    /// Mean lattice loss over `data` and its gradient.
    pub fn loss_and_gradient(&self, data: &[PairLattice]) -> (f64, NeuralParams) {
        let mut grad = self.params.zeros_like();
        if data.is_empty() {
            return (0.0, grad);
        }
        let scale = 1.0 / data.len() as f64;
        let mut loss = 0.0;
        for lattice in data {
            loss += self.lattice_loss(lattice, scale, Some(&mut grad));
        }
        (loss * scale, grad)
    }

    /// Mean lattice loss over `data`.
    pub fn loss(&self, data: &[PairLattice]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter().map(|l| self.lattice_loss(l, 1.0, None)).sum::<f64>() / data.len() as f64
    }
}

impl EditModel for NeuralEditModel {
    fn num_symbols(&self) -> usize {
        self.config.num_symbols
    }

    fn distributions(&self, x: &[SymbolId], contexts: &[(usize, &[SymbolId])]) -> Vec<EditDistribution> {
        for &(i, prefix) in contexts {
            assert!(i < x.len(), "input index {i} out of range");
            assert!(
                prefix.iter().all(|&s| (s as usize) < self.config.num_symbols),
                "prefix holds a non-phoneme id"
            );
        }
        if contexts.is_empty() {
            return Vec::new();
        }
        let input: Vec<Projection> = self.encode_input(x).iter().map(|h| self.project(h)).collect();
        let mut prefix_cache: HashMap<&[SymbolId], Projection> = HashMap::new();
        contexts
            .iter()
            .map(|&(i, prefix)| {
                let b = prefix_cache
                    .entry(prefix)
                    .or_insert_with(|| self.project(&self.encode_prefix(prefix)));
                self.combine(&input[i], b)
            })
            .collect()
    }

    fn probes(&self, x: &[SymbolId], y: &[SymbolId]) -> EditProbes {
        self.probes_for_target(&[x], y).pop().expect("one input")
    }

    fn probes_for_target(&self, xs: &[&[SymbolId]], y: &[SymbolId]) -> Vec<EditProbes> {
        let target = NeuralTarget::new(self, y);
        xs.iter().map(|x| target.probes(x)).collect()
    }

    fn for_target<'a>(&'a self, y: &[SymbolId]) -> Box<dyn TargetProbes + 'a> {
        Box::new(NeuralTarget::new(self, y))
    }
}

type Projection = (Vec<f64>, Vec<f64>);

/// Output-side projections of every lattice prefix of one target word.
struct NeuralTarget<'a> {
    model: &'a NeuralEditModel,
    y: Vec<SymbolId>,
    prefix: Vec<Projection>,
}

impl<'a> NeuralTarget<'a> {
    fn new(model: &'a NeuralEditModel, y: &[SymbolId]) -> Self {
        let prefix = model
            .encode_lattice_prefixes(y)
            .iter()
            .map(|g| model.project(g))
            .collect();
        NeuralTarget {
            model,
            y: y.to_vec(),
            prefix,
        }
    }
}

impl TargetProbes for NeuralTarget<'_> {
    fn probes(&self, x: &[SymbolId]) -> EditProbes {
        let input: Vec<Projection> = self
            .model
            .encode_input(x)
            .iter()
            .map(|h| self.model.project(h))
            .collect();
        self.model.probes_from(&input, &self.prefix, &self.y)
    }
}
