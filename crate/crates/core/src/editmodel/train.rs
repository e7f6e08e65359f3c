use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::neural::NeuralParams;
use super::{ModelError, NeuralEditModel, PairLattice};

/// Pairs per parallel work unit. Fixed so reductions are reproducible
/// regardless of the thread count.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Approximate number of edit events per minibatch; batches are cut at
    /// pair boundaries.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            learning_rate: 0.01,
            batch_size: 256,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-pair loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    m: NeuralParams,
    v: NeuralParams,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &NeuralParams, lr: f64) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut NeuralParams, grad: &NeuralParams) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = Self::BETA1 * m.data[k] + (1.0 - Self::BETA1) * gk;
                v.data[k] = Self::BETA2 * v.data[k] + (1.0 - Self::BETA2) * gk * gk;
                let mh = m.data[k] / c1;
                let vh = v.data[k] / c2;
                p.data[k] -= self.lr * mh / (vh.sqrt() + Self::EPS);
            }
        }
    }
}

/// Splits `order` into consecutive batches holding at least `target`
/// events each (the last one may hold fewer).
fn batches(data: &[PairLattice], order: &[usize], target: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut events = 0;
    for &idx in order {
        current.push(idx);
        events += data[idx].events.len();
        if events >= target {
            out.push(std::mem::take(&mut current));
            events = 0;
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn batch_gradient(model: &NeuralEditModel, data: &[PairLattice], batch: &[usize]) -> (f64, NeuralParams) {
    let scale = 1.0 / batch.len() as f64;
    let partials: Vec<(f64, NeuralParams)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = model.params().zeros_like();
            let mut loss = 0.0;
            for &idx in chunk {
                loss += model.lattice_loss(&data[idx], scale, Some(&mut grad));
            }
            (loss, grad)
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut loss, mut grad) = iter.next().expect("batches are non-empty");
    for (l, g) in iter {
        loss += l;
        grad.add_assign(&g);
    }
    (loss * scale, grad)
}

/// Fits the network to posterior-weighted edits with Adam. Optimizer state
/// starts fresh on every call; the pair order is reshuffled each epoch.
pub fn train_neural(
    model: &mut NeuralEditModel,
    data: &[PairLattice],
    cfg: &TrainConfig,
) -> Result<TrainReport, ModelError> {
    if cfg.epochs == 0 {
        return Err(ModelError::Config("epochs must be at least 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::Config("batch size must be at least 1".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(ModelError::Config(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    let mut report = TrainReport::default();
    let usable: Vec<usize> = (0..data.len()).filter(|&i| !data[i].events.is_empty()).collect();
    if usable.is_empty() {
        report.epoch_losses = vec![0.0; cfg.epochs];
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.params(), cfg.learning_rate);
    for epoch in 0..cfg.epochs {
        let mut order = usable.clone();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in batches(data, &order, cfg.batch_size).iter().enumerate() {
            let (loss, grad) = batch_gradient(model, data, batch);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, batch: b, loss });
            }
            total += loss * batch.len() as f64;
            adam.step(model.params_mut(), &grad);
        }
        let mean = total / usable.len() as f64;
        log::debug!("epoch {epoch}: mean pair loss {mean:.4}");
        report.epoch_losses.push(mean);
    }
    Ok(report)
}
