//! Monte-Carlo EM over ancestral word forms.
//!
//! The E-step resamples one ancestor per cognate set from a restricted
//! posterior over min-edit-path candidates; the M-step refits each branch's
//! edit model to the edit posteriors of `(ancestor, cognate)` pairs. Neural
//! runs are bootstrapped from a few classical (multinomial) iterations.
//!
//! Every random draw comes from a stream keyed by `(seed, phase, iteration,
//! unit)`, so a run is a pure function of its inputs regardless of thread
//! scheduling.

mod sampler;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::WordForm;
use crate::data::CognateDataset;
use crate::distance::levenshtein;
use crate::editmodel::{
    fit_multinomial, train_neural, ContextRadius, EditModel, ExpectedCounts, ModelError, MultinomialEditModel,
    NeuralConfig, NeuralEditModel, PairLattice, TrainConfig, UntrainedModel, UntrainedParams,
};
use crate::prior::BigramPrior;
use crate::transduction::posteriors;

pub use sampler::{decode_one, log_joint, mh_step, propose_candidates, sample_proportional, SetScorer};

#[derive(Debug, Error)]
pub enum EmError {
    #[error("invalid EM configuration: {0}")]
    Config(String),
    #[error("M-step of {phase} iteration {iteration}, branch {branch}: {source}")]
    Train {
        phase: Phase,
        iteration: usize,
        branch: usize,
        #[source]
        source: ModelError,
    },
    #[error("inconsistent input: {0}")]
    Data(String),
    #[error("checkpoint observer failed: {0}")]
    Observer(#[from] std::io::Error),
}

/// Which edit models a run uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Neural,
    Classical,
    Untrained,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Neural => "neural",
            Mode::Classical => "classical",
            Mode::Untrained => "untrained",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neural" => Ok(Mode::Neural),
            "classical" => Ok(Mode::Classical),
            "untrained" => Ok(Mode::Untrained),
            other => Err(format!("unknown mode `{other}` (expected neural, classical or untrained)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Bootstrap,
    Em,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Bootstrap => "bootstrap",
            Phase::Em => "em",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub mode: Mode,
    pub em_iterations: usize,
    pub mh_rounds: usize,
    pub bootstrap_iterations: usize,
    pub decode_rounds: usize,
    /// Context radius `k` of the neural models.
    pub radius: ContextRadius,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    /// Per-M-step training of the neural models; `epochs` is `n`.
    pub train: TrainConfig,
    /// Window radius of the classical multinomial models.
    pub classical_radius: usize,
    pub classical_alpha: f64,
    pub untrained: UntrainedParams,
    /// Also decode after every EM iteration and log the distance to gold.
    pub decode_each_iteration: bool,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            mode: Mode::Neural,
            em_iterations: 10,
            mh_rounds: 20,
            bootstrap_iterations: 3,
            decode_rounds: 50,
            radius: ContextRadius::Unbounded,
            embedding_dim: 50,
            hidden_dim: 50,
            train: TrainConfig::default(),
            classical_radius: 1,
            classical_alpha: 0.1,
            untrained: UntrainedParams::default(),
            decode_each_iteration: false,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), EmError> {
        let positive = [
            ("em_iterations", self.em_iterations),
            ("mh_rounds", self.mh_rounds),
            ("decode_rounds", self.decode_rounds),
            ("epochs", self.train.epochs),
            ("batch_size", self.train.batch_size),
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(EmError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(EmError::Config("learning rate must be positive".into()));
        }
        if !(self.classical_alpha >= 0.0 && self.classical_alpha.is_finite()) {
            return Err(EmError::Config("classical smoothing must be non-negative".into()));
        }
        let p = &self.untrained;
        if (p.p_self + p.p_sub_other + p.p_del - 1.0).abs() > 1e-9 || !(0.0..=1.0).contains(&p.p_end) {
            return Err(EmError::Config("untrained probabilities must form distributions".into()));
        }
        Ok(())
    }
}

/// The edit model of one branch.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum BranchModel {
    Untrained(UntrainedModel),
    Classical(MultinomialEditModel),
    Neural(NeuralEditModel),
}

impl BranchModel {
    pub fn as_edit_model(&self) -> &dyn EditModel {
        match self {
            BranchModel::Untrained(m) => m,
            BranchModel::Classical(m) => m,
            BranchModel::Neural(m) => m,
        }
    }
}

fn as_models(models: &[BranchModel]) -> Vec<&dyn EditModel> {
    models.iter().map(BranchModel::as_edit_model).collect()
}

/// Observed forms, optional gold ancestors and the alphabet size.
#[derive(Clone, Debug, PartialEq)]
pub struct EmData {
    pub cognates: Vec<Vec<WordForm>>,
    pub gold: Option<Vec<WordForm>>,
    pub num_symbols: usize,
}

impl EmData {
    pub fn new(cognates: Vec<Vec<WordForm>>, gold: Option<Vec<WordForm>>, num_symbols: usize) -> Result<Self, EmError> {
        let branches = cognates.first().map_or(0, Vec::len);
        if cognates.is_empty() || branches == 0 {
            return Err(EmError::Data("need at least one cognate set with one form".into()));
        }
        if cognates.iter().any(|c| c.len() != branches) {
            return Err(EmError::Data("every cognate set must have one form per branch".into()));
        }
        if gold.as_ref().is_some_and(|g| g.len() != cognates.len()) {
            return Err(EmError::Data("one gold form per cognate set".into()));
        }
        let in_range = |w: &WordForm| w.iter().all(|&s| (s as usize) < num_symbols);
        if !cognates.iter().flatten().chain(gold.iter().flatten()).all(in_range) {
            return Err(EmError::Data("form outside the alphabet".into()));
        }
        Ok(EmData {
            cognates,
            gold,
            num_symbols,
        })
    }

    pub fn from_dataset(ds: &CognateDataset) -> Result<Self, EmError> {
        let gold = ds.has_gold().then(|| ds.gold_forms());
        Self::new(
            ds.sets.iter().map(|s| s.forms.clone()).collect(),
            gold,
            ds.alphabet.len(),
        )
    }

    pub fn num_branches(&self) -> usize {
        self.cognates[0].len()
    }

    pub fn mean_distance_to_gold(&self, words: &[WordForm]) -> Option<f64> {
        let gold = self.gold.as_ref()?;
        let total: usize = words.iter().zip(gold).map(|(w, g)| levenshtein(w, g)).sum();
        Some(total as f64 / gold.len() as f64)
    }
}

/// Samples and models after some iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionState {
    pub phase: Phase,
    pub iteration: usize,
    pub samples: Vec<WordForm>,
    pub models: Vec<BranchModel>,
    pub prior: BigramPrior,
}

/// Metrics of one finished iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub phase: Phase,
    pub iteration: usize,
    /// Mean log-joint of the samples after the E-step.
    pub mean_log_joint: f64,
    pub sample_distance: Option<f64>,
    pub decode_distance: Option<f64>,
    /// Pairs with zero likelihood skipped by the M-step.
    pub skipped_pairs: usize,
    /// Last-epoch training loss per branch (neural M-steps only).
    pub train_loss: Vec<f64>,
}

/// Receives every finished iteration, e.g. to write checkpoints.
pub type Observer<'a> = dyn FnMut(&IterationRecord, &ReconstructionState) -> std::io::Result<()> + 'a;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub state: ReconstructionState,
    pub history: Vec<IterationRecord>,
    pub reconstructions: Vec<WordForm>,
}

/// Stream seed for one unit of work; FNV-1a over the key.
pub fn derive_seed(seed: u64, tag: &str, iteration: usize, unit: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = seed
        .to_le_bytes()
        .into_iter()
        .chain(tag.bytes())
        .chain((iteration as u64).to_le_bytes())
        .chain((unit as u64).to_le_bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The form of each set with the least total edit distance to the others
/// (first language wins ties).
pub fn medoid_init(cognates: &[Vec<WordForm>]) -> Vec<WordForm> {
    cognates
        .iter()
        .map(|forms| {
            forms
                .iter()
                .map(|a| (forms.iter().map(|b| levenshtein(a, b)).sum::<usize>(), a))
                .min_by_key(|(d, _)| *d)
                .map(|(_, a)| a.clone())
                .expect("sets are non-empty")
        })
        .collect()
}

/// `rounds` sampling moves per set. Returns the new samples and their
/// log-joints.
pub fn e_step(
    data: &EmData,
    models: &[&dyn EditModel],
    prior: &BigramPrior,
    samples: &[WordForm],
    rounds: usize,
    rng_key: (u64, &str, usize),
) -> (Vec<WordForm>, Vec<f64>) {
    let (seed, tag, iteration) = rng_key;
    let out: Vec<(WordForm, f64)> = data
        .cognates
        .par_iter()
        .zip(samples.par_iter())
        .enumerate()
        .map(|(c, (cognates, start))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, iteration, c));
            let mut scorer = SetScorer::new(cognates, models, prior);
            let mut x = start.clone();
            for _ in 0..rounds {
                x = mh_step(&mut scorer, &x, &mut rng);
            }
            let j = scorer.log_joint(&x);
            (x, j)
        })
        .collect();
    out.into_iter().unzip()
}

/// Greedy maximum-joint search from each current sample.
pub fn decode(
    data: &EmData,
    models: &[&dyn EditModel],
    prior: &BigramPrior,
    samples: &[WordForm],
    max_rounds: usize,
) -> Vec<WordForm> {
    data.cognates
        .par_iter()
        .zip(samples.par_iter())
        .map(|(cognates, start)| {
            let mut scorer = SetScorer::new(cognates, models, prior);
            decode_one(&mut scorer, start, max_rounds).0
        })
        .collect()
}

/// Edit posteriors of `(sample, cognate)` pairs for one branch. Pairs with
/// zero likelihood are skipped and counted.
pub fn branch_lattices(
    data: &EmData,
    branch: usize,
    model: &dyn EditModel,
    samples: &[WordForm],
) -> (Vec<PairLattice>, usize) {
    let results: Vec<Option<PairLattice>> = data
        .cognates
        .par_iter()
        .zip(samples.par_iter())
        .map(|(cognates, x)| {
            let y = &cognates[branch];
            posteriors(x, y, model)
                .ok()
                .map(|p| PairLattice::from_posteriors(x.clone(), y.clone(), &p))
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    (results.into_iter().flatten().collect(), skipped)
}

fn fit_classical(data: &EmData, cfg: &EmConfig, lattices: &[PairLattice]) -> MultinomialEditModel {
    let mut counts = ExpectedCounts::new(data.num_symbols, cfg.classical_radius);
    for l in lattices {
        counts.add_lattice(l);
    }
    fit_multinomial(&counts, cfg.classical_alpha)
}

fn untrained_models(data: &EmData, cfg: &EmConfig) -> Result<Vec<BranchModel>, EmError> {
    let m = UntrainedModel::from_params(data.num_symbols, &cfg.untrained).map_err(|e| EmError::Config(e.to_string()))?;
    Ok(vec![BranchModel::Untrained(m); data.num_branches()])
}

fn check_prior(data: &EmData, prior: &BigramPrior) -> Result<(), EmError> {
    if prior.num_symbols() != data.num_symbols {
        return Err(EmError::Data(format!(
            "prior covers {} symbols but the data uses {}",
            prior.num_symbols(),
            data.num_symbols
        )));
    }
    Ok(())
}

fn record(
    data: &EmData,
    cfg: &EmConfig,
    state: &ReconstructionState,
    joints: &[f64],
    skipped_pairs: usize,
    train_loss: Vec<f64>,
) -> IterationRecord {
    let decode_distance = if cfg.decode_each_iteration && data.gold.is_some() {
        let models = as_models(&state.models);
        let words = decode(data, &models, &state.prior, &state.samples, cfg.decode_rounds);
        data.mean_distance_to_gold(&words)
    } else {
        None
    };
    let rec = IterationRecord {
        phase: state.phase,
        iteration: state.iteration,
        mean_log_joint: joints.iter().sum::<f64>() / joints.len() as f64,
        sample_distance: data.mean_distance_to_gold(&state.samples),
        decode_distance,
        skipped_pairs,
        train_loss,
    };
    log::info!(
        "{} {:>2}: mean log-joint {:.4}{}{}",
        rec.phase,
        rec.iteration,
        rec.mean_log_joint,
        rec.sample_distance.map_or(String::new(), |d| format!(", sample distance {d:.4}")),
        rec.decode_distance.map_or(String::new(), |d| format!(", decode distance {d:.4}")),
    );
    rec
}

/// Classical EM iterations: fit multinomials to the posteriors of the
/// current samples, then resample.
fn classical_iterations(
    data: &EmData,
    prior: &BigramPrior,
    cfg: &EmConfig,
    phase: Phase,
    iterations: usize,
    observer: &mut Observer<'_>,
) -> Result<(ReconstructionState, Vec<IterationRecord>), EmError> {
    let mut state = ReconstructionState {
        phase,
        iteration: 0,
        samples: medoid_init(&data.cognates),
        models: untrained_models(data, cfg)?,
        prior: prior.clone(),
    };
    let mut history = Vec::new();
    for it in 1..=iterations {
        let mut skipped = 0;
        let mut models = Vec::with_capacity(data.num_branches());
        for (l, m) in state.models.iter().enumerate() {
            let (lattices, s) = branch_lattices(data, l, m.as_edit_model(), &state.samples);
            skipped += s;
            models.push(BranchModel::Classical(fit_classical(data, cfg, &lattices)));
        }
        state.models = models;
        let (samples, joints) = e_step(
            data,
            &as_models(&state.models),
            prior,
            &state.samples,
            cfg.mh_rounds,
            (cfg.seed, &phase.to_string(), it),
        );
        state.samples = samples;
        state.iteration = it;
        let rec = record(data, cfg, &state, &joints, skipped, Vec::new());
        observer(&rec, &state)?;
        history.push(rec);
    }
    Ok((state, history))
}

/// Samples and models after the classical warm-up of a neural run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bootstrap {
    pub state: ReconstructionState,
    pub history: Vec<IterationRecord>,
}

impl Bootstrap {
    /// The first neural training set: edit posteriors of the bootstrap
    /// samples under the bootstrap models, per branch.
    pub fn training_set(&self, data: &EmData) -> (Vec<Vec<PairLattice>>, usize) {
        let mut skipped = 0;
        let sets = (0..data.num_branches())
            .map(|l| {
                let (lat, s) = branch_lattices(data, l, self.state.models[l].as_edit_model(), &self.state.samples);
                skipped += s;
                lat
            })
            .collect();
        (sets, skipped)
    }
}

/// Runs the classical warm-up. With zero iterations the samples are the
/// medoid initialization and the models are the untrained baseline.
pub fn bootstrap(
    data: &EmData,
    prior: &BigramPrior,
    cfg: &EmConfig,
    observer: &mut Observer<'_>,
) -> Result<Bootstrap, EmError> {
    cfg.validate()?;
    check_prior(data, prior)?;
    let (state, history) = classical_iterations(data, prior, cfg, Phase::Bootstrap, cfg.bootstrap_iterations, observer)?;
    Ok(Bootstrap { state, history })
}

fn neural_config(data: &EmData, cfg: &EmConfig) -> NeuralConfig {
    NeuralConfig {
        num_symbols: data.num_symbols,
        embedding_dim: cfg.embedding_dim,
        hidden_dim: cfg.hidden_dim,
        radius: cfg.radius,
        init_scale: 0.08,
    }
}

/// Neural EM starting from a finished bootstrap.
pub fn run_from_bootstrap(
    boot: &Bootstrap,
    data: &EmData,
    cfg: &EmConfig,
    observer: &mut Observer<'_>,
) -> Result<RunResult, EmError> {
    cfg.validate()?;
    check_prior(data, &boot.state.prior)?;
    let prior = &boot.state.prior;
    let mut neural: Vec<NeuralEditModel> = (0..data.num_branches())
        .map(|l| NeuralEditModel::new(neural_config(data, cfg), derive_seed(cfg.seed, "init", 0, l)))
        .collect();
    let mut samples = boot.state.samples.clone();
    let mut history = boot.history.clone();
    let (mut training, mut skipped) = boot.training_set(data);
    let mut state = boot.state.clone();
    for it in 1..=cfg.em_iterations {
        if it > 1 {
            skipped = 0;
            training = neural
                .iter()
                .enumerate()
                .map(|(l, m)| {
                    let (lat, s) = branch_lattices(data, l, m, &samples);
                    skipped += s;
                    lat
                })
                .collect();
        }
        let mut losses = Vec::with_capacity(neural.len());
        for (l, (model, lattices)) in neural.iter_mut().zip(&training).enumerate() {
            let train = TrainConfig {
                seed: derive_seed(cfg.seed, "train", it, l),
                ..cfg.train.clone()
            };
            let report = train_neural(model, lattices, &train).map_err(|source| EmError::Train {
                phase: Phase::Em,
                iteration: it,
                branch: l,
                source,
            })?;
            losses.push(report.epoch_losses.last().copied().unwrap_or(0.0));
        }
        let models: Vec<&dyn EditModel> = neural.iter().map(|m| m as &dyn EditModel).collect();
        let (new_samples, joints) = e_step(data, &models, prior, &samples, cfg.mh_rounds, (cfg.seed, "em", it));
        samples = new_samples;
        state = ReconstructionState {
            phase: Phase::Em,
            iteration: it,
            samples: samples.clone(),
            models: neural.iter().cloned().map(BranchModel::Neural).collect(),
            prior: prior.clone(),
        };
        let rec = record(data, cfg, &state, &joints, skipped, losses);
        observer(&rec, &state)?;
        history.push(rec);
    }
    let reconstructions = decode(data, &as_models(&state.models), prior, &state.samples, cfg.decode_rounds);
    Ok(RunResult {
        state,
        history,
        reconstructions,
    })
}

/// Runs the configured pipeline end to end and decodes.
///
/// * neural: bootstrap, then `em_iterations` neural iterations;
/// * classical: `em_iterations` multinomial iterations;
/// * untrained: no EM, decode from the medoid initialization.
pub fn run(data: &EmData, prior: &BigramPrior, cfg: &EmConfig, observer: &mut Observer<'_>) -> Result<RunResult, EmError> {
    cfg.validate()?;
    check_prior(data, prior)?;
    match cfg.mode {
        Mode::Neural => {
            let boot = bootstrap(data, prior, cfg, observer)?;
            run_from_bootstrap(&boot, data, cfg, observer)
        }
        Mode::Classical => {
            let (state, history) = classical_iterations(data, prior, cfg, Phase::Em, cfg.em_iterations, observer)?;
            let reconstructions = decode(data, &as_models(&state.models), prior, &state.samples, cfg.decode_rounds);
            Ok(RunResult {
                state,
                history,
                reconstructions,
            })
        }
        Mode::Untrained => {
            let state = ReconstructionState {
                phase: Phase::Em,
                iteration: 0,
                samples: medoid_init(&data.cognates),
                models: untrained_models(data, cfg)?,
                prior: prior.clone(),
            };
            let reconstructions = decode(data, &as_models(&state.models), prior, &state.samples, cfg.decode_rounds);
            Ok(RunResult {
                state,
                history: Vec::new(),
                reconstructions,
            })
        }
    }
}

/// An observer that ignores every iteration.
pub fn no_observer() -> impl FnMut(&IterationRecord, &ReconstructionState) -> std::io::Result<()> {
    |_, _| Ok(())
}
