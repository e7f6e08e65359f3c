use std::fs;
use std::path::{Path, PathBuf};

use protoform::alphabet::{PhonemeAlphabet, WordForm};
use protoform::data::{
    default_benchmark, evaluate as score, generate_family, load_corpus, load_dataset, load_reconstructions,
    proto_alphabet, save_dataset, save_reconstructions, CognateDataset, DataError, EvalReport, EMPTY_WORD,
};
use protoform::editmodel::{ContextRadius, TrainConfig};
use protoform::em::{
    bootstrap, decode, no_observer, run, run_from_bootstrap, EmConfig, EmData, EmError, IterationRecord, Mode,
    Phase, ReconstructionState,
};
use protoform::prior::{fit_bigram, BigramPrior, PriorError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::args::{AblateArgs, EvaluateArgs, GenerateArgs, ReconstructArgs, RunArgs, SweepParam, TrainArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Em(#[from] EmError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    if a.words == 0 {
        return Err(invalid("--words must be at least 1"));
    }
    let all = default_benchmark();
    if a.branches == 0 || a.branches > all.len() {
        return Err(invalid(format!("--branches must be between 1 and {}", all.len())));
    }
    let ds = generate_family(a.words, &proto_alphabet(), &all[..a.branches], a.seed).map_err(|e| match e {
        DataError::Config(msg) => invalid(msg),
        other => other.into(),
    })?;
    create_dir(&a.out_dir)?;
    save_dataset(&ds, a.out_dir.join("dataset.tsv"))?;
    let corpus: String = ds
        .gold_forms()
        .iter()
        .map(|w| format!("{}\n", render(&ds.alphabet, w)))
        .collect();
    let corpus_path = a.out_dir.join("proto_corpus.txt");
    fs::write(&corpus_path, corpus).map_err(io_err(&corpus_path))?;
    log::info!(
        "wrote {} cognate sets over {} languages to {}",
        ds.sets.len(),
        ds.languages.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn render(alphabet: &PhonemeAlphabet, w: &WordForm) -> String {
    if w.is_empty() {
        EMPTY_WORD.to_string()
    } else {
        alphabet.render(w)
    }
}

/// Everything a run needs, loaded and validated.
struct Prepared {
    dataset: CognateDataset,
    data: EmData,
    prior: BigramPrior,
    config: EmConfig,
}

fn em_config(r: &RunArgs) -> Result<EmConfig> {
    let cfg = EmConfig {
        mode: r.mode.into(),
        em_iterations: r.em_iterations,
        mh_rounds: r.mh_rounds,
        bootstrap_iterations: r.bootstrap_iterations,
        decode_rounds: r.decode_rounds,
        radius: r.context_radius,
        embedding_dim: r.embedding_dim,
        hidden_dim: r.hidden_dim,
        train: TrainConfig {
            epochs: r.epochs,
            learning_rate: r.learning_rate,
            batch_size: r.batch_size,
            seed: r.seed,
        },
        classical_radius: r.classical_radius,
        classical_alpha: r.classical_alpha,
        untrained: Default::default(),
        decode_each_iteration: r.decode_each_iteration,
        seed: r.seed,
    };
    cfg.validate().map_err(|e| invalid(e.to_string()))?;
    if !(r.prior_alpha >= 0.0 && r.prior_alpha.is_finite()) {
        return Err(invalid("--prior-alpha must be non-negative"));
    }
    Ok(cfg)
}

fn prepare(r: &RunArgs) -> Result<Prepared> {
    let config = em_config(r)?;
    let mut dataset = load_dataset(&r.dataset)?;
    let corpus_words: Vec<Vec<String>> = match &r.prior_corpus {
        Some(path) => load_corpus(path)?,
        None if dataset.has_gold() => dataset
            .gold_forms()
            .iter()
            .map(|w| w.iter().map(|&s| dataset.alphabet.symbol(s).expect("in alphabet").to_string()).collect())
            .collect(),
        None => {
            return Err(invalid(
                "no --prior-corpus given and the dataset has no gold column to fit the prior on",
            ))
        }
    };
    dataset.extend_alphabet(corpus_words.iter().flatten().cloned())?;
    let corpus: Vec<Vec<u32>> = corpus_words
        .iter()
        .map(|w| w.iter().map(|s| dataset.alphabet.id(s).expect("alphabet extended")).collect())
        .collect();
    let prior = fit_bigram(&corpus, dataset.alphabet.len(), r.prior_alpha)?;
    let data = EmData::from_dataset(&dataset)?;
    Ok(Prepared {
        dataset,
        data,
        prior,
        config,
    })
}

/// A checkpoint file: the state plus what is needed to read it back.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    alphabet: PhonemeAlphabet,
    languages: Vec<String>,
    state: ReconstructionState,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    dataset: String,
    prior_corpus: Option<String>,
    prior_alpha: f64,
    config: EmConfig,
    alphabet: PhonemeAlphabet,
    languages: Vec<String>,
    iterations: Vec<ManifestIteration>,
    reconstructions: String,
    evaluation: Option<Summary>,
}

#[derive(Serialize, Deserialize)]
struct ManifestIteration {
    #[serde(flatten)]
    metrics: IterationRecord,
    checkpoint: String,
}

#[derive(Clone, Serialize, Deserialize)]
struct Summary {
    mean_distance: f64,
    exact_match: f64,
}

impl From<&EvalReport> for Summary {
    fn from(r: &EvalReport) -> Self {
        Summary {
            mean_distance: r.mean_distance,
            exact_match: r.exact_match,
        }
    }
}

fn checkpoint_name(phase: Phase, iteration: usize) -> String {
    format!("checkpoints/{}_{iteration:02}.json", if phase == Phase::Em { "iter" } else { "bootstrap" })
}

fn id_pairs(ds: &CognateDataset, words: &[WordForm]) -> Vec<(String, WordForm)> {
    ds.sets.iter().zip(words).map(|(s, w)| (s.id.clone(), w.clone())).collect()
}

fn gold_pairs(ds: &CognateDataset) -> Option<Vec<(String, WordForm)>> {
    ds.has_gold().then(|| id_pairs(ds, &ds.gold_forms()))
}

fn log_report(label: &str, r: &EvalReport) {
    log::info!(
        "{label}: mean edit distance {:.4}, exact match {:.4} over {} sets",
        r.mean_distance,
        r.exact_match,
        r.distances.len()
    );
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let p = prepare(&a.run)?;
    let out = &a.out_dir;
    create_dir(&out.join("checkpoints"))?;
    write_json(&out.join("prior.json"), &p.prior)?;
    let mut iterations = Vec::new();
    let mut observer = |rec: &IterationRecord, state: &ReconstructionState| -> std::io::Result<()> {
        let name = checkpoint_name(rec.phase, rec.iteration);
        let ck = Checkpoint {
            alphabet: p.dataset.alphabet.clone(),
            languages: p.dataset.languages.clone(),
            state: state.clone(),
        };
        let text = serde_json::to_string(&ck).map_err(std::io::Error::other)?;
        fs::write(out.join(&name), text + "\n")?;
        iterations.push(ManifestIteration {
            metrics: rec.clone(),
            checkpoint: name,
        });
        Ok(())
    };
    let result = run(&p.data, &p.prior, &p.config, &mut observer)?;
    if p.config.mode == Mode::Untrained {
        // no EM iterations: keep the decoded starting state as the only checkpoint
        let name = checkpoint_name(Phase::Em, 0);
        write_json(
            &out.join(&name),
            &Checkpoint {
                alphabet: p.dataset.alphabet.clone(),
                languages: p.dataset.languages.clone(),
                state: result.state.clone(),
            },
        )?;
    }
    let recon = id_pairs(&p.dataset, &result.reconstructions);
    save_reconstructions(&p.dataset.alphabet, &recon, out.join("reconstructions.tsv"))?;
    let evaluation = match gold_pairs(&p.dataset) {
        Some(gold) => {
            let report = score(&recon, &gold)?;
            log_report("final", &report);
            write_json(&out.join("report.json"), &report)?;
            Some(Summary::from(&report))
        }
        None => None,
    };
    let manifest = Manifest {
        dataset: a.run.dataset.display().to_string(),
        prior_corpus: a.run.prior_corpus.as_ref().map(|c| c.display().to_string()),
        prior_alpha: a.run.prior_alpha,
        config: p.config.clone(),
        alphabet: p.dataset.alphabet.clone(),
        languages: p.dataset.languages.clone(),
        iterations,
        reconstructions: "reconstructions.tsv".into(),
        evaluation,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<()> {
    if a.decode_rounds == 0 {
        return Err(invalid("--decode-rounds must be at least 1"));
    }
    let ck: Checkpoint = read_json(&a.checkpoint)?;
    let mut ds = load_dataset(&a.dataset)?;
    ds.extend_alphabet(ck.alphabet.symbols().iter().cloned())?;
    if ds.alphabet != ck.alphabet || ds.languages != ck.languages {
        return Err(invalid("checkpoint alphabet or languages do not match the dataset"));
    }
    let data = EmData::from_dataset(&ds)?;
    if ck.state.samples.len() != data.cognates.len() || ck.state.models.len() != data.num_branches() {
        return Err(invalid("checkpoint does not match the dataset's cognate sets"));
    }
    let models: Vec<_> = ck.state.models.iter().map(|m| m.as_edit_model()).collect();
    let words = decode(&data, &models, &ck.state.prior, &ck.state.samples, a.decode_rounds);
    let recon = id_pairs(&ds, &words);
    save_reconstructions(&ds.alphabet, &recon, &a.out)?;
    if let Some(gold) = gold_pairs(&ds) {
        log_report("reconstruct", &score(&recon, &gold)?);
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let gold = gold_pairs(&ds).ok_or_else(|| invalid("the dataset has no gold (`*`) column"))?;
    let recon = load_reconstructions(&ds.alphabet, &a.reconstructions)?;
    let report = score(&recon, &gold).map_err(|e| match e {
        DataError::IdMismatch(msg) => invalid(msg),
        other => other.into(),
    })?;
    log_report("evaluate", &report);
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    setting: String,
    seed: u64,
    mean_distance: f64,
    exact_match: f64,
}

pub fn ablate(a: &AblateArgs) -> Result<()> {
    let p = prepare(&a.run)?;
    let gold = gold_pairs(&p.dataset).ok_or_else(|| invalid("ablation needs a dataset with a gold column"))?;
    if p.config.mode != Mode::Neural {
        return Err(invalid("ablations sweep the neural model; use --mode neural"));
    }
    let mut settings: Vec<(String, EmConfig)> = Vec::new();
    for v in &a.values {
        let mut cfg = p.config.clone();
        match a.param {
            SweepParam::Epochs => {
                cfg.train.epochs = v
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("bad epoch count `{v}`")))?;
            }
            SweepParam::Radius => cfg.radius = v.parse::<ContextRadius>().map_err(invalid)?,
        }
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        settings.push((v.trim().to_string(), cfg));
    }
    if a.seeds.is_empty() {
        return Err(invalid("--seeds must list at least one seed"));
    }
    create_dir(&a.out_dir)?;
    let mut rows = Vec::new();
    for &seed in &a.seeds {
        let mut base = p.config.clone();
        base.seed = seed;
        base.train.seed = seed;
        let boot = bootstrap(&p.data, &p.prior, &base, &mut no_observer())?;
        for (label, cfg) in &settings {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            cfg.train.seed = seed;
            let result = run_from_bootstrap(&boot, &p.data, &cfg, &mut no_observer())?;
            let report = score(&id_pairs(&p.dataset, &result.reconstructions), &gold)?;
            log_report(&format!("{:?}={label} seed={seed}", a.param).to_lowercase(), &report);
            rows.push(AblationRow {
                setting: label.clone(),
                seed,
                mean_distance: report.mean_distance,
                exact_match: report.exact_match,
            });
        }
    }
    let mut table = String::from("setting\tseed\tmean_distance\texact_match\n");
    for r in &rows {
        table.push_str(&format!("{}\t{}\t{:.6}\t{:.6}\n", r.setting, r.seed, r.mean_distance, r.exact_match));
    }
    let tsv: PathBuf = a.out_dir.join("ablation.tsv");
    fs::write(&tsv, &table).map_err(io_err(&tsv))?;
    write_json(&a.out_dir.join("ablation.json"), &rows)?;
    eprint!("{table}");
    Ok(())
}
