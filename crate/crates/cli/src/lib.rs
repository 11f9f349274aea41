//! Subcommand implementations for the `kasper` binary. Each takes parsed
//! options and returns its stdout text, so tests can drive them directly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use kasper_brain::HttpBrain;
use kasper_core::assistant::AssistantContext;
use kasper_core::brain::{Brain, SkillRegistry};
use kasper_core::intent::{
    evaluate, frequent_tokens, train_model, vocabulary, Algorithm, Dataset, EmbeddingTable,
    ModelBundle, ModelKind, NeuralModel, TrainConfig, DEFAULT_EMBEDDING_DIM, DEFAULT_TRAIN_PERCENT,
};
use kasper_core::sim::{
    generate_corpus, run_scenario, BrainClient, CorpusSpec, Scenario, SimError, SimReport,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable or malformed files, inconsistent options.
    #[error("{0}")]
    Validation(String),
    /// The assistant broke one of its own runtime rules.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Assistant(_) => CliError::Invariant(e.to_string()),
            other => invalid(other),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(invalid)
}

fn load_bundle(path: &Path) -> Result<ModelBundle, CliError> {
    ModelBundle::load(path).map_err(invalid)
}

fn load_registry(skills: Option<&Path>) -> Result<SkillRegistry, CliError> {
    skills
        .map(SkillRegistry::load_overrides)
        .transpose()
        .map_err(invalid)
        .map(Option::unwrap_or_default)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoChoice {
    Cnn,
    Rnn,
    Both,
}

impl AlgoChoice {
    pub fn kinds(self) -> &'static [ModelKind] {
        match self {
            AlgoChoice::Cnn => &[ModelKind::Cnn],
            AlgoChoice::Rnn => &[ModelKind::Rnn],
            AlgoChoice::Both => &[ModelKind::Cnn, ModelKind::Rnn],
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub data: PathBuf,
    pub algo: AlgoChoice,
    pub config: TrainConfig,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn train(opts: &TrainOptions) -> Result<String, CliError> {
    let data = load_dataset(&opts.data)?;
    let table = opts
        .embeddings
        .as_deref()
        .map(EmbeddingTable::load)
        .transpose()
        .map_err(invalid)?;
    let started = Instant::now();
    let bundle = ModelBundle::train(&data, opts.algo.kinds(), opts.config.clone(), table)
        .map_err(invalid)?;
    let elapsed = started.elapsed();
    bundle.save(&opts.out).map_err(invalid)?;
    Ok(format!(
        "trained {} on {} examples ({} train, dim {}) in {:.2}s -> {}\n",
        opts.algo
            .kinds()
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("+"),
        data.len(),
        bundle.exemplars.len(),
        bundle.embeddings.dim(),
        elapsed.as_secs_f64(),
        opts.out.display()
    ))
}

/// One line of the classifier comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub train_time: Option<Duration>,
    pub eval_time: Duration,
}

pub fn algorithm_title(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Fuzzy => "Fuzzy DP",
        Algorithm::Knn => "KNN",
        Algorithm::Cnn => "CNN",
        Algorithm::Rnn => "RNN",
    }
}

pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>10} {:>14} {:>13}",
        "Algorithm", "Accuracy (%)", "Correct", "Train time (s)", "Eval time (s)"
    );
    for r in rows {
        let train = r
            .train_time
            .map_or_else(|| "-".to_owned(), |t| format!("{:.2}", t.as_secs_f64()));
        let _ = writeln!(
            out,
            "{:<10} {:>12.2} {:>10} {:>14} {:>13.3}",
            algorithm_title(r.algorithm),
            r.accuracy * 100.0,
            format!("{}/{}", r.correct, r.total),
            train,
            r.eval_time.as_secs_f64()
        );
    }
    let time = |a: Algorithm| {
        rows.iter()
            .find(|r| r.algorithm == a)
            .and_then(|r| r.train_time)
    };
    if let (Some(cnn), Some(rnn)) = (time(Algorithm::Cnn), time(Algorithm::Rnn)) {
        let _ = writeln!(
            out,
            "RNN/CNN training wall-clock ratio: {:.2}",
            rnn.as_secs_f64() / cnn.as_secs_f64().max(1e-9)
        );
    }
    out
}

/// The held-out part of `data`, provided the checkpoint was trained on the
/// rest of it.
pub fn held_out(bundle: &ModelBundle, data: &Dataset) -> Result<Dataset, CliError> {
    let (train, held) = data.split(bundle.config.seed, bundle.train_percent);
    if train != bundle.exemplars {
        return Err(invalid(
            "the checkpoint was not trained on this data (its train split differs)",
        ));
    }
    Ok(held)
}

/// Evaluates every algorithm available in `bundle` on its held-out split
/// of `data`. With `time_training`, CNN and RNN are retrained from the
/// bundle's config to measure wall-clock; the retrained parameters must
/// reproduce the checkpoint.
pub fn compare_algorithms(
    bundle: &ModelBundle,
    data: &Dataset,
    time_training: bool,
) -> Result<Vec<ComparisonRow>, CliError> {
    let held = held_out(bundle, data)?;
    let mut rows = Vec::new();
    for algorithm in bundle.available() {
        let train_time = match algorithm {
            Algorithm::Cnn | Algorithm::Rnn if time_training => {
                let kind = if algorithm == Algorithm::Cnn {
                    ModelKind::Cnn
                } else {
                    ModelKind::Rnn
                };
                let started = Instant::now();
                let model =
                    train_model(kind, &bundle.exemplars, &bundle.embeddings, &bundle.config)
                        .map_err(invalid)?;
                let elapsed = started.elapsed();
                let matches = match &model {
                    NeuralModel::Cnn(m) => bundle.cnn.as_ref() == Some(m),
                    NeuralModel::Rnn(m) => bundle.rnn.as_ref() == Some(m),
                };
                if !matches {
                    return Err(invalid(format!(
                        "retraining {kind} from the checkpoint's train split does not reproduce its parameters"
                    )));
                }
                Some(elapsed)
            }
            _ => None,
        };
        let started = Instant::now();
        let report = evaluate(|text| bundle.classify(algorithm, text), &held).map_err(invalid)?;
        rows.push(ComparisonRow {
            algorithm,
            accuracy: report.accuracy,
            correct: report.correct,
            total: report.total,
            train_time,
            eval_time: started.elapsed(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub data: PathBuf,
    pub ckpt: PathBuf,
    pub all_algos: bool,
    pub algo: Algorithm,
}

pub fn eval(opts: &EvalOptions) -> Result<String, CliError> {
    let data = load_dataset(&opts.data)?;
    let bundle = load_bundle(&opts.ckpt)?;
    if opts.all_algos {
        let rows = compare_algorithms(&bundle, &data, true)?;
        return Ok(format_comparison(&rows));
    }
    let held = held_out(&bundle, &data)?;
    let report = evaluate(|t| bundle.classify(opts.algo, t), &held).map_err(invalid)?;
    Ok(format!(
        "{}: accuracy {:.2}% ({}/{})\n",
        algorithm_title(opts.algo),
        report.accuracy * 100.0,
        report.correct,
        report.total
    ))
}

pub fn classify(
    ckpt: &Path,
    text: &str,
    algo: Algorithm,
    skills: Option<&Path>,
) -> Result<String, CliError> {
    let brain = Brain::new(load_bundle(ckpt)?, load_registry(skills)?);
    let response = brain
        .handle_query(
            &kasper_core::brain::QueryRequest {
                text: text.to_owned(),
            },
            Some(algo),
        )
        .map_err(invalid)?;
    Ok(serde_json::to_string(&response).expect("response serializes") + "\n")
}

/// Fuzzy-matching brain over the train split of the default corpus.
pub fn default_brain() -> Brain {
    let spec = CorpusSpec::default();
    let data = generate_corpus(&spec).expect("default corpus spec is valid");
    let (train, _) = data.split(spec.seed, DEFAULT_TRAIN_PERCENT);
    let table = EmbeddingTable::random(vocabulary(&data), DEFAULT_EMBEDDING_DIM, spec.seed);
    let config = TrainConfig {
        seed: spec.seed,
        ..TrainConfig::default()
    };
    Brain::new(
        ModelBundle::new(config, table, train),
        SkillRegistry::default(),
    )
    .with_default_algorithm(Algorithm::Fuzzy)
}

/// Where simulated `CallBrain` actions go.
#[derive(Debug, Clone)]
pub enum BrainSource {
    Default,
    Checkpoint {
        path: PathBuf,
        algo: Algorithm,
    },
    Remote {
        url: String,
        algo: Option<Algorithm>,
    },
}

pub enum LoadedBrain {
    Local(Box<Brain>),
    Remote(HttpBrain),
}

impl LoadedBrain {
    pub fn client(&self) -> &dyn BrainClient {
        match self {
            LoadedBrain::Local(b) => b.as_ref(),
            LoadedBrain::Remote(h) => h,
        }
    }
}

pub fn load_brain(source: &BrainSource, skills: Option<&Path>) -> Result<LoadedBrain, CliError> {
    Ok(match source {
        BrainSource::Default => {
            let brain = default_brain();
            let registry = load_registry(skills)?;
            LoadedBrain::Local(Box::new(
                Brain::new(brain.bundle().clone(), registry)
                    .with_default_algorithm(Algorithm::Fuzzy),
            ))
        }
        BrainSource::Checkpoint { path, algo } => LoadedBrain::Local(Box::new(
            Brain::new(load_bundle(path)?, load_registry(skills)?).with_default_algorithm(*algo),
        )),
        BrainSource::Remote { url, algo } => {
            LoadedBrain::Remote(HttpBrain::new(url.clone(), *algo).map_err(invalid)?)
        }
    })
}

/// Runs a scenario file. Violations turn into an invariant error after the
/// report has been produced.
pub fn simulate(scenario: &Path, brain: &dyn BrainClient) -> Result<SimReport, CliError> {
    let scenario = Scenario::load(scenario)?;
    Ok(run_scenario(
        &scenario,
        AssistantContext::new(),
        Some(brain),
    )?)
}

pub fn gen_corpus(seed: u64, per_class: usize, out: &Path) -> Result<String, CliError> {
    let spec = CorpusSpec {
        seed,
        per_class,
        ..CorpusSpec::default()
    };
    let data = generate_corpus(&spec).map_err(invalid)?;
    write_file(out, &data.to_file_string())?;
    Ok(format!(
        "wrote {} examples to {}\n",
        data.len(),
        out.display()
    ))
}

pub const DEFAULT_EMBEDDING_TOKENS: usize = 200;
pub const DEFAULT_EMBEDDING_BOUND: f64 = 0.5;

/// Seeded synthetic vectors for the `top` most frequent tokens of a corpus.
pub fn synthetic_embeddings(
    data: &Dataset,
    top: usize,
    dim: usize,
    bound: f64,
    seed: u64,
) -> Result<EmbeddingTable, CliError> {
    if dim == 0 || !(bound > 0.0 && bound.is_finite()) {
        return Err(invalid("dimension and bound must be positive"));
    }
    Ok(EmbeddingTable::random_with_bound(
        frequent_tokens(data, top),
        dim,
        bound,
        seed,
    ))
}

pub fn gen_embeddings(
    data: &Path,
    top: usize,
    dim: usize,
    bound: f64,
    seed: u64,
    out: &Path,
) -> Result<String, CliError> {
    let table = synthetic_embeddings(&load_dataset(data)?, top, dim, bound, seed)?;
    write_file(out, &table.to_text())?;
    Ok(format!(
        "wrote {} vectors of dimension {} to {}\n",
        table.len(),
        table.dim(),
        out.display()
    ))
}
