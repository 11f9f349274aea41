use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kasper_brain::{BrainHandle, DEFAULT_BIND};
use kasper_cli::{
    AlgoChoice, BrainSource, CliError, EvalOptions, TrainOptions, DEFAULT_EMBEDDING_BOUND,
    DEFAULT_EMBEDDING_TOKENS,
};
use kasper_core::brain::Brain;
use kasper_core::intent::{Algorithm, TrainConfig, DEFAULT_EMBEDDING_DIM};
use kasper_core::sim::{Repl, DEFAULT_CORPUS_SEED, DEFAULT_PER_CLASS};

#[derive(Parser)]
#[command(
    name = "kasper",
    version,
    about = "Voice assistant simulator and intent classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainAlgo {
    Cnn,
    Rnn,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Cnn,
    Rnn,
    Knn,
    Fuzzy,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Cnn => Algorithm::Cnn,
            AlgoArg::Rnn => Algorithm::Rnn,
            AlgoArg::Knn => Algorithm::Knn,
            AlgoArg::Fuzzy => Algorithm::Fuzzy,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train CNN and/or RNN classifiers and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        algo: TrainAlgo,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Learning rate for both networks.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        filters: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        /// Pretrained word vectors, one `token v1 v2 ...` per line.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        allow_missing_classes: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Held-out accuracy of a checkpoint.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Compare every available algorithm, with training times.
        #[arg(long)]
        all_algos: bool,
        #[arg(long, value_enum, default_value = "cnn")]
        algo: AlgoArg,
    },
    /// Classify one utterance and print the JSON response.
    Classify {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, value_enum, default_value = "cnn")]
        algo: AlgoArg,
        #[arg(long)]
        skills: Option<PathBuf>,
    },
    /// Serve the brain over HTTP.
    Serve {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: String,
        #[arg(long, value_enum, default_value = "cnn")]
        algo: AlgoArg,
        /// Tab-separated `label<TAB>template` response overrides.
        #[arg(long)]
        skills: Option<PathBuf>,
    },
    /// Replay a scenario file on the virtual clock.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, conflicts_with = "brain_url")]
        ckpt: Option<PathBuf>,
        #[arg(long, value_enum)]
        algo: Option<AlgoArg>,
        /// Query a running `kasper serve` instead of an in-process brain.
        #[arg(long)]
        brain_url: Option<String>,
        #[arg(long)]
        skills: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interactive session; see `!help`.
    Repl {
        #[arg(long, conflicts_with = "brain_url")]
        ckpt: Option<PathBuf>,
        #[arg(long, value_enum)]
        algo: Option<AlgoArg>,
        #[arg(long)]
        brain_url: Option<String>,
        /// Write the session as a replayable scenario on exit.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Write the synthetic labelled corpus.
    GenCorpus {
        #[arg(long, default_value_t = DEFAULT_CORPUS_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PER_CLASS)]
        per_class: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write seeded synthetic word vectors for a corpus's frequent tokens.
    GenEmbeddings {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_TOKENS)]
        top: usize,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_BOUND)]
        bound: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn brain_source(
    ckpt: Option<PathBuf>,
    algo: Option<AlgoArg>,
    brain_url: Option<String>,
) -> BrainSource {
    match (ckpt, brain_url) {
        (Some(path), _) => BrainSource::Checkpoint {
            path,
            algo: algo.map_or(Algorithm::Cnn, Algorithm::from),
        },
        (None, Some(url)) => BrainSource::Remote {
            url,
            algo: algo.map(Algorithm::from),
        },
        (None, None) => BrainSource::Default,
    }
}

fn serve(
    ckpt: PathBuf,
    bind: String,
    algo: Algorithm,
    skills: Option<PathBuf>,
) -> Result<(), CliError> {
    let runtime =
        tokio::runtime::Runtime::new().map_err(|e| CliError::Validation(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(|e| CliError::Validation(format!("{bind}: {e}")))?;
        let handle = BrainHandle::new();
        log::info!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Validation(e.to_string()))?);
        let server = tokio::spawn(kasper_brain::serve(listener, handle.clone()));
        let loaded = tokio::task::spawn_blocking(move || -> Result<Brain, CliError> {
            let source = BrainSource::Checkpoint { path: ckpt, algo };
            match kasper_cli::load_brain(&source, skills.as_deref())? {
                kasper_cli::LoadedBrain::Local(b) => Ok(*b),
                kasper_cli::LoadedBrain::Remote(_) => unreachable!("checkpoint source is local"),
            }
        })
        .await
        .expect("loader task panicked")?;
        handle.load(loaded);
        log::info!("checkpoint loaded");
        tokio::select! {
            r = server => r.expect("server task panicked").map_err(|e| CliError::Validation(e.to_string())),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}

fn repl(source: BrainSource, record: Option<PathBuf>) -> Result<(), CliError> {
    let brain = kasper_cli::load_brain(&source, None)?;
    let mut repl = Repl::new(Some(brain.client()));
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    println!("type !help for commands");
    let mut line = String::new();
    loop {
        print!("> ");
        let _ = stdout.flush();
        line.clear();
        if stdin
            .lock()
            .read_line(&mut line)
            .map_err(|e| CliError::Validation(e.to_string()))?
            == 0
        {
            break;
        }
        let turn = match repl.feed(&line) {
            Ok(turn) => turn,
            Err(e) => {
                println!("error: {e}");
                continue;
            }
        };
        for out in &turn.output {
            println!("{out}");
        }
        if turn.quit {
            break;
        }
    }
    if let Some(path) = record {
        std::fs::write(&path, repl.as_scenario().to_text())
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    }
    let report = repl.report();
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Invariant(report.violations.join("; ")))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            data,
            algo,
            seed,
            epochs,
            lr,
            filters,
            hidden,
            embeddings,
            allow_missing_classes,
            out,
        } => {
            let mut config = TrainConfig {
                seed,
                allow_missing_classes,
                ..TrainConfig::default()
            };
            if let Some(lr) = lr {
                config = config.with_learning_rate(lr);
            }
            config.epochs = epochs.unwrap_or(config.epochs);
            config.filters = filters.unwrap_or(config.filters);
            config.hidden = hidden.unwrap_or(config.hidden);
            let algo = match algo {
                TrainAlgo::Cnn => AlgoChoice::Cnn,
                TrainAlgo::Rnn => AlgoChoice::Rnn,
                TrainAlgo::Both => AlgoChoice::Both,
            };
            print!(
                "{}",
                kasper_cli::train(&TrainOptions {
                    data,
                    algo,
                    config,
                    embeddings,
                    out,
                })?
            );
        }
        Command::Eval {
            data,
            ckpt,
            all_algos,
            algo,
        } => print!(
            "{}",
            kasper_cli::eval(&EvalOptions {
                data,
                ckpt,
                all_algos,
                algo: algo.into(),
            })?
        ),
        Command::Classify {
            ckpt,
            text,
            algo,
            skills,
        } => print!(
            "{}",
            kasper_cli::classify(&ckpt, &text, algo.into(), skills.as_deref())?
        ),
        Command::Serve {
            ckpt,
            bind,
            algo,
            skills,
        } => serve(ckpt, bind, algo.into(), skills)?,
        Command::Simulate {
            scenario,
            ckpt,
            algo,
            brain_url,
            skills,
            out,
        } => {
            let brain =
                kasper_cli::load_brain(&brain_source(ckpt, algo, brain_url), skills.as_deref())?;
            let report = kasper_cli::simulate(&scenario, brain.client())?;
            let text = report.to_text();
            match out {
                Some(path) => std::fs::write(&path, &text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            if !report.passed() {
                return Err(CliError::Invariant(report.violations.join("; ")));
            }
        }
        Command::Repl {
            ckpt,
            algo,
            brain_url,
            record,
        } => repl(brain_source(ckpt, algo, brain_url), record)?,
        Command::GenCorpus {
            seed,
            per_class,
            out,
        } => print!("{}", kasper_cli::gen_corpus(seed, per_class, &out)?),
        Command::GenEmbeddings {
            data,
            top,
            dim,
            bound,
            seed,
            out,
        } => print!(
            "{}",
            kasper_cli::gen_embeddings(&data, top, dim, bound, seed, &out)?
        ),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
