//! Deterministic conversation simulator on a virtual clock, the synthetic
//! corpus generator and the REPL front end.

use thiserror::Error;

use crate::assistant::AssistantError;
use crate::audio::AudioError;

mod corpus;
mod repl;
mod scenario;
mod simulator;

pub use corpus::{
    generate_corpus, CorpusError, CorpusSpec, DEFAULT_CORPUS_SEED, DEFAULT_PER_CLASS,
};
pub use repl::{parse_repl_line, Repl, ReplInput, ReplTurn, REPL_HELP, REPL_STEP_MS};
pub use scenario::{format_event, quote, Scenario, ScenarioEntry, ScriptedEvent};
pub use simulator::{run_scenario, BrainClient, SimReport, Simulator, StepOutcome};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: timestamp goes backwards")]
    NonMonotoneTimestamps { line: usize },
    #[error("clock at {now} ms cannot move back to {requested} ms")]
    ClockWentBackwards { now: u64, requested: u64 },
    #[error("t={at_ms}: ResponseReady needs a brain reply but none is pending")]
    BrainUnavailable { at_ms: u64 },
    #[error("brain: {0}")]
    Brain(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Assistant(#[from] AssistantError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
