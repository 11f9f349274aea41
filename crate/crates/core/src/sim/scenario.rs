use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::assistant::{Event, MediaCommand};
use crate::intent::IntentClass;

use super::SimError;

/// One scripted step.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedEvent {
    Dispatch(Event),
    /// `ResponseReady` with no arguments: the reply comes from the brain's
    /// answer to the most recent `CallBrain`.
    BrainResponse,
    /// Runs hotword detection on a signal file and dispatches
    /// `HotwordDetected` if it fires.
    AudioFixture {
        signal: PathBuf,
        template: PathBuf,
    },
}

impl ScriptedEvent {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ScriptedEvent::Dispatch(e) => e.kind_name(),
            ScriptedEvent::BrainResponse => "ResponseReady",
            ScriptedEvent::AudioFixture { .. } => "AudioFixture",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEntry {
    pub at_ms: u64,
    pub event: ScriptedEvent,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub entries: Vec<ScenarioEntry>,
    /// Directory that relative fixture paths resolve against.
    pub base_dir: Option<PathBuf>,
}

/// Double-quotes `s` so that a POSIX-style splitter reads it back as one word.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn parse_error(line: usize, reason: impl Into<String>) -> SimError {
    SimError::Parse {
        line,
        reason: reason.into(),
    }
}

fn joined(line: usize, kind: &str, args: &[String]) -> Result<String, SimError> {
    if args.is_empty() {
        return Err(parse_error(line, format!("{kind} needs a text argument")));
    }
    Ok(args.join(" "))
}

fn no_args(
    line: usize,
    kind: &str,
    args: &[String],
    event: Event,
) -> Result<ScriptedEvent, SimError> {
    if args.is_empty() {
        Ok(ScriptedEvent::Dispatch(event))
    } else {
        Err(parse_error(line, format!("{kind} takes no arguments")))
    }
}

fn parse_event(line: usize, kind: &str, args: &[String]) -> Result<ScriptedEvent, SimError> {
    let event = match kind {
        "HotwordDetected" => return no_args(line, kind, args, Event::HotwordDetected),
        "WakeButtonPressed" => return no_args(line, kind, args, Event::WakeButtonPressed),
        "ResponseSpoken" => return no_args(line, kind, args, Event::ResponseSpoken),
        "ErrorAnnounced" => return no_args(line, kind, args, Event::ErrorAnnounced),
        "TranscriptReady" => Event::TranscriptReady(joined(line, kind, args)?),
        "RecognitionFailed" => Event::RecognitionFailed(joined(line, kind, args)?),
        "QueryFailed" => Event::QueryFailed(joined(line, kind, args)?),
        "ResponseReady" => match args {
            [] => return Ok(ScriptedEvent::BrainResponse),
            [label, text] => Event::ResponseReady {
                intent: IntentClass::from_label(label)
                    .ok_or_else(|| parse_error(line, format!("unknown intent label {label:?}")))?,
                text: text.clone(),
            },
            _ => {
                return Err(parse_error(
                    line,
                    "ResponseReady takes no arguments or <label> <text>",
                ))
            }
        },
        "MediaCommand" => {
            let command = match args {
                [verb, track] if verb == "play" => MediaCommand::Play(track.clone()),
                [verb] if verb == "pause" => MediaCommand::Pause,
                [verb] if verb == "stop" => MediaCommand::Stop,
                _ => {
                    return Err(parse_error(
                        line,
                        "MediaCommand expects `play <id>`, `pause` or `stop`",
                    ))
                }
            };
            Event::MediaCommand(command)
        }
        "AudioFixture" => {
            return match args {
                [signal, template] => Ok(ScriptedEvent::AudioFixture {
                    signal: signal.into(),
                    template: template.into(),
                }),
                _ => Err(parse_error(
                    line,
                    "AudioFixture expects <signal> <template>",
                )),
            }
        }
        other => return Err(parse_error(line, format!("unknown event kind {other:?}"))),
    };
    Ok(ScriptedEvent::Dispatch(event))
}

impl Scenario {
    /// Parses `t=<ms> <EventKind> [args]` lines. Blank lines and `#`
    /// comments are skipped; arguments use shell-style quoting.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut entries: Vec<ScenarioEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let words =
                shlex::split(trimmed).ok_or_else(|| parse_error(line, "unbalanced quotes"))?;
            let (stamp, kind, args) = match words.as_slice() {
                [stamp, kind, args @ ..] => (stamp, kind, args),
                _ => return Err(parse_error(line, "expected `t=<ms> <EventKind>`")),
            };
            let at_ms = stamp
                .strip_prefix("t=")
                .and_then(|ms| ms.parse::<u64>().ok())
                .ok_or_else(|| parse_error(line, format!("bad timestamp {stamp:?}")))?;
            if entries.last().is_some_and(|prev| at_ms < prev.at_ms) {
                return Err(SimError::NonMonotoneTimestamps { line });
            }
            entries.push(ScenarioEntry {
                at_ms,
                event: parse_event(line, kind, args)?,
            });
        }
        Ok(Scenario {
            entries,
            base_dir: None,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut scenario = Self::parse(&text)?;
        scenario.base_dir = path.parent().map(Path::to_path_buf);
        Ok(scenario)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "t={} {}", e.at_ms, format_event(&e.event));
        }
        out
    }
}

/// The event part of a scenario line (everything after the timestamp).
pub fn format_event(event: &ScriptedEvent) -> String {
    let kind = event.kind_name();
    match event {
        ScriptedEvent::BrainResponse => kind.to_owned(),
        ScriptedEvent::AudioFixture { signal, template } => format!(
            "{kind} {} {}",
            quote(&signal.display().to_string()),
            quote(&template.display().to_string())
        ),
        ScriptedEvent::Dispatch(e) => match e {
            Event::HotwordDetected
            | Event::WakeButtonPressed
            | Event::ResponseSpoken
            | Event::ErrorAnnounced => kind.to_owned(),
            Event::TranscriptReady(text)
            | Event::RecognitionFailed(text)
            | Event::QueryFailed(text) => format!("{kind} {}", quote(text)),
            Event::ResponseReady { intent, text } => {
                format!("{kind} {} {}", quote(intent.label()), quote(text))
            }
            Event::MediaCommand(MediaCommand::Play(track)) => {
                format!("{kind} play {}", quote(track))
            }
            Event::MediaCommand(MediaCommand::Pause) => format!("{kind} pause"),
            Event::MediaCommand(MediaCommand::Stop) => format!("{kind} stop"),
        },
    }
}
