//! Turn-based text front end over the simulator. Each dispatched event
//! advances the virtual clock by [`REPL_STEP_MS`].

use crate::assistant::{AssistantContext, AssistantState, Event, MediaCommand};

use super::scenario::{Scenario, ScenarioEntry, ScriptedEvent};
use super::simulator::{BrainClient, SimReport, Simulator};
use super::SimError;

pub const REPL_STEP_MS: u64 = 100;

pub const REPL_HELP: &str = "\
!wake            hotword
!button          wake button
<text>           utterance (answered by the brain)
!done            finish speaking the response
!fail <msg>      recognition failure
!play <id>       start a track
!pause | !stop   media controls
!state           show state, media and interrupt depth
!help | !quit";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplInput {
    Event(Event),
    Utterance(String),
    Fail(String),
    State,
    Help,
    Quit,
    Empty,
}

pub fn parse_repl_line(line: &str) -> Result<ReplInput, String> {
    let line = line.trim();
    if line.is_empty() {
        return Ok(ReplInput::Empty);
    }
    let Some(command) = line.strip_prefix('!') else {
        return Ok(ReplInput::Utterance(line.to_owned()));
    };
    let (verb, arg) = match command.split_once(char::is_whitespace) {
        Some((verb, arg)) => (verb, arg.trim()),
        None => (command, ""),
    };
    let needs_arg = |what: &str| {
        if arg.is_empty() {
            Err(format!("!{verb} needs {what}"))
        } else {
            Ok(arg.to_owned())
        }
    };
    Ok(match verb {
        "wake" => ReplInput::Event(Event::HotwordDetected),
        "button" => ReplInput::Event(Event::WakeButtonPressed),
        "done" => ReplInput::Event(Event::ResponseSpoken),
        "fail" => ReplInput::Fail(needs_arg("a message")?),
        "play" => ReplInput::Event(Event::MediaCommand(MediaCommand::Play(needs_arg(
            "a track id",
        )?))),
        "pause" => ReplInput::Event(Event::MediaCommand(MediaCommand::Pause)),
        "stop" => ReplInput::Event(Event::MediaCommand(MediaCommand::Stop)),
        "state" => ReplInput::State,
        "help" => ReplInput::Help,
        "quit" | "exit" => ReplInput::Quit,
        other => return Err(format!("unknown command !{other} (try !help)")),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplTurn {
    pub output: Vec<String>,
    pub quit: bool,
}

pub struct Repl<'b> {
    sim: Simulator<'b>,
    next_ms: u64,
    script: Vec<ScenarioEntry>,
}

impl<'b> Repl<'b> {
    pub fn new(brain: Option<&'b dyn BrainClient>) -> Self {
        Self {
            sim: Simulator::new(AssistantContext::new(), brain),
            next_ms: 0,
            script: Vec::new(),
        }
    }

    fn run(&mut self, event: ScriptedEvent, output: &mut Vec<String>) -> Result<(), SimError> {
        let at = self.next_ms;
        let step = self.sim.step(at, &event, None)?;
        self.script.push(ScenarioEntry { at_ms: at, event });
        self.next_ms += REPL_STEP_MS;
        output.extend(step.lines);
        for r in step.responses {
            output.push(serde_json::to_string(&r).expect("response serializes"));
        }
        Ok(())
    }

    /// Handles one input line. Utterances are followed by the brain's
    /// `ResponseReady`, failures by `ErrorAnnounced`.
    pub fn feed(&mut self, line: &str) -> Result<ReplTurn, SimError> {
        let mut turn = ReplTurn::default();
        let input = match parse_repl_line(line) {
            Ok(input) => input,
            Err(msg) => {
                turn.output.push(msg);
                return Ok(turn);
            }
        };
        match input {
            ReplInput::Empty => {}
            ReplInput::Help => turn.output.push(REPL_HELP.to_owned()),
            ReplInput::Quit => turn.quit = true,
            ReplInput::State => {
                let ctx = self.sim.context();
                turn.output.push(format!(
                    "state:{} media:{:?} interrupts:{}",
                    ctx.state(),
                    ctx.media(),
                    ctx.interrupt_depth()
                ));
            }
            ReplInput::Event(e) => self.run(ScriptedEvent::Dispatch(e), &mut turn.output)?,
            ReplInput::Utterance(text) => {
                self.run(
                    ScriptedEvent::Dispatch(Event::TranscriptReady(text)),
                    &mut turn.output,
                )?;
                if self.sim.context().state() == AssistantState::Busy
                    && self.sim.pending_response().is_some()
                {
                    self.run(ScriptedEvent::BrainResponse, &mut turn.output)?;
                }
            }
            ReplInput::Fail(msg) => {
                self.run(
                    ScriptedEvent::Dispatch(Event::RecognitionFailed(msg)),
                    &mut turn.output,
                )?;
                if self.sim.context().state() == AssistantState::Error {
                    self.run(
                        ScriptedEvent::Dispatch(Event::ErrorAnnounced),
                        &mut turn.output,
                    )?;
                }
            }
        }
        Ok(turn)
    }

    pub fn report(&self) -> SimReport {
        self.sim.report()
    }

    /// The scenario that replays this session event for event.
    pub fn as_scenario(&self) -> Scenario {
        Scenario {
            entries: self.script.clone(),
            base_dir: None,
        }
    }
}
