use std::fmt::Write as _;
use std::path::Path;

use crate::assistant::{kasper_table, Action, AssistantContext, AssistantState, Dispatch, Event};
use crate::audio::{detect_hotword, frame_signal, AudioSignal, HotwordTemplate};
use crate::brain::{Brain, QueryResponse};
use crate::fsm::TransitionTable;
use crate::media::MediaStatus;

use super::scenario::{quote, Scenario, ScriptedEvent};
use super::SimError;

/// Anything that can answer a `CallBrain`.
pub trait BrainClient {
    fn query(&self, text: &str) -> Result<QueryResponse, String>;
}

impl BrainClient for Brain {
    fn query(&self, text: &str) -> Result<QueryResponse, String> {
        self.answer(text).map_err(|e| e.to_string())
    }
}

/// Watches every dispatch for breaches of the assistant's runtime rules.
#[derive(Debug)]
struct InvariantChecker {
    table: TransitionTable<AssistantState>,
    recognizer_on: bool,
    busy_detector_on: bool,
    trace_seen: u64,
    pause_outstanding: bool,
    violations: Vec<String>,
}

impl InvariantChecker {
    fn new() -> Self {
        Self {
            table: kasper_table(),
            recognizer_on: false,
            busy_detector_on: false,
            trace_seen: 0,
            pause_outstanding: false,
            violations: Vec::new(),
        }
    }

    fn check(&mut self, at_ms: u64, d: &Dispatch, depth_before: usize, ctx: &AssistantContext) {
        let mut fail = |msg: String| self.violations.push(format!("t={at_ms} {msg}"));
        let state = ctx.state();
        let depth = ctx.interrupt_depth();
        let entered = |s: AssistantState| d.to == s && (d.from != s || depth > depth_before);

        for a in &d.actions {
            match a {
                Action::StartRecognizer => {
                    if !entered(AssistantState::Recognizing) {
                        fail("StartRecognizer outside entry to Recognizing".into());
                    }
                    if self.recognizer_on {
                        fail("recognizer started twice".into());
                    }
                    self.recognizer_on = true;
                }
                Action::StopRecognizer => self.recognizer_on = false,
                Action::StartBusyHotwordDetector => self.busy_detector_on = true,
                Action::StopBusyHotwordDetector => self.busy_detector_on = false,
                Action::PauseMedia if depth > depth_before => self.pause_outstanding = true,
                Action::ResumeMedia => {
                    if !self.pause_outstanding {
                        fail("ResumeMedia without a pending interrupt pause".into());
                    }
                    if state != AssistantState::Idle {
                        fail(format!("ResumeMedia while {state}"));
                    }
                    self.pause_outstanding = false;
                }
                _ => {}
            }
        }

        if self.recognizer_on != (state == AssistantState::Recognizing) {
            fail(format!(
                "recognizer active={} in {state}",
                self.recognizer_on
            ));
        }
        if self.busy_detector_on != (state == AssistantState::Busy) {
            fail(format!(
                "second hotword detector active={} in {state}",
                self.busy_detector_on
            ));
        }

        let interrupted = d.from == AssistantState::Busy && d.to == AssistantState::Recognizing;
        match depth.cmp(&depth_before) {
            std::cmp::Ordering::Greater if !(interrupted && depth == depth_before + 1) => {
                fail(format!(
                    "interrupt stack grew {depth_before}->{depth} on {}->{}",
                    d.from, d.to
                ));
            }
            std::cmp::Ordering::Less if !(depth == 0 && state == AssistantState::Idle) => {
                fail(format!(
                    "interrupt stack shrank {depth_before}->{depth} in {state}"
                ));
            }
            _ => {}
        }
        if state == AssistantState::Idle && depth != 0 {
            fail(format!("idle with {depth} pending interrupts"));
        }
        if depth == 0 {
            self.pause_outstanding = false;
        }

        if !ctx.media().is_consistent() {
            fail(format!("media session inconsistent: {:?}", ctx.media()));
        }

        let total = ctx.machine().transitions_recorded();
        let fresh = (total - self.trace_seen) as usize;
        let trace = ctx.machine().trace();
        for r in trace.skip(ctx.machine().trace_len().saturating_sub(fresh)) {
            if !self.table.allows(r.from, r.to) {
                fail(format!("trace holds undeclared transition {r}"));
            }
        }
        self.trace_seen = total;
    }
}

/// Everything one simulator step produced.
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    pub lines: Vec<String>,
    pub dispatches: Vec<Dispatch>,
    pub responses: Vec<QueryResponse>,
}

/// Discrete-event driver around an [`AssistantContext`], on a virtual clock.
pub struct Simulator<'b> {
    ctx: AssistantContext,
    brain: Option<&'b dyn BrainClient>,
    clock_ms: u64,
    pending: Option<QueryResponse>,
    checker: InvariantChecker,
    event_log: Vec<String>,
    media_log: Vec<String>,
    spoken_log: Vec<String>,
}

impl<'b> Simulator<'b> {
    pub fn new(ctx: AssistantContext, brain: Option<&'b dyn BrainClient>) -> Self {
        Self {
            ctx,
            brain,
            clock_ms: 0,
            pending: None,
            checker: InvariantChecker::new(),
            event_log: Vec::new(),
            media_log: Vec::new(),
            spoken_log: Vec::new(),
        }
    }

    pub fn context(&self) -> &AssistantContext {
        &self.ctx
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn pending_response(&self) -> Option<&QueryResponse> {
        self.pending.as_ref()
    }

    pub fn violations(&self) -> &[String] {
        &self.checker.violations
    }

    /// Advances the clock to `at_ms` and runs one scripted event.
    pub fn step(
        &mut self,
        at_ms: u64,
        event: &ScriptedEvent,
        base_dir: Option<&Path>,
    ) -> Result<StepOutcome, SimError> {
        if at_ms < self.clock_ms {
            return Err(SimError::ClockWentBackwards {
                now: self.clock_ms,
                requested: at_ms,
            });
        }
        self.clock_ms = at_ms;
        let mut out = StepOutcome::default();
        match event {
            ScriptedEvent::Dispatch(e) => self.dispatch(e.clone(), &mut out)?,
            ScriptedEvent::BrainResponse => {
                let reply = self
                    .pending
                    .take()
                    .ok_or(SimError::BrainUnavailable { at_ms })?;
                let e = Event::ResponseReady {
                    intent: reply.intent,
                    text: reply.response,
                };
                self.dispatch(e, &mut out)?;
            }
            ScriptedEvent::AudioFixture { signal, template } => {
                let resolve = |p: &Path| match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.to_path_buf(),
                };
                let sig = AudioSignal::load(resolve(signal))?;
                let tmpl = HotwordTemplate::load(resolve(template))?;
                let frames = frame_signal(&sig)?;
                let hit = detect_hotword(&frames, &tmpl)?;
                let note = match hit {
                    Some(frame) => format!("t={at_ms} AudioFixture | hotword:frame {frame}"),
                    None => format!("t={at_ms} AudioFixture | hotword:none"),
                };
                self.event_log.push(note.clone());
                out.lines.push(note);
                if hit.is_some() {
                    self.dispatch(Event::HotwordDetected, &mut out)?;
                }
            }
        }
        Ok(out)
    }

    fn dispatch(&mut self, event: Event, out: &mut StepOutcome) -> Result<(), SimError> {
        let at = self.clock_ms;
        let depth_before = self.ctx.interrupt_depth();
        let d = self.ctx.handle_event(&event)?;
        self.checker.check(at, &d, depth_before, &self.ctx);
        let line = d.log_line(at, &event);
        self.event_log.push(line.clone());
        out.lines.push(line);

        for action in &d.actions {
            if action.is_media() {
                self.media_log.push(format!("t={at} {action}"));
            }
            match action {
                Action::CallBrain(text) => {
                    self.pending = None;
                    if let Some(brain) = self.brain {
                        let reply = brain.query(text).map_err(SimError::Brain)?;
                        out.responses.push(reply.clone());
                        self.pending = Some(reply);
                    }
                }
                Action::Speak(text) => self.spoken_log.push(format!("t={at} {}", quote(text))),
                _ => {}
            }
        }
        out.dispatches.push(d);
        Ok(())
    }

    pub fn report(&self) -> SimReport {
        let media = self.ctx.media();
        SimReport {
            events: self.event_log.clone(),
            media_log: self.media_log.clone(),
            spoken: self.spoken_log.clone(),
            final_state: self.ctx.state(),
            final_media: media.status(),
            final_track: media.track().map(str::to_owned),
            interrupt_depth: self.ctx.interrupt_depth(),
            violations: self.checker.violations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    pub events: Vec<String>,
    pub media_log: Vec<String>,
    pub spoken: Vec<String>,
    pub final_state: AssistantState,
    pub final_media: MediaStatus,
    pub final_track: Option<String>,
    pub interrupt_depth: usize,
    pub violations: Vec<String>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count_media(&self, action: &str) -> usize {
        self.media_log
            .iter()
            .filter(|l| l.split_once(' ').is_some_and(|(_, a)| a == action))
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |title: &str, lines: &[String]| {
            let _ = writeln!(out, "{title}:");
            for l in lines {
                let _ = writeln!(out, "  {l}");
            }
        };
        section("events", &self.events);
        section("media", &self.media_log);
        section("spoken", &self.spoken);
        let _ = writeln!(out, "final_state: {}", self.final_state);
        match &self.final_track {
            Some(track) => {
                let _ = writeln!(out, "final_media: {} {}", self.final_media, quote(track));
            }
            None => {
                let _ = writeln!(out, "final_media: {}", self.final_media);
            }
        }
        let _ = writeln!(out, "interrupt_depth: {}", self.interrupt_depth);
        if self.violations.is_empty() {
            let _ = writeln!(out, "violations: none");
        } else {
            let _ = writeln!(out, "violations:");
            for v in &self.violations {
                let _ = writeln!(out, "  {v}");
            }
        }
        out
    }
}

pub fn run_scenario(
    scenario: &Scenario,
    ctx: AssistantContext,
    brain: Option<&dyn BrainClient>,
) -> Result<SimReport, SimError> {
    let mut sim = Simulator::new(ctx, brain);
    for entry in &scenario.entries {
        sim.step(entry.at_ms, &entry.event, scenario.base_dir.as_deref())?;
    }
    Ok(sim.report())
}
