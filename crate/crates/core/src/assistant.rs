//! The assistant's own state machine: four states, hotword-driven dispatch,
//! and a second hotword detector that stays live while a response is being
//! delivered so a new query can interrupt it (pausing and later resuming any
//! music that was playing).

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::fsm::{
    build_machine, FsmError, InterruptContext, Machine, Payload, StateId, TransitionTable,
    Transitioned,
};
use crate::intent::IntentClass;
use crate::media::{MediaSession, MediaStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssistantState {
    Idle,
    Recognizing,
    Busy,
    Error,
}

impl AssistantState {
    pub const ALL: [AssistantState; 4] = [
        AssistantState::Idle,
        AssistantState::Recognizing,
        AssistantState::Busy,
        AssistantState::Error,
    ];
}

impl fmt::Display for AssistantState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl StateId for AssistantState {
    const ERROR: Self = AssistantState::Error;
    const RECOVERY: Self = AssistantState::Idle;
}

/// Permitted edges. Busy -> Recognizing is the interrupt edge.
pub fn kasper_table() -> TransitionTable<AssistantState> {
    use AssistantState::*;
    TransitionTable::from_rows([
        (Idle, vec![Recognizing, Error]),
        (Recognizing, vec![Busy, Idle, Error]),
        (Busy, vec![Idle, Recognizing, Error]),
        (Error, vec![Idle]),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MediaCommand {
    Play(String),
    Pause,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    HotwordDetected,
    WakeButtonPressed,
    TranscriptReady(String),
    RecognitionFailed(String),
    ResponseReady { intent: IntentClass, text: String },
    ResponseSpoken,
    QueryFailed(String),
    ErrorAnnounced,
    MediaCommand(MediaCommand),
}

impl Event {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Event::HotwordDetected => "HotwordDetected",
            Event::WakeButtonPressed => "WakeButtonPressed",
            Event::TranscriptReady(_) => "TranscriptReady",
            Event::RecognitionFailed(_) => "RecognitionFailed",
            Event::ResponseReady { .. } => "ResponseReady",
            Event::ResponseSpoken => "ResponseSpoken",
            Event::QueryFailed(_) => "QueryFailed",
            Event::ErrorAnnounced => "ErrorAnnounced",
            Event::MediaCommand(_) => "MediaCommand",
        }
    }
}

/// Side effect requested by the dispatcher. The caller executes these; they
/// never feed back into dispatch synchronously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    StartRecognizer,
    StopRecognizer,
    StartBusyHotwordDetector,
    StopBusyHotwordDetector,
    CallBrain(String),
    Speak(String),
    PauseMedia,
    ResumeMedia,
    PlayMedia(String),
    StopMedia,
}

impl Action {
    pub fn is_media(&self) -> bool {
        matches!(
            self,
            Action::PauseMedia | Action::ResumeMedia | Action::PlayMedia(_) | Action::StopMedia
        )
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::StartRecognizer => f.write_str("StartRecognizer"),
            Action::StopRecognizer => f.write_str("StopRecognizer"),
            Action::StartBusyHotwordDetector => f.write_str("StartBusyHotwordDetector"),
            Action::StopBusyHotwordDetector => f.write_str("StopBusyHotwordDetector"),
            Action::CallBrain(text) => write!(f, "CallBrain({text:?})"),
            Action::Speak(text) => write!(f, "Speak({text:?})"),
            Action::PauseMedia => f.write_str("PauseMedia"),
            Action::ResumeMedia => f.write_str("ResumeMedia"),
            Action::PlayMedia(track) => write!(f, "PlayMedia({track:?})"),
            Action::StopMedia => f.write_str("StopMedia"),
        }
    }
}

pub const ERROR_TEMPLATE_PREFIX: &str = "Sorry, something went wrong: ";

pub fn error_message(detail: &str) -> String {
    format!("{ERROR_TEMPLATE_PREFIX}{detail}")
}

#[derive(Debug, Error)]
pub enum AssistantError {
    #[error("interrupt requested while not busy (state {0})")]
    NotBusy(AssistantState),
    #[error(transparent)]
    Fsm(#[from] FsmError<AssistantState>),
}

/// Outcome of dispatching one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub from: AssistantState,
    pub to: AssistantState,
    pub actions: Vec<Action>,
    /// The (state, event) pair has no rule and was dropped.
    pub ignored: bool,
}

impl Dispatch {
    /// `t=<ms> <EventKind> | state:<From>-><To> | actions:[...]`
    pub fn log_line(&self, at_ms: u64, event: &Event) -> String {
        let actions: Vec<String> = self.actions.iter().map(ToString::to_string).collect();
        format!(
            "t={at_ms} {} | state:{}->{} | actions:[{}]",
            event.kind_name(),
            self.from,
            self.to,
            actions.join(", ")
        )
    }
}

type ActionHook = fn(&mut Vec<Action>, &Payload);

pub struct AssistantContext {
    machine: Machine<AssistantState, Vec<Action>>,
    media: MediaSession,
    interrupts: Vec<InterruptContext>,
    user_paused: bool,
    spoken: Vec<String>,
}

impl fmt::Debug for AssistantContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AssistantContext")
            .field("state", &self.machine.current())
            .field("media", &self.media)
            .field("interrupts", &self.interrupts)
            .field("user_paused", &self.user_paused)
            .finish_non_exhaustive()
    }
}

impl Default for AssistantContext {
    fn default() -> Self {
        Self::new()
    }
}

impl AssistantContext {
    /// Fresh context in Idle with media stopped.
    pub fn new() -> Self {
        use AssistantState::*;
        let states: BTreeSet<_> = AssistantState::ALL.into();
        let mut machine: Machine<AssistantState, Vec<Action>> =
            build_machine(&states, kasper_table(), Idle).expect("kasper table is well-formed");

        let hooks: [(AssistantState, bool, ActionHook); 5] = [
            (Recognizing, true, |out, _| {
                out.push(Action::StartRecognizer)
            }),
            (Recognizing, false, |out, _| {
                out.push(Action::StopRecognizer)
            }),
            (Busy, true, |out, payload| {
                if let Payload::TranscriptText(text) = payload {
                    out.push(Action::CallBrain(text.clone()));
                }
                out.push(Action::StartBusyHotwordDetector);
            }),
            (Busy, false, |out, _| {
                out.push(Action::StopBusyHotwordDetector)
            }),
            (Error, true, |out, payload| {
                let detail = match payload {
                    Payload::ErrorInfo { message, .. } => message.as_str(),
                    _ => "unknown error",
                };
                out.push(Action::Speak(error_message(detail)));
            }),
        ];
        for (state, enter, hook) in hooks {
            let run = move |out: &mut Vec<Action>,
                            call: &crate::fsm::HookCall<'_, AssistantState>| {
                hook(out, call.payload);
                Ok(())
            };
            let registered = if enter {
                machine.on_enter(state, run)
            } else {
                machine.on_exit(state, run)
            };
            registered.expect("state is declared");
        }

        Self {
            machine,
            media: MediaSession::stopped(),
            interrupts: Vec::new(),
            user_paused: false,
            spoken: Vec::new(),
        }
    }

    pub fn state(&self) -> AssistantState {
        self.machine.current()
    }

    pub fn machine(&self) -> &Machine<AssistantState, Vec<Action>> {
        &self.machine
    }

    pub fn media(&self) -> &MediaSession {
        &self.media
    }

    pub fn interrupt_depth(&self) -> usize {
        self.interrupts.len()
    }

    pub fn interrupts(&self) -> &[InterruptContext] {
        &self.interrupts
    }

    pub fn user_paused(&self) -> bool {
        self.user_paused
    }

    pub fn spoken(&self) -> &[String] {
        &self.spoken
    }

    /// Dispatches one event. Pairs with no rule are dropped with a warning
    /// and leave the context untouched.
    pub fn handle_event(&mut self, event: &Event) -> Result<Dispatch, AssistantError> {
        use AssistantState::*;
        let from = self.state();
        let mut actions = Vec::new();
        let handled = match (from, event) {
            (Idle, Event::HotwordDetected | Event::WakeButtonPressed) => {
                self.go(Recognizing, Payload::None, &mut actions)?;
                true
            }
            (Recognizing, Event::TranscriptReady(text)) if !text.trim().is_empty() => {
                self.go(Busy, Payload::TranscriptText(text.clone()), &mut actions)?;
                true
            }
            (Recognizing, Event::RecognitionFailed(message)) => {
                self.go(
                    Error,
                    Payload::error("recognition_failed", message.clone()),
                    &mut actions,
                )?;
                true
            }
            (Busy, Event::ResponseReady { text, .. }) => {
                actions.push(Action::Speak(text.clone()));
                true
            }
            (Busy, Event::ResponseSpoken) => {
                self.go(Idle, Payload::None, &mut actions)?;
                self.unwind_interrupts(&mut actions);
                true
            }
            (Busy, Event::HotwordDetected | Event::WakeButtonPressed) => {
                actions = self.interrupt_busy()?;
                true
            }
            (Busy, Event::QueryFailed(message)) => {
                self.go(
                    Error,
                    Payload::error("query_failed", message.clone()),
                    &mut actions,
                )?;
                true
            }
            (Error, Event::ErrorAnnounced) => {
                self.go(Idle, Payload::None, &mut actions)?;
                self.unwind_interrupts(&mut actions);
                true
            }
            (Idle | Busy, Event::MediaCommand(command)) => {
                self.apply_media(command, &mut actions);
                true
            }
            _ => false,
        };
        if !handled {
            log::warn!("dropping {} in state {from}", event.kind_name());
        }
        self.record_spoken(&actions);
        Ok(Dispatch {
            from,
            to: self.state(),
            actions,
            ignored: !handled,
        })
    }

    /// Interrupts an in-flight response: saves the media status, pauses
    /// playing music and goes back to recognizing.
    pub fn interrupt_busy(&mut self) -> Result<Vec<Action>, AssistantError> {
        let state = self.state();
        if state != AssistantState::Busy {
            return Err(AssistantError::NotBusy(state));
        }
        let saved = InterruptContext {
            status: self.media.status(),
            track: self.media.track().map(str::to_owned),
        };
        let mut actions = Vec::new();
        if self.media.pause() {
            actions.push(Action::PauseMedia);
        }
        self.interrupts.push(saved.clone());
        self.go(
            AssistantState::Recognizing,
            Payload::InterruptContext(saved),
            &mut actions,
        )?;
        Ok(actions)
    }

    fn go(
        &mut self,
        target: AssistantState,
        payload: Payload,
        actions: &mut Vec<Action>,
    ) -> Result<(), AssistantError> {
        if let Transitioned::Faulted { failed_in, message } =
            self.machine.transition(target, payload, actions)?
        {
            log::error!("hook failure in {failed_in}: {message}");
        }
        Ok(())
    }

    /// Back in Idle every pending interrupt is resolved; music that an
    /// interrupt paused resumes unless the user took over playback since.
    fn unwind_interrupts(&mut self, actions: &mut Vec<Action>) {
        let paused_by_interrupt = self
            .interrupts
            .drain(..)
            .any(|ctx| ctx.status == MediaStatus::Playing);
        if paused_by_interrupt && !self.user_paused && self.media.resume() {
            actions.push(Action::ResumeMedia);
        }
    }

    fn apply_media(&mut self, command: &MediaCommand, actions: &mut Vec<Action>) {
        match command {
            MediaCommand::Play(track) => {
                self.media = MediaSession::playing(track.clone());
                self.user_paused = false;
                actions.push(Action::PlayMedia(track.clone()));
            }
            MediaCommand::Pause => {
                if self.media.status() != MediaStatus::Stopped {
                    self.user_paused = true;
                }
                if self.media.pause() {
                    actions.push(Action::PauseMedia);
                }
            }
            MediaCommand::Stop => {
                self.user_paused = false;
                if self.media.stop() {
                    actions.push(Action::StopMedia);
                }
            }
        }
    }

    fn record_spoken(&mut self, actions: &[Action]) {
        for action in actions {
            if let Action::Speak(text) = action {
                self.spoken.push(text.clone());
            }
        }
    }
}
