//! Generic finite-state-machine engine.
//!
//! A [`Machine`] is in exactly one state at a time and only moves along edges
//! listed in its [`TransitionTable`]. Each state may register an enter and an
//! exit hook; hooks receive a caller-supplied context (`C`) so they can emit
//! side effects without the machine owning them. A failing hook diverts the
//! machine into the table's error state with an [`Payload::ErrorInfo`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Debug, Display};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::MediaStatus;

/// Default number of trace records retained by a machine.
pub const DEFAULT_TRACE_CAPACITY: usize = 10_000;

/// Identifier type for machine states.
///
/// Every state set has a distinguished error state that any other state may
/// fall into, and a recovery state that is the only way out of it.
pub trait StateId: Copy + Eq + Ord + Hash + Debug + Display + Send + Sync + 'static {
    const ERROR: Self;
    const RECOVERY: Self;
}

/// Saved media status at the moment an in-flight response was interrupted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptContext {
    pub status: MediaStatus,
    pub track: Option<String>,
}

/// Data carried from one state to the next.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Payload {
    #[default]
    None,
    TranscriptText(String),
    ErrorInfo {
        code: String,
        message: String,
    },
    InterruptContext(InterruptContext),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    None,
    TranscriptText,
    ErrorInfo,
    InterruptContext,
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::None => PayloadKind::None,
            Payload::TranscriptText(_) => PayloadKind::TranscriptText,
            Payload::ErrorInfo { .. } => PayloadKind::ErrorInfo,
            Payload::InterruptContext(_) => PayloadKind::InterruptContext,
        }
    }

    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Self {
        Payload::ErrorInfo {
            code: code.into(),
            message: message.into(),
        }
    }

    fn check(&self) -> Result<(), &'static str> {
        match self {
            Payload::TranscriptText(text) if text.is_empty() => {
                Err("transcript payload must carry non-empty text")
            }
            Payload::InterruptContext(ctx)
                if !ctx.status.track_consistent(ctx.track.as_deref()) =>
            {
                Err("interrupt context track does not match media status")
            }
            _ => Ok(()),
        }
    }
}

impl Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PayloadKind::None => "None",
            PayloadKind::TranscriptText => "TranscriptText",
            PayloadKind::ErrorInfo => "ErrorInfo",
            PayloadKind::InterruptContext => "InterruptContext",
        };
        f.write_str(name)
    }
}

/// Permitted transitions, keyed by source state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTable<S: StateId> {
    allowed: BTreeMap<S, BTreeSet<S>>,
}

impl<S: StateId> Default for TransitionTable<S> {
    fn default() -> Self {
        Self {
            allowed: BTreeMap::new(),
        }
    }
}

impl<S: StateId> TransitionTable<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from `(from, [targets])` rows.
    pub fn from_rows<I, T>(rows: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        T: IntoIterator<Item = S>,
    {
        let mut table = Self::new();
        for (from, targets) in rows {
            table.add_state(from);
            for to in targets {
                table.allow(from, to);
            }
        }
        table
    }

    /// Registers `state` as a key with no outgoing edges (if not present).
    pub fn add_state(&mut self, state: S) -> &mut Self {
        self.allowed.entry(state).or_default();
        self
    }

    pub fn allow(&mut self, from: S, to: S) -> &mut Self {
        self.allowed.entry(from).or_default().insert(to);
        self
    }

    pub fn forbid(&mut self, from: S, to: S) -> &mut Self {
        if let Some(targets) = self.allowed.get_mut(&from) {
            targets.remove(&to);
        }
        self
    }

    pub fn allows(&self, from: S, to: S) -> bool {
        self.allowed.get(&from).is_some_and(|t| t.contains(&to))
    }

    pub fn contains(&self, state: S) -> bool {
        self.allowed.contains_key(&state)
    }

    pub fn targets(&self, from: S) -> impl Iterator<Item = S> + '_ {
        self.allowed.get(&from).into_iter().flatten().copied()
    }

    pub fn states(&self) -> impl Iterator<Item = S> + '_ {
        self.allowed.keys().copied()
    }
}

/// A broken [`TransitionTable`] rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableViolation<S> {
    /// The error state is not a key of the table.
    MissingErrorState,
    /// An edge points at a state that is not a key.
    UnknownTarget { from: S, to: S },
    /// A non-error state cannot fail into the error state.
    MissingErrorEdge(S),
    /// The error state's targets are not exactly the recovery state.
    ErrorMustOnlyGoIdle,
}

/// Checks the structural rules every machine table must satisfy. Returns one
/// record per broken rule; an empty list means the table is well-formed.
pub fn validate_table<S: StateId>(table: &TransitionTable<S>) -> Vec<TableViolation<S>> {
    let mut violations = Vec::new();
    if !table.contains(S::ERROR) {
        violations.push(TableViolation::MissingErrorState);
    }
    for (&from, targets) in &table.allowed {
        for &to in targets {
            if !table.contains(to) {
                violations.push(TableViolation::UnknownTarget { from, to });
            }
        }
    }
    for &state in table.allowed.keys() {
        if state != S::ERROR && !table.allows(state, S::ERROR) {
            violations.push(TableViolation::MissingErrorEdge(state));
        }
    }
    if let Some(targets) = table.allowed.get(&S::ERROR) {
        if targets.len() != 1 || !targets.contains(&S::RECOVERY) {
            violations.push(TableViolation::ErrorMustOnlyGoIdle);
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError<S: StateId> {
    #[error("initial state {0} is not in the state set")]
    UnknownInitialState(S),
    #[error("transition table keys do not match the state set")]
    TableKeyMismatch,
    #[error("state {0} is not declared in this machine")]
    UnknownState(S),
    #[error("transition {from} -> {to} is not permitted")]
    InvalidTransition { from: S, to: S },
    #[error("invalid payload: {0}")]
    InvalidPayload(&'static str),
    #[error("fatal hook failure in {state}: {message}")]
    FatalHookFailure { state: S, message: String },
}

/// Error returned by a state hook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HookError(pub String);

impl<T: Into<String>> From<T> for HookError {
    fn from(message: T) -> Self {
        HookError(message.into())
    }
}

/// What a hook sees when it runs. During an enter hook `current == to`;
/// during an exit hook `current == from`.
#[derive(Debug)]
pub struct HookCall<'a, S> {
    pub from: S,
    pub to: S,
    pub current: S,
    pub payload: &'a Payload,
}

pub type Hook<S, C> = Box<dyn FnMut(&mut C, &HookCall<'_, S>) -> Result<(), HookError> + Send>;

/// One applied transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord<S> {
    pub from: S,
    pub to: S,
    pub payload: Payload,
}

impl<S: Display> Display for TraceRecord<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} [{}]", self.from, self.to, self.payload.kind())
    }
}

/// Result of a permitted transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transitioned<S> {
    /// The machine is now in the requested state.
    Entered(S),
    /// A hook failed and the machine fell into the error state instead.
    Faulted { failed_in: S, message: String },
}

/// Read-only copy of a machine, safe to hand to other threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineSnapshot<S> {
    pub current: S,
    pub window_start: S,
    pub trace: Vec<TraceRecord<S>>,
}

struct Hooks<S, C> {
    enter: Option<Hook<S, C>>,
    exit: Option<Hook<S, C>>,
}

pub struct Machine<S: StateId, C = ()> {
    current: S,
    table: TransitionTable<S>,
    hooks: BTreeMap<S, Hooks<S, C>>,
    trace: VecDeque<TraceRecord<S>>,
    trace_capacity: usize,
    // state before the oldest retained record
    window_start: S,
    recorded: u64,
}

impl<S: StateId, C> Debug for Machine<S, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Machine")
            .field("current", &self.current)
            .field("table", &self.table)
            .field("trace_len", &self.trace.len())
            .finish_non_exhaustive()
    }
}

/// Builds a machine over `states` starting in `initial`. Hooks default to
/// no-ops until registered.
pub fn build_machine<S: StateId, C>(
    states: &BTreeSet<S>,
    table: TransitionTable<S>,
    initial: S,
) -> Result<Machine<S, C>, FsmError<S>> {
    if !states.contains(&initial) {
        return Err(FsmError::UnknownInitialState(initial));
    }
    if !table.states().eq(states.iter().copied()) {
        return Err(FsmError::TableKeyMismatch);
    }
    Ok(Machine {
        current: initial,
        hooks: states
            .iter()
            .map(|&s| {
                (
                    s,
                    Hooks {
                        enter: None,
                        exit: None,
                    },
                )
            })
            .collect(),
        table,
        trace: VecDeque::new(),
        trace_capacity: DEFAULT_TRACE_CAPACITY,
        window_start: initial,
        recorded: 0,
    })
}

impl<S: StateId, C> Machine<S, C> {
    pub fn current(&self) -> S {
        self.current
    }

    pub fn table(&self) -> &TransitionTable<S> {
        &self.table
    }

    pub fn trace(&self) -> impl ExactSizeIterator<Item = &TraceRecord<S>> + '_ {
        self.trace.iter()
    }

    pub fn trace_len(&self) -> usize {
        self.trace.len()
    }

    /// Transitions recorded since construction, including evicted ones.
    pub fn transitions_recorded(&self) -> u64 {
        self.recorded
    }

    /// State the retained trace window starts from.
    pub fn window_start(&self) -> S {
        self.window_start
    }

    pub fn with_trace_capacity(mut self, capacity: usize) -> Self {
        self.set_trace_capacity(capacity);
        self
    }

    pub fn set_trace_capacity(&mut self, capacity: usize) {
        self.trace_capacity = capacity.max(1);
        while self.trace.len() > self.trace_capacity {
            self.evict_oldest();
        }
    }

    pub fn on_enter<F>(&mut self, state: S, hook: F) -> Result<(), FsmError<S>>
    where
        F: FnMut(&mut C, &HookCall<'_, S>) -> Result<(), HookError> + Send + 'static,
    {
        let slot = self
            .hooks
            .get_mut(&state)
            .ok_or(FsmError::UnknownState(state))?;
        slot.enter = Some(Box::new(hook));
        Ok(())
    }

    pub fn on_exit<F>(&mut self, state: S, hook: F) -> Result<(), FsmError<S>>
    where
        F: FnMut(&mut C, &HookCall<'_, S>) -> Result<(), HookError> + Send + 'static,
    {
        let slot = self
            .hooks
            .get_mut(&state)
            .ok_or(FsmError::UnknownState(state))?;
        slot.exit = Some(Box::new(hook));
        Ok(())
    }

    pub fn snapshot(&self) -> MachineSnapshot<S> {
        MachineSnapshot {
            current: self.current,
            window_start: self.window_start,
            trace: self.trace.iter().cloned().collect(),
        }
    }

    /// Moves to `target`, running `exit(current)` then `enter(target)`.
    ///
    /// A refused transition leaves the machine untouched. A failing hook
    /// diverts into the error state; a failure while entering or leaving the
    /// error state itself is fatal.
    pub fn transition(
        &mut self,
        target: S,
        payload: Payload,
        ctx: &mut C,
    ) -> Result<Transitioned<S>, FsmError<S>> {
        if !self.table.contains(target) {
            return Err(FsmError::UnknownState(target));
        }
        let from = self.current;
        if !self.table.allows(from, target) {
            return Err(FsmError::InvalidTransition { from, to: target });
        }
        payload.check().map_err(FsmError::InvalidPayload)?;

        if let Err(HookError(message)) = self.run_exit(ctx, from, target, &payload) {
            if from == S::ERROR {
                return Err(FsmError::FatalHookFailure {
                    state: from,
                    message,
                });
            }
            return self.fault(ctx, from, format!("exit hook of {from} failed: {message}"));
        }

        self.current = target;
        self.push_record(from, target, payload.clone());

        if let Err(HookError(message)) = self.run_enter(ctx, from, target, &payload) {
            if target == S::ERROR {
                return Err(FsmError::FatalHookFailure {
                    state: target,
                    message,
                });
            }
            let message = format!("enter hook of {target} failed: {message}");
            let fault = Payload::error("hook_failure", message.clone());
            if let Err(HookError(second)) = self.run_exit(ctx, target, S::ERROR, &fault) {
                log::warn!("exit hook of {target} failed while faulting: {second}");
            }
            return self.enter_error(ctx, target, message, fault);
        }
        Ok(Transitioned::Entered(target))
    }

    fn fault(
        &mut self,
        ctx: &mut C,
        failed_in: S,
        message: String,
    ) -> Result<Transitioned<S>, FsmError<S>> {
        let fault = Payload::error("hook_failure", message.clone());
        self.enter_error(ctx, failed_in, message, fault)
    }

    fn enter_error(
        &mut self,
        ctx: &mut C,
        failed_in: S,
        message: String,
        fault: Payload,
    ) -> Result<Transitioned<S>, FsmError<S>> {
        self.current = S::ERROR;
        self.push_record(failed_in, S::ERROR, fault.clone());
        if let Err(HookError(fatal)) = self.run_enter(ctx, failed_in, S::ERROR, &fault) {
            return Err(FsmError::FatalHookFailure {
                state: S::ERROR,
                message: fatal,
            });
        }
        Ok(Transitioned::Faulted { failed_in, message })
    }

    fn run_enter(
        &mut self,
        ctx: &mut C,
        from: S,
        to: S,
        payload: &Payload,
    ) -> Result<(), HookError> {
        let call = HookCall {
            from,
            to,
            current: self.current,
            payload,
        };
        match self.hooks.get_mut(&to).and_then(|h| h.enter.as_mut()) {
            Some(hook) => hook(ctx, &call),
            None => Ok(()),
        }
    }

    fn run_exit(
        &mut self,
        ctx: &mut C,
        from: S,
        to: S,
        payload: &Payload,
    ) -> Result<(), HookError> {
        let call = HookCall {
            from,
            to,
            current: self.current,
            payload,
        };
        match self.hooks.get_mut(&from).and_then(|h| h.exit.as_mut()) {
            Some(hook) => hook(ctx, &call),
            None => Ok(()),
        }
    }

    fn push_record(&mut self, from: S, to: S, payload: Payload) {
        if self.trace.len() == self.trace_capacity {
            self.evict_oldest();
        }
        self.trace.push_back(TraceRecord { from, to, payload });
        self.recorded += 1;
    }

    fn evict_oldest(&mut self) {
        if let Some(oldest) = self.trace.pop_front() {
            self.window_start = oldest.to;
        }
    }
}

/// Re-applies `records` to a hook-less machine that starts in `start`.
pub fn replay<S: StateId>(
    table: &TransitionTable<S>,
    start: S,
    records: &[TraceRecord<S>],
) -> Result<Machine<S, ()>, FsmError<S>> {
    let states: BTreeSet<S> = table.states().collect();
    let mut machine = build_machine(&states, table.clone(), start)?
        .with_trace_capacity(records.len().max(DEFAULT_TRACE_CAPACITY));
    for record in records {
        if record.from != machine.current() {
            return Err(FsmError::InvalidTransition {
                from: machine.current(),
                to: record.to,
            });
        }
        machine.transition(record.to, record.payload.clone(), &mut ())?;
    }
    Ok(machine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
    enum Light {
        Off,
        On,
        Blink,
        Broken,
    }

    impl Display for Light {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            Debug::fmt(self, f)
        }
    }

    impl StateId for Light {
        const ERROR: Self = Light::Broken;
        const RECOVERY: Self = Light::Off;
    }

    fn all() -> BTreeSet<Light> {
        [Light::Off, Light::On, Light::Blink, Light::Broken].into()
    }

    fn table() -> TransitionTable<Light> {
        TransitionTable::from_rows([
            (Light::Off, vec![Light::On, Light::Broken]),
            (Light::On, vec![Light::Off, Light::Blink, Light::Broken]),
            (Light::Blink, vec![Light::On, Light::Broken]),
            (Light::Broken, vec![Light::Off]),
        ])
    }

    fn machine() -> Machine<Light, Vec<String>> {
        build_machine(&all(), table(), Light::Off).unwrap()
    }

    #[test]
    fn build_rejects_unknown_initial() {
        let states: BTreeSet<_> = [Light::Off, Light::On, Light::Broken].into();
        let t = TransitionTable::from_rows([
            (Light::Off, vec![Light::On, Light::Broken]),
            (Light::On, vec![Light::Broken]),
            (Light::Broken, vec![Light::Off]),
        ]);
        let err = build_machine::<_, ()>(&states, t, Light::Blink).unwrap_err();
        assert_eq!(err, FsmError::UnknownInitialState(Light::Blink));
    }

    #[test]
    fn build_rejects_key_mismatch() {
        let states: BTreeSet<_> = [Light::Off, Light::Broken].into();
        let err = build_machine::<_, ()>(&states, table(), Light::Off).unwrap_err();
        assert_eq!(err, FsmError::TableKeyMismatch);
    }

    #[test]
    fn build_echoes_initial() {
        let m: Machine<Light> = build_machine(&all(), table(), Light::Blink).unwrap();
        assert_eq!(m.current(), Light::Blink);
        assert_eq!(m.trace_len(), 0);
    }

    #[test]
    fn validate_flags_each_rule() {
        assert!(validate_table(&table()).is_empty());

        let mut t = table();
        t.forbid(Light::Blink, Light::Broken);
        assert_eq!(
            validate_table(&t),
            vec![TableViolation::MissingErrorEdge(Light::Blink)]
        );

        let mut t = table();
        t.allow(Light::Broken, Light::On);
        assert_eq!(
            validate_table(&t),
            vec![TableViolation::ErrorMustOnlyGoIdle]
        );

        let t = TransitionTable::from_rows([(Light::Off, vec![Light::On])]);
        let v = validate_table(&t);
        assert!(v.contains(&TableViolation::MissingErrorState));
        assert!(v.contains(&TableViolation::UnknownTarget {
            from: Light::Off,
            to: Light::On
        }));
        assert!(v.contains(&TableViolation::MissingErrorEdge(Light::Off)));
    }

    #[test]
    fn hooks_run_exit_then_enter_with_new_current() {
        let mut m = machine();
        m.on_exit(Light::Off, |log: &mut Vec<String>, call| {
            log.push(format!("exit {} (current {})", call.from, call.current));
            Ok(())
        })
        .unwrap();
        m.on_enter(Light::On, |log: &mut Vec<String>, call| {
            log.push(format!("enter {} (current {})", call.to, call.current));
            Ok(())
        })
        .unwrap();
        let mut log = Vec::new();
        let out = m.transition(Light::On, Payload::None, &mut log).unwrap();
        assert_eq!(out, Transitioned::Entered(Light::On));
        assert_eq!(log, ["exit Off (current Off)", "enter On (current On)"]);
        assert_eq!(m.trace().next().unwrap().to_string(), "Off -> On [None]");
    }

    #[test]
    fn refused_transition_leaves_machine_unchanged() {
        let mut m = machine();
        m.transition(Light::On, Payload::None, &mut Vec::new())
            .unwrap();
        let before = m.snapshot();
        let err = m
            .transition(Light::On, Payload::None, &mut Vec::new())
            .unwrap_err();
        assert_eq!(
            err,
            FsmError::InvalidTransition {
                from: Light::On,
                to: Light::On
            }
        );
        assert_eq!(m.snapshot(), before);
    }

    #[test]
    fn empty_transcript_payload_is_rejected() {
        let mut m = machine();
        let err = m
            .transition(
                Light::On,
                Payload::TranscriptText(String::new()),
                &mut Vec::new(),
            )
            .unwrap_err();
        assert!(matches!(err, FsmError::InvalidPayload(_)));
        assert_eq!(m.current(), Light::Off);
    }

    #[test]
    fn enter_failure_falls_into_error_state() {
        let mut m = machine();
        m.on_enter(Light::On, |_: &mut Vec<String>, _| Err("bulb blew".into()))
            .unwrap();
        m.on_enter(Light::Broken, |log: &mut Vec<String>, call| {
            if let Payload::ErrorInfo { message, .. } = call.payload {
                log.push(message.clone());
            }
            Ok(())
        })
        .unwrap();
        let mut log = Vec::new();
        let out = m.transition(Light::On, Payload::None, &mut log).unwrap();
        assert!(matches!(
            out,
            Transitioned::Faulted {
                failed_in: Light::On,
                ..
            }
        ));
        assert_eq!(m.current(), Light::Broken);
        let lines: Vec<_> = m.trace().map(ToString::to_string).collect();
        assert_eq!(lines, ["Off -> On [None]", "On -> Broken [ErrorInfo]"]);
        assert_eq!(log, ["enter hook of On failed: bulb blew"]);
    }

    #[test]
    fn exit_failure_falls_into_error_state_without_entering_target() {
        let mut m = machine();
        let entered = Arc::new(Mutex::new(false));
        let flag = entered.clone();
        m.on_exit(Light::Off, |_: &mut Vec<String>, _| Err("stuck".into()))
            .unwrap();
        m.on_enter(Light::On, move |_, _| {
            *flag.lock().unwrap() = true;
            Ok(())
        })
        .unwrap();
        m.transition(Light::On, Payload::None, &mut Vec::new())
            .unwrap();
        assert_eq!(m.current(), Light::Broken);
        assert!(!*entered.lock().unwrap());
    }

    #[test]
    fn error_enter_failure_is_fatal() {
        let mut m = machine();
        m.on_enter(Light::Broken, |_: &mut Vec<String>, _| {
            Err("speaker dead".into())
        })
        .unwrap();
        let err = m
            .transition(Light::Broken, Payload::error("x", "y"), &mut Vec::new())
            .unwrap_err();
        assert!(matches!(
            err,
            FsmError::FatalHookFailure {
                state: Light::Broken,
                ..
            }
        ));
    }

    #[test]
    fn ring_trace_keeps_replayable_window() {
        let mut m = machine().with_trace_capacity(3);
        let mut log = Vec::new();
        for target in [Light::On, Light::Blink, Light::On, Light::Off, Light::On] {
            m.transition(target, Payload::None, &mut log).unwrap();
        }
        assert_eq!(m.trace_len(), 3);
        assert_eq!(m.window_start(), Light::Blink);
        let snap = m.snapshot();
        let replayed = replay(m.table(), snap.window_start, &snap.trace).unwrap();
        assert_eq!(replayed.current(), m.current());
        assert_eq!(replayed.snapshot().trace, snap.trace);
    }
}
