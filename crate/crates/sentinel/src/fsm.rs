//! Pure transition function of the monitor.
//!
//! ```text
//! Scanning       + frame with presence ≥ θ     → Assessing
//! Assessing      + frame, window full:  Fall   → PromptingHelp  (prompt, arm timer)
//!                                       NoFall → Scanning
//!                                    Uncertain → Repositioning  (move)
//! Assessing      + fall-band frame, not full   → FallSuspected
//! FallSuspected  + frame                       → as Assessing
//! Repositioning  + RepositionComplete          → Assessing
//! PromptingHelp  + UserResponse(no)            → Scanning
//! PromptingHelp  + UserResponse(yes)           → Alarming       (dispatch)
//! PromptingHelp  + Timeout at/after deadline   → Alarming       (dispatch)
//! Alarming       --complete_alarm-->             Scanning
//! ```
//!
//! Every other (state, event) pair leaves the machine unchanged.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use fallwatch::Tensor;
use serde::{Deserialize, Serialize};

use crate::config::SentinelConfig;

/// Transitions kept for alert records.
pub const TRACE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    Scanning,
    Assessing,
    FallSuspected,
    PromptingHelp,
    Alarming,
    Repositioning,
}

impl StateKind {
    pub const ALL: [StateKind; 6] = [
        StateKind::Scanning,
        StateKind::Assessing,
        StateKind::FallSuspected,
        StateKind::PromptingHelp,
        StateKind::Alarming,
        StateKind::Repositioning,
    ];
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Yes,
    No,
}

impl std::str::FromStr for Response {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(Response::Yes),
            "no" | "n" => Ok(Response::No),
            other => Err(format!("expected yes or no, got {other:?}")),
        }
    }
}

/// A frame and its image, kept as alarm evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRef {
    pub origin: String,
    pub image: Option<Arc<Tensor<f32>>>,
}

impl FrameRef {
    pub fn named(origin: impl Into<String>) -> Self {
        FrameRef {
            origin: origin.into(),
            image: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MonitorEvent {
    FrameScored {
        probability: f64,
        presence: f64,
        timestamp: Duration,
        frame: FrameRef,
    },
    UserResponse(Response),
    Timeout,
    RepositionComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    FrameScored,
    UserResponse,
    Timeout,
    RepositionComplete,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::FrameScored,
        EventKind::UserResponse,
        EventKind::Timeout,
        EventKind::RepositionComplete,
    ];
}

impl MonitorEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            MonitorEvent::FrameScored { .. } => EventKind::FrameScored,
            MonitorEvent::UserResponse(_) => EventKind::UserResponse,
            MonitorEvent::Timeout => EventKind::Timeout,
            MonitorEvent::RepositionComplete => EventKind::RepositionComplete,
        }
    }
}

/// Whether `kind` can ever change a machine in `state`.
pub fn is_legal(state: StateKind, kind: EventKind) -> bool {
    use EventKind as E;
    use StateKind as S;
    matches!(
        (state, kind),
        (S::Scanning, E::FrameScored)
            | (S::Assessing | S::FallSuspected, E::FrameScored)
            | (S::PromptingHelp, E::UserResponse | E::Timeout)
            | (S::Repositioning, E::RepositionComplete)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trigger {
    #[serde(rename = "user-confirmed")]
    UserConfirmed,
    #[serde(rename = "no-answer")]
    NoAnswer,
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trigger::UserConfirmed => "user-confirmed",
            Trigger::NoAnswer => "no-answer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Transition {
    pub from: StateKind,
    pub to: StateKind,
    /// Monitor time of the transition, in milliseconds.
    pub at_ms: u64,
}

/// Everything an alert needs, produced on entering Alarming.
#[derive(Debug, Clone, PartialEq)]
pub struct AlarmDraft {
    pub trigger: Trigger,
    pub probability: f64,
    pub trace: Vec<Transition>,
    pub evidence: Option<FrameRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    EmitPrompt { deadline: Duration },
    ArmTimer { deadline: Duration },
    Reposition,
    DispatchAlert(AlarmDraft),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    NoFall,
    Fall,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowDecision {
    pub decision: Decision,
    /// The window was not yet full; `decision` is `NoFall` by convention.
    pub pending: bool,
}

/// Votes over the newest `debounce_frames` probabilities.
pub fn classify_window(recent: &[f64], config: &SentinelConfig) -> WindowDecision {
    let n = config.debounce_frames;
    if recent.len() < n {
        return WindowDecision {
            decision: Decision::NoFall,
            pending: true,
        };
    }
    let window = &recent[recent.len() - n..];
    let decision = if window.iter().all(|&p| p >= config.fall_threshold_high) {
        Decision::Fall
    } else if window.iter().all(|&p| p <= config.fall_threshold_low) {
        Decision::NoFall
    } else {
        Decision::Uncertain
    };
    WindowDecision {
        decision,
        pending: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub state: StateKind,
    pub entered_at: Duration,
    /// Set exactly while in PromptingHelp.
    pub deadline: Option<Duration>,
    window: Vec<f64>,
    /// Probability and frame of the decision that raised the prompt.
    suspect: Option<(f64, FrameRef)>,
    trace: VecDeque<Transition>,
    transitions: u64,
}

impl Default for Machine {
    fn default() -> Self {
        Machine::new(Duration::ZERO)
    }
}

impl Machine {
    pub fn new(now: Duration) -> Self {
        Machine {
            state: StateKind::Scanning,
            entered_at: now,
            deadline: None,
            window: Vec::new(),
            suspect: None,
            trace: VecDeque::new(),
            transitions: 0,
        }
    }

    /// A machine parked in `state`, for table tests. PromptingHelp gets a
    /// deadline of `now + 1 s`.
    pub fn in_state(state: StateKind, now: Duration) -> Self {
        let mut m = Machine::new(now);
        m.state = state;
        if state == StateKind::PromptingHelp {
            m.deadline = Some(now + Duration::from_secs(1));
            m.suspect = Some((1.0, FrameRef::named("fixture")));
        }
        m
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn trace(&self) -> impl Iterator<Item = &Transition> {
        self.trace.iter()
    }

    /// Transitions made since construction.
    pub fn transition_count(&self) -> u64 {
        self.transitions
    }

    /// Transitions made after `earlier`, a previous version of this machine.
    pub fn transitions_since(&self, earlier: &Machine) -> Vec<Transition> {
        let n = (self.transitions - earlier.transitions.min(self.transitions)) as usize;
        let skip = self.trace.len().saturating_sub(n);
        self.trace.iter().skip(skip).copied().collect()
    }

    fn go(&mut self, to: StateKind, now: Duration) {
        self.trace.push_back(Transition {
            from: self.state,
            to,
            at_ms: now.as_millis() as u64,
        });
        while self.trace.len() > TRACE_LEN {
            self.trace.pop_front();
        }
        self.transitions += 1;
        self.state = to;
        self.entered_at = now;
        self.deadline = None;
        if matches!(to, StateKind::Assessing | StateKind::Scanning) {
            self.window.clear();
        }
        if to == StateKind::Scanning {
            self.suspect = None;
        }
    }

    fn alarm(&mut self, trigger: Trigger, now: Duration) -> Action {
        self.go(StateKind::Alarming, now);
        let (probability, evidence) = match self.suspect.take() {
            Some((p, f)) => (p, Some(f)),
            None => (f64::NAN, None),
        };
        Action::DispatchAlert(AlarmDraft {
            trigger,
            probability,
            trace: self.trace.iter().copied().collect(),
            evidence,
        })
    }

    fn assess(&mut self, probability: f64, frame: &FrameRef, config: &SentinelConfig, now: Duration) -> Vec<Action> {
        self.window.push(probability);
        let d = classify_window(&self.window, config);
        if d.pending {
            if self.state == StateKind::Assessing && probability >= config.fall_threshold_high {
                self.go(StateKind::FallSuspected, now);
            }
            return Vec::new();
        }
        match d.decision {
            Decision::Fall => {
                let deadline = now + config.prompt_timeout;
                self.suspect = Some((probability, frame.clone()));
                self.go(StateKind::PromptingHelp, now);
                self.deadline = Some(deadline);
                vec![Action::EmitPrompt { deadline }, Action::ArmTimer { deadline }]
            }
            Decision::NoFall => {
                self.go(StateKind::Scanning, now);
                Vec::new()
            }
            Decision::Uncertain => {
                self.go(StateKind::Repositioning, now);
                vec![Action::Reposition]
            }
        }
    }
}

/// Next machine and the actions to perform. Illegal pairs return an
/// unchanged machine and no actions.
pub fn step(machine: &Machine, event: &MonitorEvent, config: &SentinelConfig, now: Duration) -> (Machine, Vec<Action>) {
    use StateKind as S;
    let mut m = machine.clone();
    let actions = match (machine.state, event) {
        (
            S::Scanning,
            MonitorEvent::FrameScored {
                probability,
                presence,
                frame,
                ..
            },
        ) => {
            if *presence >= config.presence_threshold {
                m.go(S::Assessing, now);
                m.assess(*probability, frame, config, now)
            } else {
                Vec::new()
            }
        }
        (S::Assessing | S::FallSuspected, MonitorEvent::FrameScored { probability, frame, .. }) => {
            m.assess(*probability, frame, config, now)
        }
        (S::Repositioning, MonitorEvent::RepositionComplete) => {
            m.go(S::Assessing, now);
            Vec::new()
        }
        (S::PromptingHelp, MonitorEvent::UserResponse(Response::No)) => {
            m.go(S::Scanning, now);
            Vec::new()
        }
        (S::PromptingHelp, MonitorEvent::UserResponse(Response::Yes)) => vec![m.alarm(Trigger::UserConfirmed, now)],
        (S::PromptingHelp, MonitorEvent::Timeout) if machine.deadline.is_some_and(|d| now >= d) => {
            vec![m.alarm(Trigger::NoAnswer, now)]
        }
        _ => return (m, Vec::new()),
    };
    (m, actions)
}

/// Leaves Alarming once the alert has been dispatched.
pub fn complete_alarm(machine: &Machine, now: Duration) -> Machine {
    let mut m = machine.clone();
    if m.state == StateKind::Alarming {
        m.go(StateKind::Scanning, now);
    }
    m
}
