//! Fall monitoring on top of the classifier and the drone link.
//!
//! * [`fsm`]: the pure state machine (`step`, window voting).
//! * [`presence`]: frame-difference presence gating and frame scorers.
//! * [`alert`]: alert records, the JSON-lines log and webhooks.
//! * [`monitor`]: the threaded pipeline that drives the machine.
//! * [`http`]: an optional HTTP endpoint for user answers.

pub mod alert;
pub mod config;
pub mod fsm;
pub mod http;
pub mod monitor;
pub mod presence;
pub mod scenario;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use alert::{dispatch_alert, AlertRecord, AlertSinks, DeliveryReport, SinkOutcome};
pub use config::SentinelConfig;
pub use fsm::{
    classify_window, complete_alarm, is_legal, step, Action, Decision, EventKind, FrameRef, Machine, MonitorEvent,
    Response, StateKind, Transition, Trigger,
};
pub use http::ResponseListener;
pub use monitor::{run_monitor, Injector, Monitor, MonitorOptions, MonitorSummary, Notice};
pub use presence::{presence_score, BrightnessStub, FrameScorer, ModelScorer, PresenceGate};

#[derive(Debug, Error)]
pub enum SentinelError {
    #[error("invalid monitor configuration: {0}")]
    Config(String),
    #[error("cannot write alert log {path}: {source}")]
    AlertLog { path: PathBuf, source: io::Error },
    #[error("frame scoring failed: {0}")]
    Model(String),
    #[error("response listener: {0}")]
    Listener(String),
}
