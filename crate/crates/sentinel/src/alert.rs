//! Alert records, the JSON-lines log and webhook delivery.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::fsm::{AlarmDraft, Transition, Trigger};
use crate::SentinelError;

pub const WEBHOOK_TIMEOUT: Duration = Duration::from_secs(5);
/// Attempts per webhook: the first try and one retry.
pub const WEBHOOK_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertRecord {
    pub timestamp: DateTime<Utc>,
    pub trigger: Trigger,
    /// `null` when no probability was recorded.
    pub probability: Option<f64>,
    pub state_trace: Vec<Transition>,
    pub frame_ref: Option<String>,
}

impl AlertRecord {
    /// Builds the record; the evidence frame path comes from the draft, or
    /// from `saved_frame` when the frame image was written to disk.
    pub fn from_draft(draft: &AlarmDraft, timestamp: DateTime<Utc>, saved_frame: Option<&Path>) -> Self {
        let frame_ref = saved_frame
            .map(|p| p.display().to_string())
            .or_else(|| draft.evidence.as_ref().map(|f| f.origin.clone()));
        AlertRecord {
            timestamp,
            trigger: draft.trigger,
            probability: draft.probability.is_finite().then_some(draft.probability),
            state_trace: draft.trace.clone(),
            frame_ref,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("alert records always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkOutcome {
    pub url: String,
    pub delivered: bool,
    pub attempts: u32,
    /// Last failure, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryReport {
    pub log_path: PathBuf,
    pub webhooks: Vec<SinkOutcome>,
}

impl DeliveryReport {
    /// True when webhooks are configured and none accepted the alert.
    pub fn total_failure(&self) -> bool {
        !self.webhooks.is_empty() && self.webhooks.iter().all(|w| !w.delivered)
    }
}

/// Where alerts go: the log (mandatory) and webhooks in order.
#[derive(Debug, Clone)]
pub struct AlertSinks {
    pub log_path: PathBuf,
    pub webhooks: Vec<String>,
    pub timeout: Duration,
}

impl AlertSinks {
    pub fn new(log_path: impl Into<PathBuf>, webhooks: Vec<String>) -> Self {
        AlertSinks {
            log_path: log_path.into(),
            webhooks,
            timeout: WEBHOOK_TIMEOUT,
        }
    }
}

/// Appends one line to the log. Errors here are never swallowed.
pub fn append_alert_log(path: &Path, record: &AlertRecord) -> Result<(), SentinelError> {
    let mut line = record.to_json_line();
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| SentinelError::AlertLog {
            path: path.to_path_buf(),
            source,
        })?;
    file.write_all(line.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|source| SentinelError::AlertLog {
            path: path.to_path_buf(),
            source,
        })
}

fn post_once(agent: &ureq::Agent, url: &str, body: &str) -> Result<(), String> {
    agent
        .post(url)
        .header("Content-Type", "application/json")
        .send(body)
        .map(|_| ())
        .map_err(|e| e.to_string())
}

/// Logs the record, then POSTs it to every webhook with one retry each.
pub fn dispatch_alert(record: &AlertRecord, sinks: &AlertSinks) -> Result<DeliveryReport, SentinelError> {
    append_alert_log(&sinks.log_path, record)?;
    let body = record.to_json_line();
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(sinks.timeout))
        .build()
        .into();
    let webhooks = sinks
        .webhooks
        .iter()
        .map(|url| {
            let mut outcome = SinkOutcome {
                url: url.clone(),
                delivered: false,
                attempts: 0,
                error: None,
            };
            while outcome.attempts < WEBHOOK_ATTEMPTS && !outcome.delivered {
                outcome.attempts += 1;
                match post_once(&agent, url, &body) {
                    Ok(()) => {
                        outcome.delivered = true;
                        outcome.error = None;
                    }
                    Err(e) => {
                        log::warn!("webhook {url} attempt {}: {e}", outcome.attempts);
                        outcome.error = Some(e);
                    }
                }
            }
            outcome
        })
        .collect();
    let report = DeliveryReport {
        log_path: sinks.log_path.clone(),
        webhooks,
    };
    if report.total_failure() {
        log::error!(
            "alert logged to {} but no webhook accepted it",
            sinks.log_path.display()
        );
    }
    Ok(report)
}
