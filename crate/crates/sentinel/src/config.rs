use std::path::PathBuf;
use std::time::Duration;

use crate::SentinelError;

#[derive(Debug, Clone, PartialEq)]
pub struct SentinelConfig {
    pub fall_threshold_high: f64,
    pub fall_threshold_low: f64,
    /// Mean absolute frame difference that wakes the classifier.
    pub presence_threshold: f64,
    pub debounce_frames: usize,
    pub prompt_timeout: Duration,
    /// Webhooks, POSTed in order.
    pub contacts: Vec<String>,
    pub alert_log_path: PathBuf,
}

impl Default for SentinelConfig {
    fn default() -> Self {
        SentinelConfig {
            fall_threshold_high: 0.65,
            fall_threshold_low: 0.35,
            presence_threshold: 0.02,
            debounce_frames: 5,
            prompt_timeout: Duration::from_secs(30),
            contacts: Vec::new(),
            alert_log_path: PathBuf::from("alerts.jsonl"),
        }
    }
}

impl SentinelConfig {
    pub fn validate(&self) -> Result<(), SentinelError> {
        let (lo, hi) = (self.fall_threshold_low, self.fall_threshold_high);
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(SentinelError::Config(format!(
                "thresholds must satisfy 0 <= low < high <= 1, got low {lo}, high {hi}"
            )));
        }
        if !(self.presence_threshold >= 0.0 && self.presence_threshold.is_finite()) {
            return Err(SentinelError::Config(format!(
                "presence threshold must be non-negative, got {}",
                self.presence_threshold
            )));
        }
        if self.debounce_frames < 1 {
            return Err(SentinelError::Config("debounce frames must be at least 1".into()));
        }
        if self.prompt_timeout.is_zero() {
            return Err(SentinelError::Config("prompt timeout must be positive".into()));
        }
        Ok(())
    }
}
