//! Scripted frame sequences for demos and end-to-end checks.
//!
//! Frames are uniform grey levels, so [`crate::BrightnessStub`] maps them
//! straight to probabilities: dark below the fall band, bright above it,
//! medium inside the uncertain band.

use std::fs;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use fallwatch::dataset::encode_ppm;
use fallwatch::Tensor;
use fallwatch_link::{FrameSource, TimedFrame};

pub const DARK: f32 = 0.2;
pub const MEDIUM: f32 = 0.5;
pub const BRIGHT: f32 = 0.9;

/// Runs of `(grey level, frame count)`.
pub type Script = Vec<(f32, usize)>;

/// 20 quiet frames, then 30 fall frames.
pub fn fall_script() -> Script {
    vec![(DARK, 20), (BRIGHT, 30)]
}

pub fn quiet_script() -> Script {
    vec![(DARK, 50)]
}

/// One uncertain window between quiet runs.
pub fn uncertain_script() -> Script {
    vec![(DARK, 20), (MEDIUM, 5), (DARK, 20)]
}

pub fn script_by_name(name: &str) -> Option<Script> {
    match name {
        "fall" => Some(fall_script()),
        "quiet" => Some(quiet_script()),
        "uncertain" => Some(uncertain_script()),
        _ => None,
    }
}

pub fn script_frames(script: &[(f32, usize)], side: usize) -> Vec<Tensor<f32>> {
    script
        .iter()
        .flat_map(|&(level, n)| std::iter::repeat_n(level, n))
        .map(|level| Tensor::full(&[side, side, 3], level).expect("side is positive"))
        .collect()
}

/// Writes the script as numbered P6 files; returns the frame count.
pub fn write_script(dir: impl AsRef<Path>, script: &[(f32, usize)], side: usize) -> io::Result<usize> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let frames = script_frames(script, side);
    for (i, f) in frames.iter().enumerate() {
        let bytes = encode_ppm(f).map_err(|e| io::Error::other(e.to_string()))?;
        fs::write(dir.join(format!("{i:05}.ppm")), bytes)?;
    }
    Ok(frames.len())
}

/// In-memory frames at a fixed period.
pub struct ScriptedSource {
    frames: std::vec::IntoIter<Tensor<f32>>,
    period: Duration,
    start: Instant,
    seq: u64,
    stop: Arc<AtomicBool>,
}

impl ScriptedSource {
    pub fn new(frames: Vec<Tensor<f32>>, period: Duration) -> Self {
        ScriptedSource {
            frames: frames.into_iter(),
            period,
            start: Instant::now(),
            seq: 0,
            stop: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn from_script(script: &[(f32, usize)], side: usize, period: Duration) -> Self {
        Self::new(script_frames(script, side), period)
    }
}

impl FrameSource for ScriptedSource {
    fn next_frame(&mut self) -> Option<TimedFrame> {
        if self.stop.load(Ordering::Relaxed) {
            return None;
        }
        let image = self.frames.next()?;
        let due = self.period * self.seq as u32;
        if let Some(wait) = due.checked_sub(self.start.elapsed()) {
            thread::sleep(wait);
        }
        let frame = TimedFrame {
            seq: self.seq,
            timestamp: self.start.elapsed(),
            image,
            origin: format!("script:{}", self.seq),
        };
        self.seq += 1;
        Some(frame)
    }

    fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }
}
