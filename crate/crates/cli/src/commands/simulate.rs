use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use clap::Args;
use fallwatch_link::{LinkError, MockConfig, MockDrone};

use super::interrupt_on_ctrlc;
use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Command, state and video ports as `C,S,V`.
    #[arg(long, value_name = "C,S,V")]
    pub ports: Option<String>,
    #[arg(long)]
    pub command_port: Option<u16>,
    /// Client port telemetry is pushed to.
    #[arg(long)]
    pub state_port: Option<u16>,
    /// Client port video is streamed to.
    #[arg(long)]
    pub video_port: Option<u16>,
    /// Folder of NetPBM frames streamed after `streamon`.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Per-packet loss probability.
    #[arg(long)]
    pub loss: Option<f64>,
    /// Battery levels over time, e.g. `100@0s,20@300s`.
    #[arg(long)]
    pub battery: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many seconds; 0 runs until interrupted.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulateSettings {
    pub mock: MockConfig,
    pub duration: f64,
}

impl Settings for SimulateSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "duration" => self.duration = parse_value(key, value)?,
            _ => self.mock.set(key, value).map_err(|e| e.to_string())?,
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.mock;
        vec![
            ("host", m.host.to_string()),
            ("command_port", m.command_port.to_string()),
            ("state_port", m.state_port.to_string()),
            ("video_port", m.video_port.to_string()),
            (
                "replay_dir",
                m.replay_dir
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            ("fps", m.fps.to_string()),
            ("loss", m.loss.to_string()),
            ("battery", m.battery.to_string()),
            ("seed", m.seed.to_string()),
            ("duration", self.duration.to_string()),
        ]
    }
}

pub fn resolve(args: &SimulateArgs) -> Result<SimulateSettings, CliError> {
    let mut s: SimulateSettings = config::load(args.config.config.as_deref())?;
    let mut set = |k: &str, v: String| s.set(k, &v).map_err(CliError::usage);
    if let Some(p) = &args.ports {
        let parts: Vec<&str> = p.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::usage(format!("--ports expects C,S,V, got {p:?}")));
        }
        set("command_port", parts[0].into())?;
        set("state_port", parts[1].into())?;
        set("video_port", parts[2].into())?;
    }
    if let Some(v) = args.command_port {
        set("command_port", v.to_string())?;
    }
    if let Some(v) = args.state_port {
        set("state_port", v.to_string())?;
    }
    if let Some(v) = args.video_port {
        set("video_port", v.to_string())?;
    }
    if let Some(v) = &args.replay {
        set("replay_dir", v.display().to_string())?;
    }
    if let Some(v) = args.fps {
        set("fps", v.to_string())?;
    }
    if let Some(v) = args.loss {
        set("loss", v.to_string())?;
    }
    if let Some(v) = &args.battery {
        set("battery", v.clone())?;
    }
    if let Some(v) = args.seed {
        set("seed", v.to_string())?;
    }
    if let Some(v) = args.duration {
        set("duration", v.to_string())?;
    }
    s.mock.validate().map_err(|e| CliError::usage(e.to_string()))?;
    if !(s.duration >= 0.0 && s.duration.is_finite()) {
        return Err(CliError::usage("--duration must be non-negative"));
    }
    Ok(s)
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let s = resolve(args)?;
    print!("{}", config::render("simulate", &s));
    let mut drone = MockDrone::start(s.mock.clone()).map_err(|e| match e {
        LinkError::Config(m) => CliError::usage(m),
        other => CliError::io(other.to_string()),
    })?;
    println!("mock drone listening on {}", drone.command_addr());
    println!("replaying {} frames", drone.replay_len());
    let _ = std::io::stdout().flush();

    let stop = Arc::new(AtomicBool::new(false));
    interrupt_on_ctrlc(Arc::clone(&stop));
    let started = Instant::now();
    let limit = (s.duration > 0.0).then(|| Duration::from_secs_f64(s.duration));
    while !stop.load(Ordering::SeqCst) && limit.is_none_or(|l| started.elapsed() < l) {
        thread::sleep(Duration::from_millis(50));
    }
    let frames = drone.frames_sent();
    let log = drone.stop();
    println!("command log ({} commands):", log.len());
    for line in &log {
        println!("  {line}");
    }
    println!("frames sent: {frames}");
    Ok(())
}
