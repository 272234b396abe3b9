use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use clap::{Args, ValueEnum};
use fallwatch_link::client::{DEFAULT_COMMAND_TIMEOUT, VIDEO_PORT};
use fallwatch_link::{
    CommandChannel, DirectoryReplay, FrameSource, MockConfig, MockDrone, MockWire, TelloClient, VideoReceiver,
};
use fallwatch_sentinel::{
    BrightnessStub, FrameScorer, Injector, ModelScorer, Monitor, MonitorOptions, Notice, Response, ResponseListener,
    SentinelConfig,
};

use super::{interrupt_on_ctrlc, load_model, opt_path, path_or_none};
use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg};

/// `--model` value selecting the mean-brightness stand-in model.
pub const BRIGHTNESS_STUB: &str = "brightness-stub";
const VIDEO_QUEUE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    /// Start an in-process mock drone streaming `--replay`.
    Mock,
    /// Read `--replay` directly at `--fps`.
    Replay,
    /// Connect to a drone or simulator at `--drone`.
    Drone,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Mock => "mock",
            Source::Replay => "replay",
            Source::Drone => "drone",
        }
    }
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Checkpoint path, or `brightness-stub`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub source: Option<Source>,
    /// Frame folder for the mock and replay sources.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Drone command address.
    #[arg(long)]
    pub drone: Option<SocketAddr>,
    /// Local port for drone video.
    #[arg(long)]
    pub video_port: Option<u16>,
    /// Mock packet loss probability.
    #[arg(long)]
    pub loss: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fall_threshold_high: Option<f64>,
    #[arg(long)]
    pub fall_threshold_low: Option<f64>,
    #[arg(long)]
    pub presence_threshold: Option<f64>,
    #[arg(long)]
    pub debounce_frames: Option<usize>,
    /// Seconds to wait for an answer before alarming.
    #[arg(long)]
    pub prompt_timeout: Option<f64>,
    /// Comma-separated webhook URLs, called in order.
    #[arg(long)]
    pub contacts: Option<String>,
    #[arg(long)]
    pub alert_log: Option<PathBuf>,
    /// Folder for alarm evidence frames.
    #[arg(long)]
    pub evidence_dir: Option<PathBuf>,
    /// Accept `POST {"response":"yes"|"no"}` on this address.
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    /// Read yes/no answers from standard input.
    #[arg(long)]
    pub stdin: Option<bool>,
    #[arg(long)]
    pub frame_queue: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSettings {
    pub model: String,
    pub source: Source,
    pub replay: Option<PathBuf>,
    pub fps: f64,
    pub drone: SocketAddr,
    pub video_port: u16,
    pub loss: f64,
    pub seed: u64,
    pub sentinel: SentinelConfig,
    pub evidence_dir: Option<PathBuf>,
    pub listen: Option<SocketAddr>,
    pub stdin: bool,
    pub frame_queue: usize,
}

impl Default for MonitorSettings {
    fn default() -> Self {
        MonitorSettings {
            model: String::new(),
            source: Source::Mock,
            replay: None,
            fps: 30.0,
            drone: "192.168.10.1:8889".parse().expect("valid address"),
            video_port: VIDEO_PORT,
            loss: 0.0,
            seed: 0,
            sentinel: SentinelConfig::default(),
            evidence_dir: None,
            listen: None,
            stdin: true,
            frame_queue: MonitorOptions::default().frame_queue,
        }
    }
}

fn split_contacts(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl Settings for MonitorSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let c = &mut self.sentinel;
        match key {
            "model" => self.model = value.to_string(),
            "source" => self.source = Source::from_str(value, true).map_err(|e| format!("source: {e}"))?,
            "replay" => self.replay = path_or_none(value),
            "fps" => self.fps = parse_value(key, value)?,
            "drone" => self.drone = parse_value(key, value)?,
            "video_port" => self.video_port = parse_value(key, value)?,
            "loss" => self.loss = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "fall_threshold_high" => c.fall_threshold_high = parse_value(key, value)?,
            "fall_threshold_low" => c.fall_threshold_low = parse_value(key, value)?,
            "presence_threshold" => c.presence_threshold = parse_value(key, value)?,
            "debounce_frames" => c.debounce_frames = parse_value(key, value)?,
            "prompt_timeout" => {
                let secs: f64 = parse_value(key, value)?;
                c.prompt_timeout = Duration::try_from_secs_f64(secs).map_err(|e| format!("prompt_timeout: {e}"))?;
            }
            "contacts" => c.contacts = split_contacts(value),
            "alert_log" => c.alert_log_path = PathBuf::from(value),
            "evidence_dir" => self.evidence_dir = path_or_none(value),
            "listen" => {
                self.listen = if value.is_empty() {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "stdin" => self.stdin = parse_value(key, value)?,
            "frame_queue" => self.frame_queue = parse_value(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let c = &self.sentinel;
        vec![
            ("model", self.model.clone()),
            ("source", self.source.as_str().into()),
            ("replay", opt_path(&self.replay)),
            ("fps", self.fps.to_string()),
            ("drone", self.drone.to_string()),
            ("video_port", self.video_port.to_string()),
            ("loss", self.loss.to_string()),
            ("seed", self.seed.to_string()),
            ("fall_threshold_high", c.fall_threshold_high.to_string()),
            ("fall_threshold_low", c.fall_threshold_low.to_string()),
            ("presence_threshold", c.presence_threshold.to_string()),
            ("debounce_frames", c.debounce_frames.to_string()),
            ("prompt_timeout", c.prompt_timeout.as_secs_f64().to_string()),
            ("contacts", c.contacts.join(",")),
            ("alert_log", c.alert_log_path.display().to_string()),
            ("evidence_dir", opt_path(&self.evidence_dir)),
            ("listen", self.listen.map(|a| a.to_string()).unwrap_or_default()),
            ("stdin", self.stdin.to_string()),
            ("frame_queue", self.frame_queue.to_string()),
        ]
    }
}

pub fn resolve(args: &MonitorArgs) -> Result<MonitorSettings, CliError> {
    let mut s: MonitorSettings = config::load(args.config.config.as_deref())?;
    let mut set = |k: &str, v: Option<String>| match v {
        Some(v) => s.set(k, &v).map_err(CliError::usage),
        None => Ok(()),
    };
    let text = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
    set("model", args.model.clone())?;
    set("source", args.source.map(|v| v.as_str().to_string()))?;
    set("replay", text(&args.replay))?;
    set("fps", args.fps.map(|v| v.to_string()))?;
    set("drone", args.drone.map(|v| v.to_string()))?;
    set("video_port", args.video_port.map(|v| v.to_string()))?;
    set("loss", args.loss.map(|v| v.to_string()))?;
    set("seed", args.seed.map(|v| v.to_string()))?;
    set("fall_threshold_high", args.fall_threshold_high.map(|v| v.to_string()))?;
    set("fall_threshold_low", args.fall_threshold_low.map(|v| v.to_string()))?;
    set("presence_threshold", args.presence_threshold.map(|v| v.to_string()))?;
    set("debounce_frames", args.debounce_frames.map(|v| v.to_string()))?;
    set("prompt_timeout", args.prompt_timeout.map(|v| v.to_string()))?;
    set("contacts", args.contacts.clone())?;
    set("alert_log", text(&args.alert_log))?;
    set("evidence_dir", text(&args.evidence_dir))?;
    set("listen", args.listen.map(|v| v.to_string()))?;
    set("stdin", args.stdin.map(|v| v.to_string()))?;
    set("frame_queue", args.frame_queue.map(|v| v.to_string()))?;

    s.sentinel.validate().map_err(|e| CliError::usage(e.to_string()))?;
    if s.model.is_empty() {
        return Err(CliError::usage(format!(
            "--model is required (a checkpoint or {BRIGHTNESS_STUB})"
        )));
    }
    if !(s.fps > 0.0 && s.fps.is_finite()) {
        return Err(CliError::usage("--fps must be positive"));
    }
    if !(0.0..=1.0).contains(&s.loss) {
        return Err(CliError::usage("--loss must be in [0, 1]"));
    }
    if s.frame_queue < 1 {
        return Err(CliError::usage("--frame-queue must be at least 1"));
    }
    if matches!(s.source, Source::Mock | Source::Replay) && s.replay.is_none() {
        return Err(CliError::usage(format!(
            "--replay is required for --source {}",
            s.source.as_str()
        )));
    }
    Ok(s)
}

/// A live frame source plus whatever must stay alive alongside it.
struct Opened {
    source: Box<dyn FrameSource>,
    channel: Option<TelloClient>,
    drone: Option<MockDrone>,
}

fn handshake(client: &mut TelloClient, what: &str) -> Result<(), CliError> {
    for cmd in ["command", "streamon"] {
        let r = client.send(cmd).map_err(|e| CliError::io(format!("{what}: {e}")))?;
        if !r.is_ok() {
            return Err(CliError::io(format!("{what} did not accept {cmd:?}: {:?}", r.response)));
        }
    }
    Ok(())
}

fn open_source(s: &MonitorSettings) -> Result<Opened, CliError> {
    match s.source {
        Source::Replay => {
            let dir = s.replay.as_ref().expect("checked in resolve");
            let replay = DirectoryReplay::open(dir, s.fps).map_err(|e| CliError::io(e.to_string()))?;
            Ok(Opened {
                source: Box::new(replay),
                channel: None,
                drone: None,
            })
        }
        Source::Mock => {
            let rx = VideoReceiver::bind("127.0.0.1:0".parse().expect("valid"), VIDEO_QUEUE)
                .map_err(|e| CliError::io(e.to_string()))?;
            let drone = MockDrone::start(MockConfig {
                command_port: 0,
                state_port: 0,
                video_port: rx.local_addr().port(),
                replay_dir: s.replay.clone(),
                fps: s.fps,
                loss: s.loss,
                seed: s.seed,
                ..Default::default()
            })
            .map_err(|e| CliError::io(e.to_string()))?;
            if drone.replay_len() == 0 {
                let dir = s.replay.as_ref().expect("checked in resolve");
                return Err(CliError::io(format!("{}: no frames to replay", dir.display())));
            }
            let mut client = TelloClient::connect(drone.command_addr(), Duration::from_secs(2))
                .map_err(|e| CliError::io(e.to_string()))?;
            handshake(&mut client, "mock drone")?;
            Ok(Opened {
                source: Box::new(MockWire::new(rx)),
                channel: Some(client),
                drone: Some(drone),
            })
        }
        Source::Drone => {
            let rx = VideoReceiver::bind(SocketAddr::from(([0, 0, 0, 0], s.video_port)), VIDEO_QUEUE)
                .map_err(|e| CliError::io(e.to_string()))?;
            let mut client =
                TelloClient::connect(s.drone, DEFAULT_COMMAND_TIMEOUT).map_err(|e| CliError::io(e.to_string()))?;
            handshake(&mut client, &format!("drone at {}", s.drone))?;
            Ok(Opened {
                source: Box::new(MockWire::new(rx)),
                channel: Some(client),
                drone: None,
            })
        }
    }
}

fn read_answers(injector: Injector) {
    thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            match line.parse::<Response>() {
                Ok(r) => {
                    if !injector.respond(r) {
                        break;
                    }
                }
                Err(e) => eprintln!("{e}"),
            }
        }
    });
}

fn show(notice: &Notice) {
    match notice {
        Notice::Transition(t) => println!("[{:>9.3}s] {} -> {}", t.at_ms as f64 / 1000.0, t.from, t.to),
        Notice::Prompt { deadline } => println!(
            "prompt: a fall may have happened. Do you need help? Answer yes or no (deadline {:.1}s)",
            deadline.as_secs_f64()
        ),
        Notice::Reposition { ack } => match ack {
            Some(r) => println!("reposition: drone answered {:?}", r.text().unwrap_or("")),
            None => println!("reposition: no acknowledgement, continuing"),
        },
        Notice::Alert { record, report } => {
            println!(
                "alert: trigger={} probability={} frame={}",
                record.trigger,
                record
                    .probability
                    .map(|p| format!("{p:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                record.frame_ref.as_deref().unwrap_or("-")
            );
            for w in &report.webhooks {
                println!(
                    "alert: webhook {} delivered={} attempts={}",
                    w.url, w.delivered, w.attempts
                );
            }
            if report.total_failure() {
                println!("alert: no contact could be reached; see {}", report.log_path.display());
            }
        }
        Notice::Ignored { state, event } => log::info!("{event} ignored in {state}"),
    }
    let _ = std::io::stdout().flush();
}

pub fn run(args: &MonitorArgs) -> Result<(), CliError> {
    let s = resolve(args)?;
    print!("{}", config::render("monitor", &s));

    let mut scorer: Box<dyn FrameScorer> = if s.model == BRIGHTNESS_STUB {
        Box::new(BrightnessStub)
    } else {
        Box::new(ModelScorer::new(load_model(s.model.as_ref())?))
    };
    let mut opened = open_source(&s)?;
    let options = MonitorOptions {
        frame_queue: s.frame_queue,
        evidence_dir: s.evidence_dir.clone(),
        ..Default::default()
    };
    let monitor = Monitor::new(s.sentinel.clone(), options).map_err(|e| CliError::usage(e.to_string()))?;
    let _listener = match s.listen {
        Some(addr) => {
            let l = ResponseListener::start(addr, monitor.injector()).map_err(|e| CliError::io(e.to_string()))?;
            println!("listening for answers on http://{}", l.local_addr());
            Some(l)
        }
        None => None,
    };
    if s.stdin {
        read_answers(monitor.injector());
    }
    interrupt_on_ctrlc(monitor.interrupt_flag());
    println!("monitoring ({} source)", s.source.as_str());
    let _ = std::io::stdout().flush();

    let channel = opened.channel.as_mut().map(|c| c as &mut dyn CommandChannel);
    let summary = monitor
        .run(opened.source.as_mut(), scorer.as_mut(), channel, show)
        .map_err(|e| CliError::io(e.to_string()))?;
    if let Some(mut drone) = opened.drone.take() {
        println!("mock drone command log: {}", drone.stop().join(", "));
    }
    println!("summary: {summary}");
    Ok(())
}
