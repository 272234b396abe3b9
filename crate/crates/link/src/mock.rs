//! Protocol-compatible stand-in for the drone.
//!
//! The mock answers text commands on its command port and learns the
//! client's IP from the first datagram. From then on it pushes a telemetry
//! line to `client:state_port` at 10 Hz, and on `streamon` it sends the
//! replay frames (raw NetPBM bytes) to `client:video_port` as video packets
//! at the configured rate, finishing with a stream-end marker.
//!
//! Config file, one `key = value` per line, `#` comments:
//!
//! ```text
//! host = 127.0.0.1
//! command_port = 8889
//! state_port = 8890
//! video_port = 11111
//! replay_dir = frames/
//! fps = 30
//! loss = 0.0
//! battery = 100@0s,50@60s
//! seed = 0
//! ```

use std::fmt;
use std::fs;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use fallwatch::dataset::load_netpbm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::client::{COMMAND_PORT, STATE_PORT, VIDEO_PORT};
use crate::protocol::{fragment, StreamEnd};
use crate::LinkError;

pub const TELEMETRY_PERIOD: Duration = Duration::from_millis(100);
const POLL: Duration = Duration::from_millis(20);
const FLIGHT_HEIGHT_CM: i32 = 80;

/// Piecewise-linear battery level over time, written `100@0s,50@60s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryScript {
    points: Vec<(f64, f64)>,
}

impl BatteryScript {
    pub fn constant(percent: u8) -> Self {
        BatteryScript {
            points: vec![(0.0, f64::from(percent.min(100)))],
        }
    }

    pub fn percent_at(&self, t: Duration) -> u8 {
        let t = t.as_secs_f64();
        let p = &self.points;
        let level = match p.iter().position(|&(at, _)| at > t) {
            Some(0) => p[0].1,
            None => p[p.len() - 1].1,
            Some(i) => {
                let (t0, v0) = p[i - 1];
                let (t1, v1) = p[i];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        };
        level.round().clamp(0.0, 100.0) as u8
    }
}

impl Default for BatteryScript {
    fn default() -> Self {
        Self::constant(100)
    }
}

impl FromStr for BatteryScript {
    type Err = LinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| LinkError::Config(format!("battery script {s:?}: {why}"));
        let mut points = Vec::new();
        for item in s.split(',').map(str::trim) {
            let (level, at) = item.split_once('@').ok_or_else(|| bad("expected PERCENT@SECONDSs"))?;
            let level: u8 = level.trim().parse().map_err(|_| bad("percent must be an integer"))?;
            if level > 100 {
                return Err(bad("percent above 100"));
            }
            let at = at.trim();
            let at: f64 = at
                .strip_suffix('s')
                .unwrap_or(at)
                .parse()
                .map_err(|_| bad("bad time"))?;
            if !(at >= 0.0 && at.is_finite()) {
                return Err(bad("time must be non-negative"));
            }
            if points.last().is_some_and(|&(prev, _)| at <= prev) {
                return Err(bad("times must increase"));
            }
            points.push((at, f64::from(level)));
        }
        Ok(BatteryScript { points })
    }
}

impl fmt::Display for BatteryScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.points.iter().map(|(t, v)| format!("{v}@{t}s")).collect();
        f.write_str(&items.join(","))
    }
}

/// Elapsed-time source for the battery script.
#[derive(Debug, Clone)]
pub enum MockClock {
    Real(Instant),
    Manual(Arc<Mutex<Duration>>),
}

impl MockClock {
    pub fn real() -> Self {
        MockClock::Real(Instant::now())
    }

    pub fn manual() -> Self {
        MockClock::Manual(Arc::new(Mutex::new(Duration::ZERO)))
    }

    pub fn elapsed(&self) -> Duration {
        match self {
            MockClock::Real(start) => start.elapsed(),
            MockClock::Manual(t) => *t.lock().unwrap_or_else(|p| p.into_inner()),
        }
    }

    /// Moves a manual clock; a no-op on a real one.
    pub fn set(&self, t: Duration) {
        if let MockClock::Manual(m) = self {
            *m.lock().unwrap_or_else(|p| p.into_inner()) = t;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockConfig {
    pub host: IpAddr,
    pub command_port: u16,
    pub state_port: u16,
    pub video_port: u16,
    pub replay_dir: Option<PathBuf>,
    pub fps: f64,
    pub loss: f64,
    pub battery: BatteryScript,
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            command_port: COMMAND_PORT,
            state_port: STATE_PORT,
            video_port: VIDEO_PORT,
            replay_dir: None,
            fps: 30.0,
            loss: 0.0,
            battery: BatteryScript::default(),
            seed: 0,
        }
    }
}

impl MockConfig {
    /// Applies one `key`/`value` pair; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), LinkError> {
        let bad = || LinkError::Config(format!("{key}: invalid value {value:?}"));
        match key {
            "host" => self.host = value.parse().map_err(|_| bad())?,
            "command_port" => self.command_port = value.parse().map_err(|_| bad())?,
            "state_port" => self.state_port = value.parse().map_err(|_| bad())?,
            "video_port" => self.video_port = value.parse().map_err(|_| bad())?,
            "replay_dir" => self.replay_dir = Some(PathBuf::from(value)),
            "fps" => self.fps = value.parse().map_err(|_| bad())?,
            "loss" => self.loss = value.parse().map_err(|_| bad())?,
            "battery" => self.battery = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            other => return Err(LinkError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, LinkError> {
        let mut cfg = MockConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LinkError::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| LinkError::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LinkError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(LinkError::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(LinkError::Config(format!("loss must be in [0, 1], got {}", self.loss)));
        }
        Ok(())
    }
}

/// NetPBM files in `dir`, sorted by name, as raw bytes. Every file must decode.
pub fn load_replay(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, LinkError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LinkError::Source(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "ppm" | "pgm" | "pnm"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p)?;
            load_netpbm(&bytes).map_err(|e| LinkError::Source(format!("{}: {e}", p.display())))?;
            Ok((p, bytes))
        })
        .collect()
}

#[derive(Debug, Default)]
struct MockState {
    client: Option<IpAddr>,
    streaming: bool,
    flying: bool,
    log: Vec<String>,
    next_frame_id: u32,
}

struct Shared {
    config: MockConfig,
    clock: MockClock,
    frames: Vec<Vec<u8>>,
    state: Mutex<MockState>,
    stop: AtomicBool,
    frames_sent: AtomicU64,
    sender: UdpSocket,
}

impl Shared {
    fn state(&self) -> MutexGuard<'_, MockState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn battery(&self) -> u8 {
        self.config.battery.percent_at(self.clock.elapsed())
    }
}

pub struct MockDrone {
    shared: Arc<Shared>,
    command_addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
    streams: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

fn move_ok(cmd: &str) -> bool {
    let mut parts = cmd.split_whitespace();
    let (Some(verb), Some(arg), None) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    let Ok(n) = arg.parse::<u32>() else {
        return false;
    };
    match verb {
        "up" | "down" | "left" | "right" | "forward" | "back" => (20..=500).contains(&n),
        "cw" | "ccw" => (1..=360).contains(&n),
        _ => false,
    }
}

impl MockDrone {
    pub fn start(config: MockConfig) -> Result<Self, LinkError> {
        Self::start_with_clock(config, MockClock::real())
    }

    pub fn start_with_clock(config: MockConfig, clock: MockClock) -> Result<Self, LinkError> {
        config.validate()?;
        let frames = match &config.replay_dir {
            Some(dir) => load_replay(dir)?.into_iter().map(|(_, b)| b).collect(),
            None => Vec::new(),
        };
        let addr = SocketAddr::new(config.host, config.command_port);
        let command = UdpSocket::bind(addr).map_err(|source| LinkError::Bind { addr, source })?;
        command.set_read_timeout(Some(POLL))?;
        let command_addr = command.local_addr()?;
        let sender = UdpSocket::bind(SocketAddr::new(config.host, 0))?;

        let shared = Arc::new(Shared {
            config,
            clock,
            frames,
            state: Mutex::new(MockState::default()),
            stop: AtomicBool::new(false),
            frames_sent: AtomicU64::new(0),
            sender,
        });
        let streams = Arc::new(Mutex::new(Vec::new()));
        let mut drone = MockDrone {
            shared: Arc::clone(&shared),
            command_addr,
            workers: Vec::new(),
            streams: Arc::clone(&streams),
        };

        let s = Arc::clone(&shared);
        drone
            .workers
            .push(thread::Builder::new().name("mock-command".into()).spawn(move || {
                let mut buf = [0u8; 1024];
                while !s.stop.load(Ordering::Relaxed) {
                    let (n, from) = match command.recv_from(&mut buf) {
                        Ok(r) => r,
                        Err(_) => continue,
                    };
                    let text = String::from_utf8_lossy(&buf[..n]).trim().to_string();
                    let reply = Self::handle(&s, &streams, &text, from.ip());
                    if let Err(e) = command.send_to(reply.as_bytes(), from) {
                        log::warn!("mock reply to {from} failed: {e}");
                    }
                }
            })?);

        let s = Arc::clone(&shared);
        drone
            .workers
            .push(thread::Builder::new().name("mock-telemetry".into()).spawn(move || {
                let mut next = Instant::now();
                while !s.stop.load(Ordering::Relaxed) {
                    let (client, flying) = {
                        let st = s.state();
                        (st.client, st.flying)
                    };
                    if let Some(ip) = client {
                        let h = if flying { FLIGHT_HEIGHT_CM } else { 0 };
                        let line = format!("pitch:0;roll:0;yaw:0;h:{h};bat:{};\r\n", s.battery());
                        let _ = s
                            .sender
                            .send_to(line.as_bytes(), SocketAddr::new(ip, s.config.state_port));
                    }
                    next += TELEMETRY_PERIOD;
                    while !s.stop.load(Ordering::Relaxed) && Instant::now() < next {
                        thread::sleep(POLL.min(next.saturating_duration_since(Instant::now())));
                    }
                }
            })?);
        Ok(drone)
    }

    fn handle(s: &Arc<Shared>, streams: &Arc<Mutex<Vec<JoinHandle<()>>>>, cmd: &str, from: IpAddr) -> String {
        let mut st = s.state();
        st.client.get_or_insert(from);
        st.log.push(cmd.to_string());
        let reply = match cmd {
            "command" | "emergency" => "ok".to_string(),
            "battery?" => s.battery().to_string(),
            "takeoff" if s.battery() == 0 => "error".to_string(),
            "takeoff" => {
                st.flying = true;
                "ok".to_string()
            }
            "land" | "streamoff" => {
                if cmd == "land" {
                    st.flying = false;
                }
                st.streaming = false;
                "ok".to_string()
            }
            "streamon" => {
                if !st.streaming {
                    st.streaming = true;
                    let first = st.next_frame_id;
                    st.next_frame_id += s.frames.len() as u32;
                    let target = SocketAddr::new(st.client.unwrap_or(from), s.config.video_port);
                    let s2 = Arc::clone(s);
                    let handle = thread::spawn(move || Self::stream(&s2, first, target));
                    streams.lock().unwrap_or_else(|p| p.into_inner()).push(handle);
                }
                "ok".to_string()
            }
            other if move_ok(other) => "ok".to_string(),
            _ => "error".to_string(),
        };
        log::debug!("mock: {cmd:?} -> {reply:?}");
        reply
    }

    fn stream(s: &Shared, first: u32, target: SocketAddr) {
        let period = Duration::from_secs_f64(1.0 / s.config.fps);
        let mut rng = ChaCha8Rng::seed_from_u64(s.config.seed ^ u64::from(first));
        let start = Instant::now();
        let mut id = first;
        for (k, bytes) in s.frames.iter().enumerate() {
            if s.stop.load(Ordering::Relaxed) || !s.state().streaming {
                break;
            }
            let due = start + period * k as u32;
            thread::sleep(due.saturating_duration_since(Instant::now()));
            for p in fragment(id, bytes).expect("replay frames are non-empty") {
                if rng.random::<f64>() >= s.config.loss {
                    let _ = s.sender.send_to(&p.encode(), target);
                }
            }
            s.frames_sent.fetch_add(1, Ordering::Relaxed);
            id += 1;
        }
        let end = StreamEnd {
            first_id: first,
            end_id: id,
        };
        let _ = s.sender.send_to(&end.encode(), target);
        s.state().streaming = false;
    }

    pub fn command_addr(&self) -> SocketAddr {
        self.command_addr
    }

    pub fn command_log(&self) -> Vec<String> {
        self.shared.state().log.clone()
    }

    /// Frames handed to the network, lost packets included.
    pub fn frames_sent(&self) -> u64 {
        self.shared.frames_sent.load(Ordering::Relaxed)
    }

    pub fn replay_len(&self) -> usize {
        self.shared.frames.len()
    }

    pub fn is_streaming(&self) -> bool {
        self.shared.state().streaming
    }

    pub fn clock(&self) -> &MockClock {
        &self.shared.clock
    }

    /// Stops all threads and returns the command log.
    pub fn stop(&mut self) -> Vec<String> {
        self.shared.stop.store(true, Ordering::Relaxed);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
        let streams: Vec<_> = self
            .streams
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .drain(..)
            .collect();
        for w in streams {
            let _ = w.join();
        }
        self.command_log()
    }
}

impl Drop for MockDrone {
    fn drop(&mut self) {
        self.stop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_script_interpolates() {
        let b: BatteryScript = "100@0s,50@60s".parse().unwrap();
        assert_eq!(b.percent_at(Duration::ZERO), 100);
        assert_eq!(b.percent_at(Duration::from_secs(30)), 75);
        assert_eq!(b.percent_at(Duration::from_secs(60)), 50);
        assert_eq!(b.percent_at(Duration::from_secs(600)), 50);
        assert_eq!(b.to_string(), "100@0s,50@60s");
        let late: BatteryScript = "80@10s".parse().unwrap();
        assert_eq!(late.percent_at(Duration::ZERO), 80);
    }

    #[test]
    fn battery_script_rejects_nonsense() {
        for s in ["", "100", "101@0s", "50@-1s", "100@5s,90@5s", "x@0s"] {
            assert!(s.parse::<BatteryScript>().is_err(), "{s}");
        }
    }

    #[test]
    fn config_file_is_parsed_strictly() {
        let cfg = MockConfig::parse("# mock\ncommand_port = 0\nloss = 0.25 # comment\nbattery = 90@0s\n").unwrap();
        assert_eq!(cfg.command_port, 0);
        assert_eq!(cfg.loss, 0.25);
        assert_eq!(cfg.battery.percent_at(Duration::ZERO), 90);
        assert!(MockConfig::parse("volume = 3").is_err());
        assert!(MockConfig::parse("loss = 2").is_err());
        assert!(MockConfig::parse("fps = 0").is_err());
        assert!(MockConfig::parse("fps").is_err());
    }

    #[test]
    fn move_arguments_are_range_checked() {
        assert!(move_ok("right 30"));
        assert!(move_ok("cw 360"));
        assert!(!move_ok("right 10"));
        assert!(!move_ok("right"));
        assert!(!move_ok("spin 30"));
    }
}
