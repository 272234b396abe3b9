//! Ground-station side of the UDP link.
//!
//! Each receive path runs on its own thread: command replies feed a channel
//! read by [`TelloClient::send_command`], telemetry lines update a shared
//! latest value, and video packets are reassembled into a drop-oldest queue.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::protocol::{decode_datagram, Datagram};
use crate::queue::{DropOldestQueue, Pop};
use crate::reassembly::{Frame, Reassembler};
use crate::telemetry::{parse_telemetry, DroneTelemetry};
use crate::LinkError;

pub const COMMAND_PORT: u16 = 8889;
pub const STATE_PORT: u16 = 8890;
pub const VIDEO_PORT: u16 = 11111;
pub const DEFAULT_COMMAND_TIMEOUT: Duration = Duration::from_secs(5);

/// How often receive loops wake to check for shutdown.
const POLL: Duration = Duration::from_millis(50);
const MAX_DATAGRAM: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommandResponse {
    /// Reply text, verbatim (`"ok"`, `"87"`, …).
    Reply(String),
    /// A reply starting with `error`.
    Error(String),
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub command: String,
    pub response: CommandResponse,
    /// Time from the last send to the reply; the per-attempt timeout when
    /// no reply came.
    pub round_trip: Duration,
}

impl CommandResult {
    pub fn is_ok(&self) -> bool {
        matches!(self.response, CommandResponse::Reply(_))
    }

    pub fn text(&self) -> Option<&str> {
        match &self.response {
            CommandResponse::Reply(t) | CommandResponse::Error(t) => Some(t),
            CommandResponse::Timeout => None,
        }
    }
}

/// Anything that can carry a text command and return the drone's answer.
pub trait CommandChannel: Send {
    fn send_command(&mut self, command: &str) -> Result<CommandResult, LinkError>;
}

fn bind(addr: SocketAddr) -> Result<UdpSocket, LinkError> {
    let socket = UdpSocket::bind(addr).map_err(|source| LinkError::Bind { addr, source })?;
    socket.set_read_timeout(Some(POLL))?;
    Ok(socket)
}

fn is_poll_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

/// Runs `on_datagram` for every datagram until `stop` is set.
fn spawn_receiver(
    name: &str,
    socket: UdpSocket,
    stop: Arc<AtomicBool>,
    mut on_datagram: impl FnMut(&[u8], SocketAddr) -> bool + Send + 'static,
) -> io::Result<JoinHandle<()>> {
    thread::Builder::new().name(name.to_string()).spawn(move || {
        let mut buf = [0u8; MAX_DATAGRAM];
        while !stop.load(Ordering::Relaxed) {
            match socket.recv_from(&mut buf) {
                Ok((n, from)) => {
                    if !on_datagram(&buf[..n], from) {
                        break;
                    }
                }
                Err(e) if is_poll_timeout(&e) => {}
                Err(e) => {
                    log::warn!("receive loop stopping: {e}");
                    break;
                }
            }
        }
    })
}

pub struct TelloClient {
    socket: UdpSocket,
    drone: SocketAddr,
    timeout: Duration,
    replies: Receiver<String>,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl TelloClient {
    /// Binds an ephemeral local port and talks to `drone` (its command port).
    pub fn connect(drone: SocketAddr, timeout: Duration) -> Result<Self, LinkError> {
        let local: SocketAddr = if drone.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }
            .parse()
            .expect("literal address");
        Self::connect_from(local, drone, timeout)
    }

    pub fn connect_from(local: SocketAddr, drone: SocketAddr, timeout: Duration) -> Result<Self, LinkError> {
        if timeout.is_zero() {
            return Err(LinkError::Config("command timeout must be positive".into()));
        }
        let socket = bind(local)?;
        let (tx, replies) = mpsc::channel();
        let stop = Arc::new(AtomicBool::new(false));
        let worker = spawn_receiver(
            "command-rx",
            socket.try_clone()?,
            Arc::clone(&stop),
            move |bytes, from| {
                if from != drone {
                    log::debug!("ignoring {} bytes from {from}", bytes.len());
                    return true;
                }
                let text = String::from_utf8_lossy(bytes).trim_end().to_string();
                tx.send(text).is_ok()
            },
        )?;
        Ok(TelloClient {
            socket,
            drone,
            timeout,
            replies,
            stop,
            worker: Some(worker),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn drone(&self) -> SocketAddr {
        self.drone
    }

    /// Sends `command`, waits up to the timeout, resends once on silence.
    pub fn send(&mut self, command: &str) -> Result<CommandResult, LinkError> {
        // A reply that arrived after an earlier timeout must not answer this command.
        while let Ok(stale) = self.replies.try_recv() {
            log::debug!("discarding stale reply {stale:?}");
        }
        for attempt in 0..2 {
            let sent = Instant::now();
            self.socket.send_to(command.as_bytes(), self.drone)?;
            match self.replies.recv_timeout(self.timeout) {
                Ok(text) => {
                    let response = if text.starts_with("error") {
                        CommandResponse::Error(text)
                    } else {
                        CommandResponse::Reply(text)
                    };
                    return Ok(CommandResult {
                        command: command.to_string(),
                        response,
                        round_trip: sent.elapsed(),
                    });
                }
                Err(RecvTimeoutError::Timeout) => {
                    log::debug!("{command:?}: no reply on attempt {}", attempt + 1);
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(LinkError::Io(io::Error::other("command receiver stopped")));
                }
            }
        }
        Ok(CommandResult {
            command: command.to_string(),
            response: CommandResponse::Timeout,
            round_trip: self.timeout,
        })
    }
}

impl CommandChannel for TelloClient {
    fn send_command(&mut self, command: &str) -> Result<CommandResult, LinkError> {
        self.send(command)
    }
}

impl Drop for TelloClient {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

#[derive(Debug, Default)]
struct TelemetryShared {
    latest: Mutex<Option<DroneTelemetry>>,
    lines: AtomicU64,
    errors: AtomicU64,
}

/// Listens for telemetry lines and keeps the most recent valid one.
pub struct TelemetryListener {
    shared: Arc<TelemetryShared>,
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl TelemetryListener {
    pub fn bind(addr: SocketAddr) -> Result<Self, LinkError> {
        let socket = bind(addr)?;
        let addr = socket.local_addr()?;
        let shared = Arc::new(TelemetryShared::default());
        let stop = Arc::new(AtomicBool::new(false));
        let s = Arc::clone(&shared);
        let worker = spawn_receiver("telemetry-rx", socket, Arc::clone(&stop), move |bytes, _| {
            s.lines.fetch_add(1, Ordering::Relaxed);
            match parse_telemetry(bytes) {
                Ok(t) => *s.latest.lock().unwrap_or_else(|p| p.into_inner()) = Some(t),
                Err(e) => {
                    s.errors.fetch_add(1, Ordering::Relaxed);
                    log::debug!("bad telemetry line: {e}");
                }
            }
            true
        })?;
        Ok(TelemetryListener {
            shared,
            addr,
            stop,
            worker: Some(worker),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn latest(&self) -> Option<DroneTelemetry> {
        self.shared.latest.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn lines(&self) -> u64 {
        self.shared.lines.load(Ordering::Relaxed)
    }

    pub fn parse_errors(&self) -> u64 {
        self.shared.errors.load(Ordering::Relaxed)
    }
}

impl Drop for TelemetryListener {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VideoStats {
    pub frames: u64,
    /// Frames lost in reassembly.
    pub dropped: u64,
    /// Frames evicted from the full output queue.
    pub evicted: u64,
    pub bad_datagrams: u64,
}

impl VideoStats {
    pub fn total_drops(&self) -> u64 {
        self.dropped + self.evicted
    }
}

#[derive(Debug, Default)]
struct VideoCounters {
    frames: AtomicU64,
    dropped: AtomicU64,
    bad: AtomicU64,
}

/// Reassembles incoming video packets into frames. The frame queue is closed
/// when a stream-end marker arrives.
pub struct VideoReceiver {
    frames: Arc<DropOldestQueue<Frame>>,
    counters: Arc<VideoCounters>,
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl VideoReceiver {
    pub fn bind(addr: SocketAddr, capacity: usize) -> Result<Self, LinkError> {
        if capacity == 0 {
            return Err(LinkError::Config("video queue capacity must be positive".into()));
        }
        let socket = bind(addr)?;
        let addr = socket.local_addr()?;
        let frames = Arc::new(DropOldestQueue::new(capacity));
        let counters = Arc::new(VideoCounters::default());
        let stop = Arc::new(AtomicBool::new(false));
        let (q, c) = (Arc::clone(&frames), Arc::clone(&counters));
        let mut reassembler = Reassembler::new();
        let worker = spawn_receiver("video-rx", socket, Arc::clone(&stop), move |bytes, _| {
            match decode_datagram(bytes) {
                Ok(Datagram::Packet(p)) => {
                    if let Some(frame) = reassembler.push(p) {
                        c.frames.fetch_add(1, Ordering::Relaxed);
                        q.push(frame);
                    }
                }
                Ok(Datagram::End(end)) => {
                    reassembler.finish(end);
                    c.dropped.store(reassembler.dropped(), Ordering::Relaxed);
                    q.close();
                    return false;
                }
                Err(e) => {
                    c.bad.fetch_add(1, Ordering::Relaxed);
                    log::debug!("bad video datagram: {e}");
                }
            }
            c.dropped.store(reassembler.dropped(), Ordering::Relaxed);
            true
        })?;
        Ok(VideoReceiver {
            frames,
            counters,
            addr,
            stop,
            worker: Some(worker),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn next_frame(&self, timeout: Duration) -> Pop<Frame> {
        self.frames.pop_timeout(timeout)
    }

    /// True once the stream ended and every frame was taken.
    pub fn is_finished(&self) -> bool {
        self.frames.is_closed() && self.frames.is_empty()
    }

    pub fn stats(&self) -> VideoStats {
        VideoStats {
            frames: self.counters.frames.load(Ordering::Relaxed),
            dropped: self.counters.dropped.load(Ordering::Relaxed),
            evicted: self.frames.evicted(),
            bad_datagrams: self.counters.bad.load(Ordering::Relaxed),
        }
    }

    /// Stops receiving; queued frames stay available.
    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
        self.frames.close();
    }
}

impl Drop for VideoReceiver {
    fn drop(&mut self) {
        self.shutdown();
    }
}
