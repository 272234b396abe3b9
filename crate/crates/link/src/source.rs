//! Uniform frame streams for the monitor.

use std::fs::File;
use std::io::Write;
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use fallwatch::dataset::{load_image, load_netpbm};
use fallwatch::Tensor;

use crate::client::VideoReceiver;
use crate::mock::load_replay;
use crate::queue::Pop;
use crate::LinkError;

const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, PartialEq)]
pub struct TimedFrame {
    pub seq: u64,
    /// Since the source started.
    pub timestamp: Duration,
    pub image: Tensor<f32>,
    /// File path or wire frame id the image came from.
    pub origin: String,
}

pub trait FrameSource: Send {
    /// Blocks for the next frame; `None` once exhausted or stopped.
    fn next_frame(&mut self) -> Option<TimedFrame>;

    /// Frames lost before reaching the caller.
    fn dropped(&self) -> u64 {
        0
    }

    /// Setting the flag makes `next_frame` return `None` promptly.
    fn stop_flag(&self) -> Arc<AtomicBool>;
}

/// Reads NetPBM files from a directory at a fixed rate.
pub struct DirectoryReplay {
    paths: Vec<PathBuf>,
    period: Duration,
    start: Option<Instant>,
    seq: u64,
    skipped: u64,
    stop: Arc<AtomicBool>,
}

impl DirectoryReplay {
    /// Fails if the directory is unreadable or holds no NetPBM files.
    pub fn open(dir: impl AsRef<Path>, fps: f64) -> Result<Self, LinkError> {
        let dir = dir.as_ref();
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(LinkError::Config(format!("fps must be positive, got {fps}")));
        }
        let paths: Vec<PathBuf> = load_replay(dir)?.into_iter().map(|(p, _)| p).collect();
        if paths.is_empty() {
            return Err(LinkError::Source(format!("{}: no NetPBM frames", dir.display())));
        }
        Ok(DirectoryReplay {
            paths,
            period: Duration::from_secs_f64(1.0 / fps),
            start: None,
            seq: 0,
            skipped: 0,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

impl FrameSource for DirectoryReplay {
    fn next_frame(&mut self) -> Option<TimedFrame> {
        loop {
            let index = (self.seq + self.skipped) as usize;
            let path = self.paths.get(index)?;
            let start = *self.start.get_or_insert_with(Instant::now);
            let due = start + self.period * index as u32;
            while Instant::now() < due {
                if self.stop.load(Ordering::Relaxed) {
                    return None;
                }
                thread::sleep(POLL.min(due.saturating_duration_since(Instant::now())));
            }
            if self.stop.load(Ordering::Relaxed) {
                return None;
            }
            match load_image(path) {
                Ok(image) => {
                    let frame = TimedFrame {
                        seq: self.seq,
                        timestamp: start.elapsed(),
                        image,
                        origin: path.display().to_string(),
                    };
                    self.seq += 1;
                    return Some(frame);
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    self.skipped += 1;
                }
            }
        }
    }

    fn dropped(&self) -> u64 {
        self.skipped
    }

    fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }
}

/// Frames reassembled from the video port, payloads decoded as NetPBM.
pub struct MockWire {
    receiver: VideoReceiver,
    start: Instant,
    seq: u64,
    undecodable: u64,
    stop: Arc<AtomicBool>,
}

impl MockWire {
    pub fn new(receiver: VideoReceiver) -> Self {
        MockWire {
            receiver,
            start: Instant::now(),
            seq: 0,
            undecodable: 0,
            stop: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn receiver(&self) -> &VideoReceiver {
        &self.receiver
    }
}

impl FrameSource for MockWire {
    fn next_frame(&mut self) -> Option<TimedFrame> {
        while !self.stop.load(Ordering::Relaxed) {
            match self.receiver.next_frame(POLL) {
                Pop::Item(frame) => match load_netpbm(&frame.bytes) {
                    Ok(image) => {
                        let item = TimedFrame {
                            seq: self.seq,
                            timestamp: self.start.elapsed(),
                            image,
                            origin: format!("wire:{}", frame.id),
                        };
                        self.seq += 1;
                        return Some(item);
                    }
                    Err(e) => {
                        log::warn!("frame {} is not NetPBM: {e}", frame.id);
                        self.undecodable += 1;
                    }
                },
                Pop::TimedOut => {}
                Pop::Closed => return None,
            }
        }
        None
    }

    fn dropped(&self) -> u64 {
        self.receiver.stats().total_drops() + self.undecodable
    }

    fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }
}

/// Writes raw video datagrams to a file for external decoding. Never yields
/// frames; ends when stopped or after `idle` without data.
pub struct Passthrough {
    socket: UdpSocket,
    out: File,
    path: PathBuf,
    idle: Duration,
    bytes: u64,
    stop: Arc<AtomicBool>,
}

impl Passthrough {
    pub fn open(listen: SocketAddr, out: impl AsRef<Path>, idle: Duration) -> Result<Self, LinkError> {
        let socket = UdpSocket::bind(listen).map_err(|source| LinkError::Bind { addr: listen, source })?;
        socket.set_read_timeout(Some(POLL))?;
        let path = out.as_ref().to_path_buf();
        Ok(Passthrough {
            socket,
            out: File::create(&path)?,
            path,
            idle,
            bytes: 0,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes
    }
}

impl FrameSource for Passthrough {
    fn next_frame(&mut self) -> Option<TimedFrame> {
        let mut buf = [0u8; 2048];
        let mut last = Instant::now();
        while !self.stop.load(Ordering::Relaxed) && last.elapsed() < self.idle {
            if let Ok((n, _)) = self.socket.recv_from(&mut buf) {
                if let Err(e) = self.out.write_all(&buf[..n]) {
                    log::error!("passthrough write to {} failed: {e}", self.path.display());
                    break;
                }
                self.bytes += n as u64;
                last = Instant::now();
            }
        }
        let _ = self.out.flush();
        None
    }

    fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }
}
