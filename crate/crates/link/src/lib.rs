//! UDP link to a Tello-style drone.
//!
//! * [`client`]: command/reply channel with one retry, telemetry and video
//!   listeners.
//! * [`protocol`], [`reassembly`]: video fragment framing and frame rebuild.
//! * [`telemetry`]: the `key:value;` status line parser.
//! * [`mock`]: a drone simulator speaking the same protocol.
//! * [`source`]: frame streams from the wire, a directory, or raw capture.

pub mod client;
pub mod mock;
pub mod protocol;
pub mod queue;
pub mod reassembly;
pub mod source;
pub mod telemetry;

use std::io;
use std::net::SocketAddr;

use thiserror::Error;

pub use client::{
    CommandChannel, CommandResponse, CommandResult, TelemetryListener, TelloClient, VideoReceiver, VideoStats,
};
pub use mock::{BatteryScript, MockClock, MockConfig, MockDrone};
pub use protocol::{decode_datagram, fragment, Datagram, ProtocolError, StreamEnd, VideoPacket};
pub use queue::{DropOldestQueue, Pop};
pub use reassembly::{DropNote, DropReason, Frame, Reassembler};
pub use source::{DirectoryReplay, FrameSource, MockWire, Passthrough, TimedFrame};
pub use telemetry::{parse_telemetry, DroneTelemetry, TelemetryError};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("frame source: {0}")]
    Source(String),
}
