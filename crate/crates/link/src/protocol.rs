//! Video fragment framing.
//!
//! ```text
//! data:  "TL" frame_id:u32 packet_index:u16 packet_count:u16 payload…
//! end:   "TE" first_id:u32 end_id:u32
//! ```
//!
//! Little-endian throughout. The end marker closes a stream whose frame ids
//! ran over `first_id..end_id`.

use thiserror::Error;

pub const PACKET_MAGIC: [u8; 2] = *b"TL";
pub const END_MAGIC: [u8; 2] = *b"TE";
pub const HEADER_LEN: usize = 10;
pub const END_LEN: usize = 10;
pub const MAX_PAYLOAD: usize = 1400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("datagram of {0} bytes is shorter than a header")]
    Short(usize),
    #[error("unknown magic {0:02x?}")]
    Magic([u8; 2]),
    #[error("packet index {index} not below count {count}")]
    Index { index: u16, count: u16 },
    #[error("payload of {0} bytes is empty or over the limit")]
    PayloadSize(usize),
    #[error("end marker range {first}..{end} is reversed")]
    Range { first: u32, end: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoPacket {
    pub frame_id: u32,
    pub packet_index: u16,
    pub packet_count: u16,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamEnd {
    pub first_id: u32,
    pub end_id: u32,
}

impl StreamEnd {
    pub fn frame_count(&self) -> u32 {
        self.end_id - self.first_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Datagram {
    Packet(VideoPacket),
    End(StreamEnd),
}

fn check_packet(index: u16, count: u16, payload_len: usize) -> Result<(), ProtocolError> {
    if index >= count {
        return Err(ProtocolError::Index { index, count });
    }
    if payload_len == 0 || payload_len > MAX_PAYLOAD {
        return Err(ProtocolError::PayloadSize(payload_len));
    }
    Ok(())
}

impl VideoPacket {
    pub fn new(frame_id: u32, packet_index: u16, packet_count: u16, payload: Vec<u8>) -> Result<Self, ProtocolError> {
        check_packet(packet_index, packet_count, payload.len())?;
        Ok(VideoPacket {
            frame_id,
            packet_index,
            packet_count,
            payload,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&PACKET_MAGIC);
        out.extend_from_slice(&self.frame_id.to_le_bytes());
        out.extend_from_slice(&self.packet_index.to_le_bytes());
        out.extend_from_slice(&self.packet_count.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

impl StreamEnd {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(END_LEN);
        out.extend_from_slice(&END_MAGIC);
        out.extend_from_slice(&self.first_id.to_le_bytes());
        out.extend_from_slice(&self.end_id.to_le_bytes());
        out
    }
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

pub fn decode_datagram(bytes: &[u8]) -> Result<Datagram, ProtocolError> {
    if bytes.len() < HEADER_LEN.min(END_LEN) {
        return Err(ProtocolError::Short(bytes.len()));
    }
    match [bytes[0], bytes[1]] {
        PACKET_MAGIC => {
            let (index, count) = (u16_at(bytes, 6), u16_at(bytes, 8));
            let payload = &bytes[HEADER_LEN..];
            check_packet(index, count, payload.len())?;
            Ok(Datagram::Packet(VideoPacket {
                frame_id: u32_at(bytes, 2),
                packet_index: index,
                packet_count: count,
                payload: payload.to_vec(),
            }))
        }
        END_MAGIC if bytes.len() == END_LEN => {
            let (first, end) = (u32_at(bytes, 2), u32_at(bytes, 6));
            if end < first {
                return Err(ProtocolError::Range { first, end });
            }
            Ok(Datagram::End(StreamEnd {
                first_id: first,
                end_id: end,
            }))
        }
        END_MAGIC => Err(ProtocolError::Short(bytes.len())),
        other => Err(ProtocolError::Magic(other)),
    }
}

/// Splits one encoded frame into packets of at most [`MAX_PAYLOAD`] bytes.
pub fn fragment(frame_id: u32, frame: &[u8]) -> Result<Vec<VideoPacket>, ProtocolError> {
    if frame.is_empty() {
        return Err(ProtocolError::PayloadSize(0));
    }
    let chunks: Vec<&[u8]> = frame.chunks(MAX_PAYLOAD).collect();
    let count = u16::try_from(chunks.len()).map_err(|_| ProtocolError::PayloadSize(frame.len()))?;
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, c)| VideoPacket {
            frame_id,
            packet_index: i as u16,
            packet_count: count,
            payload: c.to_vec(),
        })
        .collect())
}
