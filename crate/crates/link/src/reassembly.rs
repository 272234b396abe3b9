//! Rebuilds frames from possibly reordered video packets.
//!
//! Frames are expected in increasing id order, packets within a frame in any
//! order. A frame still incomplete when a packet of `frame_id + 2` arrives is
//! dropped, as is a frame whose packets disagree on `packet_count`.

use std::collections::{BTreeMap, BTreeSet};

use crate::protocol::{StreamEnd, VideoPacket};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub id: u32,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Packets of `id + 2` arrived first.
    Overtaken,
    /// Two packets of the frame disagreed on the packet count.
    Contradictory,
    /// Still pending when the stream ended.
    Flushed,
    /// Listed in a stream-end range but never seen.
    Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropNote {
    pub frame_id: u32,
    pub reason: DropReason,
}

#[derive(Debug)]
struct Partial {
    count: u16,
    parts: BTreeMap<u16, Vec<u8>>,
}

#[derive(Debug, Default)]
pub struct Reassembler {
    pending: BTreeMap<u32, Partial>,
    /// Ids completed or dropped since the last stream end.
    settled: BTreeSet<u32>,
    newest: Option<u32>,
    emitted: u64,
    notes: Vec<DropNote>,
    ignored: u64,
}

impl Reassembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Frames dropped so far.
    pub fn dropped(&self) -> u64 {
        self.notes.len() as u64
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Late or duplicate packets that were discarded.
    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    pub fn notes(&self) -> &[DropNote] {
        &self.notes
    }

    fn drop_frame(&mut self, id: u32, reason: DropReason) {
        self.pending.remove(&id);
        self.settled.insert(id);
        log::debug!("dropping frame {id}: {reason:?}");
        self.notes.push(DropNote { frame_id: id, reason });
    }

    /// Feeds one packet; returns the frame it completes, if any.
    pub fn push(&mut self, packet: VideoPacket) -> Option<Frame> {
        let id = packet.frame_id;
        let late = self.newest.is_some_and(|n| id.saturating_add(2) <= n);
        if late || self.settled.contains(&id) {
            self.ignored += 1;
            return None;
        }
        if self.newest.is_none_or(|n| id > n) {
            self.newest = Some(id);
            let stale: Vec<u32> = self.pending.range(..id.saturating_sub(1)).map(|(&k, _)| k).collect();
            for k in stale {
                self.drop_frame(k, DropReason::Overtaken);
            }
        }

        let entry = self.pending.entry(id).or_insert_with(|| Partial {
            count: packet.packet_count,
            parts: BTreeMap::new(),
        });
        if entry.count != packet.packet_count {
            self.drop_frame(id, DropReason::Contradictory);
            return None;
        }
        entry.parts.entry(packet.packet_index).or_insert(packet.payload);
        if entry.parts.len() < usize::from(entry.count) {
            return None;
        }
        let done = self.pending.remove(&id).expect("entry exists");
        self.settled.insert(id);
        self.emitted += 1;
        Some(Frame {
            id,
            bytes: done.parts.into_values().flatten().collect(),
        })
    }

    /// Closes a stream: pending frames are dropped, and ids in the range that
    /// never produced a packet are counted as dropped too.
    pub fn finish(&mut self, end: StreamEnd) {
        let pending: Vec<u32> = self.pending.keys().copied().collect();
        for id in pending {
            self.drop_frame(id, DropReason::Flushed);
        }
        for id in end.first_id..end.end_id {
            if !self.settled.contains(&id) {
                self.drop_frame(id, DropReason::Unseen);
            }
        }
        self.settled.clear();
        self.newest = end.end_id.checked_sub(1).max(self.newest);
    }
}
