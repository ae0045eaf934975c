use serde::{Deserialize, Serialize};

use super::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    QueueOverflow,
    RandomLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub frame_id: u64,
    /// Index of the packet within its frame.
    pub index: usize,
    /// On-wire size, payload plus headers.
    pub size_bytes: usize,
    pub payload_bytes: usize,
    pub enqueue_us: Micros,
    pub deliver_us: Option<Micros>,
    pub drop_cause: Option<DropCause>,
    /// Id of the original packet when this is a retransmission.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retransmit_of: Option<u64>,
}

impl Packet {
    pub fn new(id: u64, frame_id: u64, index: usize, payload_bytes: usize, enqueue_us: Micros) -> Self {
        Self {
            id,
            frame_id,
            index,
            size_bytes: payload_bytes + super::HEADER_BYTES,
            payload_bytes,
            enqueue_us,
            deliver_us: None,
            drop_cause: None,
            retransmit_of: None,
        }
    }

    /// A bare packet of a given wire size, for link-level tests and tools.
    pub fn raw(id: u64, size_bytes: usize) -> Self {
        Self {
            id,
            frame_id: 0,
            index: 0,
            size_bytes,
            payload_bytes: size_bytes.saturating_sub(super::HEADER_BYTES),
            enqueue_us: 0,
            deliver_us: None,
            drop_cause: None,
            retransmit_of: None,
        }
    }

    pub fn one_way_delay_us(&self) -> Option<Micros> {
        self.deliver_us.map(|d| d - self.enqueue_us)
    }
}
