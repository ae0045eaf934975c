//! Deterministic discrete-event simulation of one bottleneck link carrying
//! paced video packets, with per-window transport feedback.
//!
//! The clock is an integer count of microseconds.

mod feedback;
mod link;
mod log;
mod packet;
mod session;

pub use feedback::{least_squares_slope, AckSample, FeedbackContext, FeedbackReport, FEEDBACK_INTERVAL_US};
pub use link::{EnqueueOutcome, Link};
pub use log::{FrameRecord, LogEvent, SessionLog, SessionMeta};
pub use packet::{DropCause, Packet};
pub use session::{run_session, SessionConfig};

pub type Micros = u64;

/// Payload bytes per packet.
pub const MTU_PAYLOAD: usize = 1200;
/// IP/UDP/RTP header bytes added to every packet on the wire.
pub const HEADER_BYTES: usize = 40;

pub fn ms_to_us(ms: f64) -> Micros {
    (ms * 1000.0).round().max(0.0) as Micros
}

pub fn us_to_ms(us: Micros) -> f64 {
    us as f64 / 1000.0
}

pub fn s_to_us(s: f64) -> Micros {
    (s * 1e6).round().max(0.0) as Micros
}
