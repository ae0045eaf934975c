//! Video codec behaviour as quality profiles.
//!
//! Encoding is exact: a frame's size follows from its target bitrate and the
//! frame rate. Decoding is a profile lookup. The loss-tolerant path decodes
//! partial frames and carries a reference-damage state between frames that is
//! cleared by periodic state synchronization; the traditional path waits for
//! every packet and then decodes at loss-free quality.

mod profile;

pub use profile::{
    default_nvc_profile, default_traditional_profile, synthetic_profile, synthetic_profile_set,
    CodecMode, CodecProfile, SyntheticProfileParams, FPS,
};

use serde::{Deserialize, Serialize};

use crate::simcore::{Micros, MTU_PAYLOAD};

/// Frames between reference-state synchronizations.
pub const SYNC_INTERVAL_FRAMES: u32 = 10;

pub const FRAME_INTERVAL_US: Micros = 40_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedFrame {
    pub frame_id: u64,
    pub encode_us: Micros,
    pub target_bitrate_kbps: f64,
    pub size_bytes: usize,
    pub packet_count: usize,
    pub decode_deadline_us: Micros,
}

impl EncodedFrame {
    pub fn new(frame_id: u64, encode_us: Micros, bitrate_kbps: f64, decode_deadline_us: Micros) -> Self {
        let size_bytes = frame_size_bytes(bitrate_kbps);
        Self {
            frame_id,
            encode_us,
            target_bitrate_kbps: bitrate_kbps,
            size_bytes,
            packet_count: packet_count(size_bytes),
            decode_deadline_us,
        }
    }

    /// Payload carried by packet `index` of this frame.
    pub fn payload_of(&self, index: usize) -> usize {
        let full = MTU_PAYLOAD * index;
        (self.size_bytes - full).min(MTU_PAYLOAD)
    }
}

pub fn frame_size_bytes(bitrate_kbps: f64) -> usize {
    ((bitrate_kbps * 1000.0 / 8.0 / FPS).round() as usize).max(1)
}

pub fn packet_count(size_bytes: usize) -> usize {
    size_bytes.div_ceil(MTU_PAYLOAD)
}

/// Decode deadline: one frame interval plus propagation plus jitter slack
/// after encoding.
pub fn decode_deadline(encode_us: Micros, owd_us: Micros, slack_us: Micros) -> Micros {
    encode_us + FRAME_INTERVAL_US + owd_us + slack_us
}

/// Fraction of the frame's packets not delivered by its decode deadline.
/// `arrivals[i]` is the delivery time of packet `i`, `None` if dropped.
pub fn frame_loss_rate(frame: &EncodedFrame, arrivals: &[Option<Micros>]) -> f64 {
    if arrivals.is_empty() {
        return 1.0;
    }
    let missing = arrivals
        .iter()
        .filter(|a| !matches!(a, Some(t) if *t <= frame.decode_deadline_us))
        .count();
    missing as f64 / arrivals.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    /// Accumulated reference damage in `[0, 1]`.
    pub damage: f64,
    pub frames_since_sync: u32,
}

impl Default for ReferenceState {
    fn default() -> Self {
        Self {
            damage: 0.0,
            frames_since_sync: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageModel {
    /// Per-frame decay of reference damage.
    pub decay: f64,
    /// Quality penalty (dB) at full damage.
    pub penalty_db: f64,
}

impl Default for DamageModel {
    fn default() -> Self {
        Self {
            decay: 0.9,
            penalty_db: 3.0,
        }
    }
}

/// Decodes a (possibly partial) frame with the loss-tolerant codec.
///
/// Quality is the grid value at `(bitrate, loss)` minus the penalty carried
/// by the incoming reference. Damage then decays and absorbs this frame's
/// loss. On every tenth frame a synchronization clears damage if any
/// accumulated.
pub fn decode_nvc(
    profile: &CodecProfile,
    model: &DamageModel,
    frame: &EncodedFrame,
    loss: f64,
    reference: ReferenceState,
) -> (f64, ReferenceState) {
    debug_assert_eq!(profile.mode, CodecMode::Nvc);
    let loss = loss.clamp(0.0, 1.0);
    let base = profile.quality(frame.target_bitrate_kbps, loss);
    let quality = (base - model.penalty_db * reference.damage).max(profile.floor_db());

    let mut next = ReferenceState {
        damage: (reference.damage * model.decay + loss).clamp(0.0, 1.0),
        frames_since_sync: reference.frames_since_sync + 1,
    };
    if next.frames_since_sync >= SYNC_INTERVAL_FRAMES {
        if next.damage > 0.0 {
            next.damage = 0.0;
        }
        next.frames_since_sync = 0;
    }
    (quality, next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraditionalDecode {
    Decoded { quality_db: f64, decode_us: Micros },
    Pending,
}

/// Decodes only once every packet is present, at the last arrival, with
/// loss-free quality. Retransmitted copies count: `arrivals[i]` is the first
/// delivery of packet `i` or any of its retransmissions.
pub fn decode_traditional(
    profile: &CodecProfile,
    frame: &EncodedFrame,
    arrivals: &[Option<Micros>],
) -> TraditionalDecode {
    let mut last = frame.encode_us;
    for a in arrivals {
        match a {
            Some(t) => last = last.max(*t),
            None => return TraditionalDecode::Pending,
        }
    }
    TraditionalDecode::Decoded {
        quality_db: profile.ceiling(frame.target_bitrate_kbps),
        decode_us: last,
    }
}

/// A profile plus the decoder state it accumulates within one session.
#[derive(Debug, Clone)]
pub struct CodecSession {
    pub profile: CodecProfile,
    pub damage_model: DamageModel,
    pub reference: ReferenceState,
}

impl CodecSession {
    pub fn new(profile: CodecProfile) -> Self {
        Self {
            profile,
            damage_model: DamageModel::default(),
            reference: ReferenceState::default(),
        }
    }

    pub fn mode(&self) -> CodecMode {
        self.profile.mode
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(bitrate: f64) -> EncodedFrame {
        EncodedFrame::new(0, 0, bitrate, 100_000)
    }

    #[test]
    fn frame_sizing() {
        let f = frame(1000.0);
        assert_eq!(f.size_bytes, 5000);
        assert_eq!(f.packet_count, 5);
        assert_eq!(f.payload_of(4), 200);
        assert_eq!((0..5).map(|i| f.payload_of(i)).sum::<usize>(), 5000);
    }

    #[test]
    fn loss_rate_counting() {
        let f = frame(1000.0);
        let on_time = vec![Some(10); 5];
        assert_eq!(frame_loss_rate(&f, &on_time), 0.0);
        let mut one_late = on_time.clone();
        one_late[2] = Some(200_000);
        assert!((frame_loss_rate(&f, &one_late) - 0.2).abs() < 1e-12);
        assert_eq!(frame_loss_rate(&f, &[None; 5]), 1.0);
    }

    #[test]
    fn clean_decode_hits_grid() {
        let p = default_nvc_profile();
        let f = frame(p.bitrates_kbps[10]);
        let (q, next) = decode_nvc(&p, &DamageModel::default(), &f, 0.0, ReferenceState::default());
        assert!((q - p.quality_db[10][0]).abs() < 1e-12);
        assert_eq!(next.damage, 0.0);
        assert_eq!(next.frames_since_sync, 1);
    }

    #[test]
    fn damage_propagates_and_resyncs() {
        let p = default_nvc_profile();
        let m = DamageModel::default();
        let f = frame(1500.0);
        let mut r = ReferenceState::default();
        let (_, r1) = decode_nvc(&p, &m, &f, 0.3, r);
        assert!((r1.damage - 0.3).abs() < 1e-12);
        let (q2, r2) = decode_nvc(&p, &m, &f, 0.0, r1);
        assert!((q2 - (p.quality(1500.0, 0.0) - 3.0 * 0.3)).abs() < 1e-9);
        assert!((r2.damage - 0.27).abs() < 1e-12);
        r = r2;
        for _ in 2..9 {
            r = decode_nvc(&p, &m, &f, 0.0, r).1;
            assert!(r.damage > 0.0);
            assert!(r.frames_since_sync < SYNC_INTERVAL_FRAMES);
        }
        assert_eq!(r.frames_since_sync, 9);
        let (_, synced) = decode_nvc(&p, &m, &f, 0.0, r);
        assert_eq!(synced, ReferenceState::default());
    }

    #[test]
    fn damage_stays_bounded() {
        let p = default_nvc_profile();
        let m = DamageModel::default();
        let mut r = ReferenceState::default();
        for _ in 0..50 {
            let (q, n) = decode_nvc(&p, &m, &frame(800.0), 1.0, r);
            assert!((0.0..=1.0).contains(&n.damage));
            assert!(q >= p.floor_db());
            r = n;
        }
    }

    #[test]
    fn traditional_waits_for_all_packets() {
        let p = default_traditional_profile();
        let f = frame(1000.0);
        assert_eq!(
            decode_traditional(&p, &f, &[Some(5), None, Some(7), Some(8), Some(9)]),
            TraditionalDecode::Pending
        );
        match decode_traditional(&p, &f, &[Some(5), Some(50), Some(7), Some(8), Some(9)]) {
            TraditionalDecode::Decoded { quality_db, decode_us } => {
                assert_eq!(decode_us, 50);
                assert_eq!(quality_db, p.ceiling(1000.0));
            }
            TraditionalDecode::Pending => panic!(),
        }
    }

    #[test]
    fn lossless_modes_agree() {
        let nvc = default_nvc_profile();
        let trad = default_traditional_profile();
        for &r in &[150.0, 700.0, 2500.0, 6000.0] {
            let f = frame(r);
            let arrivals = vec![Some(10); f.packet_count];
            let (qn, _) = decode_nvc(&nvc, &DamageModel::default(), &f, frame_loss_rate(&f, &arrivals), ReferenceState::default());
            let TraditionalDecode::Decoded { quality_db: qt, .. } = decode_traditional(&trad, &f, &arrivals) else {
                panic!()
            };
            assert_eq!(qn, qt);
        }
    }
}
