//! Session-level QoE and network metrics.

use serde::{Deserialize, Serialize};

use crate::simcore::{us_to_ms, SessionLog};
use crate::{Error, Result};

/// Inter-frame gap above which playback counts as stalled.
pub const STALL_GAP_MS: f64 = 200.0;

/// `-10 log10(1 - ssim)`.
pub fn ssim_db(ssim: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&ssim) {
        return Err(Error::OutOfRange(format!("ssim must lie in [0, 1), got {ssim}")));
    }
    Ok(-10.0 * (1.0 - ssim).log10())
}

/// Nearest-rank 98th percentile: element `ceil(0.98 n)` (1-based) of the
/// sorted values.
pub fn p98(values: &[f64]) -> Result<f64> {
    percentile_nearest_rank(values, 98)
}

pub fn percentile_nearest_rank(values: &[f64], pct: u32) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of an empty list"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    // integer arithmetic keeps the rank exact
    let rank = (pct as usize * v.len()).div_ceil(100).max(1);
    Ok(v[rank - 1])
}

/// `(stalls per second, stalled share of the session)` from sorted decode
/// times. Each gap over 200 ms is one stall lasting the excess over 200 ms.
pub fn count_stalls(decode_ms: &[f64], duration_s: f64) -> (f64, f64) {
    if decode_ms.len() < 2 || duration_s <= 0.0 {
        log::warn!("stall count needs two decode events and a positive duration");
        return (0.0, 0.0);
    }
    let (mut n, mut stalled_ms) = (0usize, 0.0);
    for w in decode_ms.windows(2) {
        let gap = w[1] - w[0];
        if gap > STALL_GAP_MS {
            n += 1;
            stalled_ms += gap - STALL_GAP_MS;
        }
    }
    let ratio = (stalled_ms / 1000.0 / duration_s).clamp(0.0, 1.0);
    (n as f64 / duration_s, ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoEReport {
    pub mean_quality_db: f64,
    pub p98_frame_delay_ms: f64,
    pub stalls_per_sec: f64,
    pub stall_time_ratio: f64,
    pub tput_mbps: f64,
    pub p98_packet_delay_ms: f64,
    /// Packets dropped or delivered after their frame's deadline, over sent.
    pub loss_pct: f64,
    /// Packets dropped by the link, over sent.
    pub network_loss_pct: f64,
    pub frames_decoded: usize,
    pub frames_total: usize,
}

/// Reduces a session log to its QoE report.
///
/// Quality and frame delay cover decoded frames. When frames remain
/// undecoded at the end, the session end is treated as a decode event so a
/// trailing freeze counts as a stall.
pub fn session_qoe(log: &SessionLog) -> Result<QoEReport> {
    if log.frames.is_empty() {
        return Err(Error::Empty("session log has no frames"));
    }
    let decoded: Vec<_> = log
        .frames
        .iter()
        .filter_map(|f| Some((f.decode_us?, f.quality_db?, f.delay_ms()?)))
        .collect();
    if decoded.is_empty() {
        return Err(Error::Empty("session log has no decoded frames"));
    }
    let mean_quality_db = decoded.iter().map(|d| d.1).sum::<f64>() / decoded.len() as f64;
    let delays: Vec<f64> = decoded.iter().map(|d| d.2).collect();

    let mut decode_ms: Vec<f64> = decoded.iter().map(|d| us_to_ms(d.0)).collect();
    decode_ms.sort_by(f64::total_cmp);
    let duration_s = log.duration_s();
    if decoded.len() < log.frames.len() {
        let end = us_to_ms(log.meta.duration_us);
        if decode_ms.last().is_some_and(|&l| end > l) {
            decode_ms.push(end);
        }
    }
    let (stalls_per_sec, stall_time_ratio) = count_stalls(&decode_ms, duration_s);

    let sent = log.packets.len().max(1) as f64;
    let deadline_of = |frame: u64| log.frames.get(frame as usize).map(|f| f.deadline_us);
    let mut late_or_lost = 0usize;
    let mut dropped = 0usize;
    let mut payload_bits = 0.0;
    let mut pkt_delays = Vec::new();
    for p in &log.packets {
        if p.drop_cause.is_some() {
            dropped += 1;
            late_or_lost += 1;
            continue;
        }
        if let Some(d) = p.deliver_us {
            payload_bits += p.payload_bytes as f64 * 8.0;
            pkt_delays.push(us_to_ms(d - p.enqueue_us));
            if deadline_of(p.frame_id).is_some_and(|dl| d > dl) {
                late_or_lost += 1;
            }
        } else {
            late_or_lost += 1;
        }
    }
    Ok(QoEReport {
        mean_quality_db,
        p98_frame_delay_ms: p98(&delays)?,
        stalls_per_sec,
        stall_time_ratio,
        tput_mbps: payload_bits / duration_s / 1e6,
        p98_packet_delay_ms: if pkt_delays.is_empty() { 0.0 } else { p98(&pkt_delays)? },
        loss_pct: 100.0 * late_or_lost as f64 / sent,
        network_loss_pct: 100.0 * dropped as f64 / sent,
        frames_decoded: decoded.len(),
        frames_total: log.frames.len(),
    })
}
