use serde::{Deserialize, Serialize};

use crate::simcore::FeedbackReport;

pub const HISTORY_WINDOWS: usize = 10;
pub const FEATURES_PER_WINDOW: usize = 3;
pub const STATE_LEN: usize = HISTORY_WINDOWS * FEATURES_PER_WINDOW;

/// Per-window network statistics as seen by the sender.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub window_index: u64,
    pub mean_rtt_ms: f64,
    pub min_historic_mean_rtt_ms: f64,
    /// Least-squares slope of RTT over the window (ms per ms).
    pub rtt_slope: f64,
    pub packets_sent: usize,
    pub packets_acked: usize,
    pub packets_lost: usize,
    pub bytes_acked: usize,
    pub window_s: f64,
}

impl WindowStats {
    /// The features of a window where nothing is happening: flat latency at
    /// its minimum, everything sent acknowledged.
    pub fn neutral() -> Self {
        Self {
            window_index: 0,
            mean_rtt_ms: 0.0,
            min_historic_mean_rtt_ms: 0.0,
            rtt_slope: 0.0,
            packets_sent: 1,
            packets_acked: 1,
            packets_lost: 0,
            bytes_acked: 0,
            window_s: 0.05,
        }
    }

    pub fn latency_ratio(&self) -> f64 {
        if self.min_historic_mean_rtt_ms > 0.0 {
            (self.mean_rtt_ms / self.min_historic_mean_rtt_ms).max(1.0)
        } else {
            1.0
        }
    }

    pub fn sending_ratio(&self) -> f64 {
        self.packets_sent as f64 / self.packets_acked.max(1) as f64
    }

    pub fn throughput_kbps(&self) -> f64 {
        self.bytes_acked as f64 * 8.0 / self.window_s / 1000.0
    }

    pub fn loss_fraction(&self) -> f64 {
        let total = self.packets_acked + self.packets_lost;
        if total == 0 {
            0.0
        } else {
            self.packets_lost as f64 / total as f64
        }
    }
}

/// Turns successive feedback reports into [`WindowStats`], tracking the
/// connection-wide minimum of per-window mean RTT. A window without
/// acknowledgements repeats the last known mean RTT.
#[derive(Debug, Clone, Default)]
pub struct WindowTracker {
    index: u64,
    min_mean_rtt_ms: Option<f64>,
    last_mean_rtt_ms: Option<f64>,
}

impl WindowTracker {
    pub fn observe(&mut self, report: &FeedbackReport) -> WindowStats {
        let mean = report.mean_rtt_ms().or(self.last_mean_rtt_ms);
        if let Some(m) = report.mean_rtt_ms() {
            self.last_mean_rtt_ms = Some(m);
            self.min_mean_rtt_ms = Some(self.min_mean_rtt_ms.map_or(m, |x| x.min(m)));
        }
        let stats = WindowStats {
            window_index: self.index,
            mean_rtt_ms: mean.unwrap_or(0.0),
            min_historic_mean_rtt_ms: self.min_mean_rtt_ms.unwrap_or(0.0),
            rtt_slope: report.rtt_slope(),
            packets_sent: report.packets_sent,
            packets_acked: report.packets_acked(),
            packets_lost: report.lost_ids.len(),
            bytes_acked: report.bytes_acked,
            window_s: report.window_s(),
        };
        self.index += 1;
        stats
    }

    pub fn last_mean_rtt_ms(&self) -> Option<f64> {
        self.last_mean_rtt_ms
    }
}

/// `(latency_gradient, latency_ratio, sending_ratio)` for the last ten
/// windows, most recent first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; STATE_LEN]);

impl StateVector {
    pub fn window(&self, k: usize) -> (f64, f64, f64) {
        let b = k * FEATURES_PER_WINDOW;
        (self.0[b], self.0[b + 1], self.0[b + 2])
    }
}

/// Builds the observation from a history ordered oldest to newest. Short
/// histories are padded with [`WindowStats::neutral`].
pub fn extract_observation(history: &[WindowStats]) -> StateVector {
    let mut out = [0.0; STATE_LEN];
    let neutral = WindowStats::neutral();
    for k in 0..HISTORY_WINDOWS {
        let w = history
            .len()
            .checked_sub(k + 1)
            .map(|i| &history[i])
            .unwrap_or(&neutral);
        out[k * 3] = w.rtt_slope;
        out[k * 3 + 1] = w.latency_ratio();
        out[k * 3 + 2] = w.sending_ratio();
    }
    StateVector(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::AckSample;

    fn steady_report(i: u64) -> FeedbackReport {
        FeedbackReport {
            window_start_us: i * 50_000,
            window_end_us: (i + 1) * 50_000,
            acks: (0..5)
                .map(|k| AckSample {
                    id: i * 5 + k,
                    send_us: i * 50_000 + k * 10_000,
                    ack_us: i * 50_000 + k * 10_000 + 40_000,
                    size_bytes: 1240,
                })
                .collect(),
            lost_ids: vec![],
            bytes_acked: 5 * 1240,
            packets_sent: 5,
            bytes_sent: 5 * 1240,
        }
    }

    #[test]
    fn steady_state_features() {
        let mut tr = WindowTracker::default();
        let hist: Vec<WindowStats> = (0..12).map(|i| tr.observe(&steady_report(i))).collect();
        let s = extract_observation(&hist);
        for k in 0..HISTORY_WINDOWS {
            assert_eq!(s.window(k), (0.0, 1.0, 1.0));
        }
    }

    #[test]
    fn historic_minimum_gives_unit_ratio() {
        let mut tr = WindowTracker::default();
        let mut r = steady_report(0);
        for a in &mut r.acks {
            a.ack_us += 30_000;
        }
        tr.observe(&r);
        let w = tr.observe(&steady_report(1));
        assert_eq!(w.latency_ratio(), 1.0);
        let mut late = steady_report(2);
        for a in &mut late.acks {
            a.ack_us += 40_000;
        }
        assert!((tr.observe(&late).latency_ratio() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sending_ratio_counts() {
        let w = WindowStats {
            packets_sent: 20,
            packets_acked: 10,
            ..WindowStats::neutral()
        };
        assert_eq!(w.sending_ratio(), 2.0);
        let none = WindowStats {
            packets_sent: 4,
            packets_acked: 0,
            ..WindowStats::neutral()
        };
        assert_eq!(none.sending_ratio(), 4.0);
    }

    #[test]
    fn short_history_is_padded_most_recent_first() {
        let w = WindowStats {
            rtt_slope: 0.3,
            mean_rtt_ms: 60.0,
            min_historic_mean_rtt_ms: 40.0,
            packets_sent: 6,
            packets_acked: 3,
            ..WindowStats::neutral()
        };
        let s = extract_observation(&[w]);
        assert_eq!(s.window(0), (0.3, 1.5, 2.0));
        for k in 1..HISTORY_WINDOWS {
            assert_eq!(s.window(k), (0.0, 1.0, 1.0));
        }
    }

    #[test]
    fn silent_window_repeats_last_rtt() {
        let mut tr = WindowTracker::default();
        tr.observe(&steady_report(0));
        let empty = FeedbackReport {
            window_start_us: 50_000,
            window_end_us: 100_000,
            packets_sent: 3,
            ..Default::default()
        };
        let w = tr.observe(&empty);
        assert_eq!(w.mean_rtt_ms, 40.0);
        assert_eq!(w.sending_ratio(), 3.0);
    }
}
