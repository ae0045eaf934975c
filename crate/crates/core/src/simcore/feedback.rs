use serde::{Deserialize, Serialize};

use super::{FrameRecord, Micros};

/// Length of one feedback window.
pub const FEEDBACK_INTERVAL_US: Micros = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AckSample {
    pub id: u64,
    pub send_us: Micros,
    pub ack_us: Micros,
    pub size_bytes: usize,
}

impl AckSample {
    pub fn rtt_ms(&self) -> f64 {
        (self.ack_us - self.send_us) as f64 / 1000.0
    }
}

/// Sender-side view of one feedback window `[start, end)`: acknowledgements
/// and loss notifications that reached the sender during the window, plus
/// what the sender transmitted in it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub window_start_us: Micros,
    pub window_end_us: Micros,
    pub acks: Vec<AckSample>,
    pub lost_ids: Vec<u64>,
    pub bytes_acked: usize,
    pub packets_sent: usize,
    pub bytes_sent: usize,
}

impl FeedbackReport {
    pub fn window_s(&self) -> f64 {
        (self.window_end_us - self.window_start_us) as f64 / 1e6
    }

    pub fn packets_acked(&self) -> usize {
        self.acks.len()
    }

    pub fn mean_rtt_ms(&self) -> Option<f64> {
        if self.acks.is_empty() {
            return None;
        }
        Some(self.acks.iter().map(AckSample::rtt_ms).sum::<f64>() / self.acks.len() as f64)
    }

    /// Population standard deviation of the window's RTT samples; 0 with
    /// fewer than two samples.
    pub fn rtt_std_ms(&self) -> f64 {
        let n = self.acks.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_rtt_ms().unwrap();
        let var = self
            .acks
            .iter()
            .map(|a| (a.rtt_ms() - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        var.sqrt()
    }

    /// Least-squares slope of RTT against send time (ms per ms).
    pub fn rtt_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .acks
            .iter()
            .map(|a| (a.send_us as f64 / 1000.0, a.rtt_ms()))
            .collect();
        least_squares_slope(&pts)
    }

    /// Lost packets over lost plus acknowledged.
    pub fn loss_fraction(&self) -> f64 {
        let total = self.acks.len() + self.lost_ids.len();
        if total == 0 {
            0.0
        } else {
            self.lost_ids.len() as f64 / total as f64
        }
    }

    /// Acknowledged wire bits per second over the window, in kbps.
    pub fn throughput_kbps(&self) -> f64 {
        self.bytes_acked as f64 * 8.0 / self.window_s() / 1000.0
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    if n < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-12 {
        return 0.0;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Everything a controller sees at a feedback instant.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackContext<'a> {
    pub now_us: Micros,
    pub report: &'a FeedbackReport,
    /// Frames whose decode outcome became known since the previous report.
    pub frames: &'a [FrameRecord],
    /// Rate in force during the window that just ended.
    pub current_rate_kbps: f64,
    /// Acknowledged throughput over the last 200 ms.
    pub recent_throughput_kbps: f64,
}
