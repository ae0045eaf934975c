use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    /// Linear throughput/latency/loss reward on network statistics.
    Network,
    /// Normalized decoded frame quality minus a latency penalty.
    Nvc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub kind: RewardKind,
    pub throughput_coef: f64,
    pub latency_coef: f64,
    pub loss_coef: f64,
    /// Latency penalty of the frame-quality reward, per second of RTT.
    pub nvc_latency_coef: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            kind: RewardKind::Nvc,
            throughput_coef: 120.0,
            latency_coef: -1000.0,
            loss_coef: -2000.0,
            nvc_latency_coef: 0.1,
        }
    }
}

impl RewardConfig {
    pub fn network() -> Self {
        Self {
            kind: RewardKind::Network,
            ..Default::default()
        }
    }

    pub fn nvc() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSample {
    pub tput_kbps: f64,
    pub latency_s: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    /// Quality normalized to `[0, 1]` over the profile's range.
    pub quality_norm: f64,
    pub latency_s: f64,
}

/// `(1/n) * sum(a*Tput + b*Lat + c*Loss)` with throughput in kbps, latency in
/// seconds and loss as a fraction. Empty input scores 0.
pub fn reward_network(samples: &[NetworkSample], cfg: &RewardConfig) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples
        .iter()
        .map(|s| cfg.throughput_coef * s.tput_kbps + cfg.latency_coef * s.latency_s + cfg.loss_coef * s.loss)
        .sum::<f64>()
        / samples.len() as f64
}

/// `(1/n) * sum(q_norm - a*Lat)` with latency in seconds. Normalized quality
/// outside `[0, 1]` is clamped. Empty input scores 0.
pub fn reward_nvc(frames: &[FrameSample], cfg: &RewardConfig) -> f64 {
    if frames.is_empty() {
        return 0.0;
    }
    frames
        .iter()
        .map(|f| {
            let q = if (0.0..=1.0).contains(&f.quality_norm) {
                f.quality_norm
            } else {
                log::warn!("normalized quality {} outside [0, 1], clamped", f.quality_norm);
                f.quality_norm.clamp(0.0, 1.0)
            };
            q - cfg.nvc_latency_coef * f.latency_s
        })
        .sum::<f64>()
        / frames.len() as f64
}
