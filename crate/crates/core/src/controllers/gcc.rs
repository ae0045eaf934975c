use serde::{Deserialize, Serialize};

use super::{clamp_rate, Controller, ControllerDecision, Mode, StepOutput};
use crate::simcore::{FeedbackContext, FeedbackReport, Micros, FEEDBACK_INTERVAL_US};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GccConfig {
    pub initial_rate_kbps: f64,
    /// Multiplicative decrease applied on overuse or heavy loss.
    pub decrease_factor: f64,
    /// Multiplicative increase per window in the increase state.
    pub increase_per_window: f64,
    pub loss_decrease_threshold: f64,
    /// Packets in the trendline regression window.
    pub trendline_window: usize,
    /// Exponential smoothing of accumulated delay.
    pub smoothing: f64,
    /// Scales the trendline slope (times sample count) into the trend signal.
    pub threshold_gain: f64,
    pub threshold_init_ms: f64,
    pub threshold_min_ms: f64,
    pub threshold_max_ms: f64,
    /// Threshold adaptation gains per ms, above and below the threshold.
    pub k_up: f64,
    pub k_down: f64,
    /// The rate never grows past this multiple of acknowledged throughput.
    pub throughput_cap_factor: f64,
}

impl Default for GccConfig {
    fn default() -> Self {
        Self {
            initial_rate_kbps: 300.0,
            decrease_factor: 0.85,
            increase_per_window: 0.08,
            loss_decrease_threshold: 0.10,
            trendline_window: 20,
            smoothing: 0.9,
            threshold_gain: 4.0,
            threshold_init_ms: 12.5,
            threshold_min_ms: 6.0,
            threshold_max_ms: 600.0,
            k_up: 0.01,
            k_down: 0.00018,
            throughput_cap_factor: 1.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Usage {
    Normal,
    Overuse,
    Underuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateControlState {
    Increase,
    Hold,
    Decrease,
}

/// Delay-gradient controller: a trendline over smoothed per-packet delay
/// feeds an overuse detector with an adaptive threshold, which drives an
/// increase/hold/decrease machine. Heavy loss forces a decrease.
#[derive(Debug, Clone)]
pub struct GccLike {
    cfg: GccConfig,
    base_rtt_ms: Option<f64>,
    smoothed_ms: f64,
    samples: std::collections::VecDeque<(f64, f64)>,
    deltas: usize,
    rate_kbps: f64,
    threshold_ms: f64,
    state: RateControlState,
    last_usage: Usage,
}

impl GccLike {
    pub fn new(cfg: GccConfig) -> Self {
        Self {
            base_rtt_ms: None,
            smoothed_ms: 0.0,
            samples: std::collections::VecDeque::with_capacity(cfg.trendline_window),
            deltas: 0,
            rate_kbps: clamp_rate(cfg.initial_rate_kbps),
            threshold_ms: cfg.threshold_init_ms,
            state: RateControlState::Hold,
            last_usage: Usage::Normal,
            cfg,
        }
    }

    pub fn rate_kbps(&self) -> f64 {
        self.rate_kbps
    }

    pub fn state(&self) -> RateControlState {
        self.state
    }

    pub fn threshold_ms(&self) -> f64 {
        self.threshold_ms
    }

    pub fn last_usage(&self) -> Usage {
        self.last_usage
    }

    /// Restarts rate control from `rate_kbps`, keeping the detector state.
    pub fn reset_rate(&mut self, rate_kbps: f64) {
        self.rate_kbps = clamp_rate(rate_kbps);
        self.state = RateControlState::Hold;
    }

    fn detect(&mut self, report: &FeedbackReport) -> Option<Usage> {
        if report.acks.is_empty() {
            return None;
        }
        let mut acks = report.acks.clone();
        acks.sort_by_key(|a| a.send_us);
        for a in &acks {
            let rtt = a.rtt_ms();
            let base = *self.base_rtt_ms.get_or_insert(rtt);
            let a_ = self.cfg.smoothing;
            self.smoothed_ms = a_ * self.smoothed_ms + (1.0 - a_) * (rtt - base);
            if self.samples.len() == self.cfg.trendline_window {
                self.samples.pop_front();
            }
            self.samples.push_back((a.send_us as f64 / 1000.0, self.smoothed_ms));
            self.deltas += 1;
        }
        if self.samples.len() < 2 {
            return None;
        }
        let pts: Vec<(f64, f64)> = self.samples.iter().copied().collect();
        let slope = crate::simcore::least_squares_slope(&pts);
        let trend = slope * self.deltas.min(60) as f64 * self.cfg.threshold_gain;
        let dt_ms = FEEDBACK_INTERVAL_US as f64 / 1000.0;
        let abs = trend.abs();
        if abs <= self.threshold_ms + 15.0 {
            let k = if abs < self.threshold_ms {
                self.cfg.k_down
            } else {
                self.cfg.k_up
            };
            self.threshold_ms += k * (abs - self.threshold_ms) * dt_ms;
            self.threshold_ms = self
                .threshold_ms
                .clamp(self.cfg.threshold_min_ms, self.cfg.threshold_max_ms);
        }
        Some(if trend > self.threshold_ms {
            Usage::Overuse
        } else if trend < -self.threshold_ms {
            Usage::Underuse
        } else {
            Usage::Normal
        })
    }

    /// One feedback window of rate control.
    pub fn update(&mut self, report: &FeedbackReport, recent_throughput_kbps: f64, now_us: Micros) -> ControllerDecision {
        let usage = self.detect(report);
        if let Some(u) = usage {
            self.last_usage = u;
            self.state = match (u, self.state) {
                (Usage::Overuse, _) => RateControlState::Decrease,
                (Usage::Underuse, _) => RateControlState::Hold,
                (Usage::Normal, RateControlState::Decrease) => RateControlState::Hold,
                (Usage::Normal, _) => RateControlState::Increase,
            };
        } else {
            self.state = RateControlState::Hold;
        }

        let acked = recent_throughput_kbps;
        let heavy_loss = report.loss_fraction() > self.cfg.loss_decrease_threshold;
        let mut rate = self.rate_kbps;
        if self.state == RateControlState::Decrease || heavy_loss {
            let base = if acked > 0.0 { rate.min(acked) } else { rate };
            rate = base * self.cfg.decrease_factor;
        } else if self.state == RateControlState::Increase {
            rate *= 1.0 + self.cfg.increase_per_window;
            if acked > 0.0 {
                rate = rate.min((acked * self.cfg.throughput_cap_factor + 10.0).max(self.rate_kbps));
            }
        }
        self.rate_kbps = clamp_rate(rate);
        ControllerDecision::new(now_us, self.rate_kbps, Mode::Rule)
    }
}

impl Controller for GccLike {
    fn name(&self) -> String {
        "gcc".into()
    }

    fn initial_decision(&mut self) -> ControllerDecision {
        ControllerDecision::new(0, self.rate_kbps, Mode::Rule)
    }

    fn on_feedback(&mut self, ctx: &FeedbackContext<'_>) -> StepOutput {
        self.update(ctx.report, ctx.recent_throughput_kbps, ctx.now_us).into()
    }
}
