use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Controller, ControllerDecision, GccConfig, GccLike, Mode, StepOutput, SwitchEvent};
use crate::rl::RlAgent;
use crate::simcore::{FeedbackContext, Micros};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafeguardConfig {
    /// Higher values lower the trigger threshold and switch more often.
    pub sensitivity: f64,
    /// Consecutive calm windows required before control returns to the
    /// policy.
    pub dwell_windows: usize,
    /// Added to the reward of the action that caused a switch.
    pub switch_penalty: f64,
    /// Windows in the running median of jitter.
    pub median_window: usize,
    /// Lower bound on the jitter baseline (ms).
    pub floor_ms: f64,
}

impl Default for SafeguardConfig {
    fn default() -> Self {
        Self {
            sensitivity: 1.0,
            dwell_windows: 4,
            switch_penalty: -1.0,
            median_window: 20,
            floor_ms: 2.0,
        }
    }
}

impl SafeguardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sensitivity.is_finite() && self.sensitivity > 0.0) {
            return Err(Error::Config(format!(
                "safeguard sensitivity must be positive, got {}",
                self.sensitivity
            )));
        }
        if self.dwell_windows == 0 || self.median_window == 0 {
            return Err(Error::Config("safeguard windows must be at least 1".into()));
        }
        if !(self.floor_ms.is_finite() && self.floor_ms > 0.0) {
            return Err(Error::Config("safeguard floor must be positive".into()));
        }
        Ok(())
    }
}

/// Running median of per-window RTT jitter.
#[derive(Debug, Clone)]
pub struct JitterMonitor {
    window: usize,
    floor_ms: f64,
    history: VecDeque<f64>,
}

impl JitterMonitor {
    pub fn new(window: usize, floor_ms: f64) -> Self {
        Self {
            window,
            floor_ms,
            history: VecDeque::with_capacity(window),
        }
    }

    pub fn median(&self) -> Option<f64> {
        if self.history.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = self.history.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        })
    }

    /// Typical jitter: the running median, never below the floor.
    pub fn baseline(&self) -> f64 {
        self.median().map_or(self.floor_ms, |m| m.max(self.floor_ms))
    }

    pub fn push(&mut self, jitter_ms: f64) {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(jitter_ms);
    }
}

/// The switching state machine, separate from any controller so it can be
/// replayed on a recorded jitter sequence.
///
/// In RL mode a window whose jitter exceeds `baseline / sensitivity` hands
/// control to the fallback. In fallback mode, `dwell_windows` consecutive
/// windows at or below the baseline hand it back. Thresholds use the history
/// before the current window.
#[derive(Debug, Clone)]
pub struct SafeguardState {
    cfg: SafeguardConfig,
    monitor: JitterMonitor,
    mode: Mode,
    calm: usize,
}

impl SafeguardState {
    pub fn new(cfg: SafeguardConfig) -> Self {
        Self {
            monitor: JitterMonitor::new(cfg.median_window, cfg.floor_ms),
            cfg,
            mode: Mode::Rl,
            calm: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn trigger_threshold_ms(&self) -> f64 {
        self.monitor.baseline() / self.cfg.sensitivity
    }

    pub fn step(&mut self, t_us: Micros, jitter_ms: f64) -> Option<SwitchEvent> {
        let baseline = self.monitor.baseline();
        let trigger = baseline / self.cfg.sensitivity;
        let event = match self.mode {
            Mode::Rl if jitter_ms > trigger => {
                self.mode = Mode::Fallback;
                self.calm = 0;
                Some(SwitchEvent {
                    t_us,
                    from: Mode::Rl,
                    to: Mode::Fallback,
                    jitter_ms,
                    threshold_ms: trigger,
                })
            }
            Mode::Fallback => {
                if jitter_ms <= baseline {
                    self.calm += 1;
                } else {
                    self.calm = 0;
                }
                (self.calm >= self.cfg.dwell_windows).then(|| {
                    self.mode = Mode::Rl;
                    self.calm = 0;
                    SwitchEvent {
                        t_us,
                        from: Mode::Fallback,
                        to: Mode::Rl,
                        jitter_ms,
                        threshold_ms: baseline,
                    }
                })
            }
            _ => None,
        };
        self.monitor.push(jitter_ms);
        event
    }
}

/// Runs a learning policy and falls back to [`GccLike`] while RTT jitter is
/// abnormally high.
#[derive(Debug, Clone)]
pub struct SafeguardController {
    pub agent: RlAgent,
    cfg: SafeguardConfig,
    gcc_cfg: GccConfig,
    state: SafeguardState,
    fallback: GccLike,
    name: String,
}

impl SafeguardController {
    pub fn new(agent: RlAgent, cfg: SafeguardConfig) -> Result<Self> {
        cfg.validate()?;
        let name = format!("{}+safeguard", agent.name());
        let gcc_cfg = GccConfig::default();
        Ok(Self {
            agent,
            cfg,
            gcc_cfg,
            state: SafeguardState::new(cfg),
            fallback: GccLike::new(gcc_cfg),
            name,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn mode(&self) -> Mode {
        self.state.mode()
    }
}

impl Controller for SafeguardController {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn initial_decision(&mut self) -> ControllerDecision {
        self.state = SafeguardState::new(self.cfg);
        self.fallback = GccLike::new(self.gcc_cfg);
        self.agent.initial_decision()
    }

    fn on_feedback(&mut self, ctx: &FeedbackContext<'_>) -> StepOutput {
        let jitter = ctx.report.rtt_std_ms();
        let reward = self.agent.observe(ctx);
        let before = self.state.mode();
        let switch = self.state.step(ctx.now_us, jitter);
        let decision = match (before, self.state.mode()) {
            (Mode::Rl, Mode::Rl) => {
                self.agent.credit(reward, None);
                self.agent.act(ctx.now_us, ctx.recent_throughput_kbps)
            }
            (Mode::Rl, _) => {
                self.agent.credit(reward, Some(self.cfg.switch_penalty));
                self.fallback.reset_rate(ctx.current_rate_kbps);
                self.fallback_step(ctx)
            }
            (_, Mode::Rl) => {
                self.agent.set_rate(ctx.current_rate_kbps);
                self.agent.act(ctx.now_us, ctx.recent_throughput_kbps)
            }
            _ => self.fallback_step(ctx),
        };
        StepOutput {
            decision,
            reward: Some(reward),
            switch,
        }
    }

    fn on_session_end(&mut self) {
        self.agent.end_session();
    }
}

impl SafeguardController {
    fn fallback_step(&mut self, ctx: &FeedbackContext<'_>) -> ControllerDecision {
        let d = self
            .fallback
            .update(ctx.report, ctx.recent_throughput_kbps, ctx.now_us);
        ControllerDecision::new(d.t_us, d.rate_kbps, Mode::Fallback)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replay(cfg: SafeguardConfig, jitter: &[f64]) -> Vec<SwitchEvent> {
        let mut s = SafeguardState::new(cfg);
        jitter
            .iter()
            .enumerate()
            .filter_map(|(i, &j)| s.step(i as Micros * 50_000, j))
            .collect()
    }

    #[test]
    fn median_of_even_and_odd() {
        let mut m = JitterMonitor::new(4, 0.0);
        for j in [4.0, 1.0, 3.0] {
            m.push(j);
        }
        assert_eq!(m.median(), Some(3.0));
        m.push(10.0);
        assert_eq!(m.median(), Some(3.5));
        m.push(0.0);
        assert_eq!(m.median(), Some(2.0));
    }

    #[test]
    fn spike_switches_and_calm_returns() {
        let mut j = vec![1.0; 30];
        j.push(50.0);
        j.extend([1.0; 10]);
        let ev = replay(SafeguardConfig::default(), &j);
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].from, ev[0].to), (Mode::Rl, Mode::Fallback));
        assert_eq!(ev[0].t_us, 30 * 50_000);
        assert_eq!((ev[1].from, ev[1].to), (Mode::Fallback, Mode::Rl));
        assert_eq!(ev[1].t_us, 34 * 50_000);
    }

    #[test]
    fn transitions_alternate() {
        let j: Vec<f64> = (0..500).map(|i| ((i * 7919) % 23) as f64).collect();
        let ev = replay(SafeguardConfig::default(), &j);
        for w in ev.windows(2) {
            assert_eq!(w[0].to, w[1].from);
        }
    }

    #[test]
    fn rejects_non_positive_sensitivity() {
        let cfg = SafeguardConfig {
            sensitivity: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
