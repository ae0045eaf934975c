//! Rate controllers: a delay-gradient rule-based controller in the style of
//! GCC, an oracle with perfect bandwidth knowledge, and the jitter-triggered
//! safeguard that hands control from a learning policy to the rule-based
//! fallback.

mod gcc;
mod oracle;
mod safeguard;

pub use gcc::{GccConfig, GccLike, RateControlState, Usage};
pub use oracle::{max_payload_rate_kbps, oracle_rate, OracleController};
pub use safeguard::{JitterMonitor, SafeguardConfig, SafeguardController, SafeguardState};

use serde::{Deserialize, Serialize};

use crate::simcore::{FeedbackContext, Micros};

pub const RATE_MIN_KBPS: f64 = 100.0;
pub const RATE_MAX_KBPS: f64 = 8000.0;

pub fn clamp_rate(kbps: f64) -> f64 {
    if kbps.is_nan() {
        return RATE_MIN_KBPS;
    }
    kbps.clamp(RATE_MIN_KBPS, RATE_MAX_KBPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Rl,
    Fallback,
    Rule,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerDecision {
    pub t_us: Micros,
    pub rate_kbps: f64,
    pub mode: Mode,
}

impl ControllerDecision {
    /// Builds a decision with the rate clamped to the global bounds.
    pub fn new(t_us: Micros, rate_kbps: f64, mode: Mode) -> Self {
        Self {
            t_us,
            rate_kbps: clamp_rate(rate_kbps),
            mode,
        }
    }
}

/// A transition between the learning policy and the fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t_us: Micros,
    pub from: Mode,
    pub to: Mode,
    pub jitter_ms: f64,
    pub threshold_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub decision: ControllerDecision,
    /// Reward credited to the previous action, for learning controllers.
    pub reward: Option<f64>,
    pub switch: Option<SwitchEvent>,
}

impl From<ControllerDecision> for StepOutput {
    fn from(decision: ControllerDecision) -> Self {
        Self {
            decision,
            reward: None,
            switch: None,
        }
    }
}

/// A session-confined rate controller.
pub trait Controller {
    fn name(&self) -> String;

    /// Rate in force from time 0 until the first feedback.
    fn initial_decision(&mut self) -> ControllerDecision;

    /// Called once per feedback window.
    fn on_feedback(&mut self, ctx: &FeedbackContext<'_>) -> StepOutput;

    /// Called before each frame is encoded; may override the current rate.
    fn on_frame(&mut self, _now_us: Micros) -> Option<ControllerDecision> {
        None
    }

    fn on_session_end(&mut self) {}
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn initial_decision(&mut self) -> ControllerDecision {
        (**self).initial_decision()
    }

    fn on_feedback(&mut self, ctx: &FeedbackContext<'_>) -> StepOutput {
        (**self).on_feedback(ctx)
    }

    fn on_frame(&mut self, now_us: Micros) -> Option<ControllerDecision> {
        (**self).on_frame(now_us)
    }

    fn on_session_end(&mut self) {
        (**self).on_session_end()
    }
}

/// Holds a fixed rate forever. Handy for link experiments.
#[derive(Debug, Clone)]
pub struct FixedRate(pub f64);

impl Controller for FixedRate {
    fn name(&self) -> String {
        format!("fixed-{}", self.0)
    }

    fn initial_decision(&mut self) -> ControllerDecision {
        ControllerDecision::new(0, self.0, Mode::Rule)
    }

    fn on_feedback(&mut self, ctx: &FeedbackContext<'_>) -> StepOutput {
        ControllerDecision::new(ctx.now_us, self.0, Mode::Rule).into()
    }
}
