use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::action::{map_action, RateState};
use super::observation::{extract_observation, StateVector, WindowStats, WindowTracker, HISTORY_WINDOWS, STATE_LEN};
use super::policy::PolicyNetwork;
use super::ppo::Transition;
use super::reward::{reward_network, reward_nvc, FrameSample, NetworkSample, RewardConfig, RewardKind};
use crate::controllers::{clamp_rate, Controller, ControllerDecision, Mode, StepOutput};
use crate::simcore::{FeedbackContext, Micros};

pub const INITIAL_RATE_KBPS: f64 = 300.0;

/// Network input derived from an observation: ratios are centred on their
/// steady-state value of 1 and every feature goes through a symmetric log.
pub fn policy_input(s: &StateVector) -> [f64; STATE_LEN] {
    let mut out = [0.0; STATE_LEN];
    for (i, (&x, o)) in s.0.iter().zip(out.iter_mut()).enumerate() {
        let v = if i % 3 == 0 { x } else { x - 1.0 };
        *o = v.signum() * v.abs().ln_1p();
    }
    out
}

/// A learning rate controller driven by a [`PolicyNetwork`].
///
/// In stochastic mode actions are sampled and, when recording, every step is
/// kept as a [`Transition`] for training. Deterministic mode acts on the
/// policy mean.
#[derive(Debug, Clone)]
pub struct RlAgent {
    pub policy: PolicyNetwork,
    reward_cfg: RewardConfig,
    stochastic: bool,
    record: bool,
    rng: ChaCha8Rng,
    name: String,
    tracker: WindowTracker,
    history: VecDeque<WindowStats>,
    rate_kbps: f64,
    pending: Option<Transition>,
    transitions: Vec<Transition>,
    actions: Vec<f64>,
    step_rewards: Vec<f64>,
}

impl RlAgent {
    pub fn new(policy: PolicyNetwork, reward_cfg: RewardConfig, seed: u64) -> Self {
        Self {
            policy,
            reward_cfg,
            stochastic: false,
            record: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            name: "rl".into(),
            tracker: WindowTracker::default(),
            history: VecDeque::with_capacity(HISTORY_WINDOWS),
            rate_kbps: INITIAL_RATE_KBPS,
            pending: None,
            transitions: Vec::new(),
            actions: Vec::new(),
            step_rewards: Vec::new(),
        }
    }

    /// Samples actions and keeps transitions for training.
    pub fn training(mut self) -> Self {
        self.stochastic = true;
        self.record = true;
        self
    }

    pub fn stochastic(mut self, on: bool) -> Self {
        self.stochastic = on;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward_cfg
    }

    pub fn rate_kbps(&self) -> f64 {
        self.rate_kbps
    }

    pub fn set_rate(&mut self, kbps: f64) {
        self.rate_kbps = clamp_rate(kbps);
    }

    /// Clears per-session state, keeping the policy and anything recorded.
    pub fn reset_session(&mut self) {
        self.tracker = WindowTracker::default();
        self.history.clear();
        self.rate_kbps = INITIAL_RATE_KBPS;
        self.pending = None;
    }

    /// Digests one feedback window and returns its reward.
    pub fn observe(&mut self, ctx: &FeedbackContext<'_>) -> f64 {
        let stats = self.tracker.observe(ctx.report);
        if self.history.len() == HISTORY_WINDOWS {
            self.history.pop_front();
        }
        self.history.push_back(stats);
        let reward = match self.reward_cfg.kind {
            RewardKind::Network => {
                let s = NetworkSample {
                    tput_kbps: stats.throughput_kbps(),
                    latency_s: stats.mean_rtt_ms / 1000.0,
                    loss: stats.loss_fraction(),
                };
                reward_network(&[s], &self.reward_cfg)
            }
            RewardKind::Nvc => {
                let fallback_rtt = self.tracker.last_mean_rtt_ms().unwrap_or(0.0);
                let frames: Vec<FrameSample> = ctx
                    .frames
                    .iter()
                    .filter_map(|f| {
                        f.quality_norm.map(|q| FrameSample {
                            quality_norm: q,
                            latency_s: f.mean_rtt_ms.unwrap_or(fallback_rtt) / 1000.0,
                        })
                    })
                    .collect();
                reward_nvc(&frames, &self.reward_cfg)
            }
        };
        self.step_rewards.push(reward);
        reward
    }

    /// Credits `reward` to the previous action. With `terminal_penalty` the
    /// episode segment ends there: nothing is bootstrapped past it and the
    /// penalty is added after reward scaling.
    pub fn credit(&mut self, reward: f64, terminal_penalty: Option<f64>) {
        let Some(p) = self.pending.as_mut() else {
            return;
        };
        p.reward = reward;
        if let Some(pen) = terminal_penalty {
            let mut p = self.pending.take().unwrap();
            p.penalty = pen;
            p.terminal = true;
            p.segment_end = true;
            p.next_value = 0.0;
            if self.record {
                self.transitions.push(p);
            }
        }
    }

    /// Picks the next rate from the current history.
    pub fn act(&mut self, now_us: Micros, recent_throughput_kbps: f64) -> ControllerDecision {
        let hist: Vec<WindowStats> = self.history.iter().copied().collect();
        let input = policy_input(&extract_observation(&hist));
        let c = self.policy.forward(&input).expect("observation features are finite");
        let u = if self.stochastic {
            self.policy.sample(c.mean, &mut self.rng)
        } else {
            c.mean
        };
        let a = u.clamp(-1.0, 1.0);
        self.actions.push(a);
        if let Some(mut prev) = self.pending.take() {
            prev.next_value = c.value;
            if self.record {
                self.transitions.push(prev);
            }
        }
        self.pending = Some(Transition {
            obs: input,
            action: u,
            log_prob: self.policy.log_prob(c.mean, u),
            value: c.value,
            reward: 0.0,
            penalty: 0.0,
            next_value: 0.0,
            terminal: false,
            segment_end: false,
        });
        let rs = RateState {
            x_prev: self.rate_kbps,
            gamma_tput: recent_throughput_kbps,
        };
        self.rate_kbps = map_action(a, rs);
        ControllerDecision::new(now_us, self.rate_kbps, Mode::Rl)
    }

    /// Drops the unrewarded last action; the step before it becomes a
    /// truncated segment end that bootstraps from the dropped step's value.
    pub fn end_session(&mut self) {
        if self.pending.take().is_some() {
            if let Some(last) = self.transitions.last_mut() {
                last.segment_end = true;
            }
        }
    }

    pub fn take_transitions(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.transitions)
    }

    /// Clipped actions taken so far.
    pub fn take_actions(&mut self) -> Vec<f64> {
        std::mem::take(&mut self.actions)
    }

    /// Per-window rewards observed so far.
    pub fn take_rewards(&mut self) -> Vec<f64> {
        std::mem::take(&mut self.step_rewards)
    }
}

impl Controller for RlAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn initial_decision(&mut self) -> ControllerDecision {
        self.reset_session();
        ControllerDecision::new(0, self.rate_kbps, Mode::Rl)
    }

    fn on_feedback(&mut self, ctx: &FeedbackContext<'_>) -> StepOutput {
        let r = self.observe(ctx);
        self.credit(r, None);
        let decision = self.act(ctx.now_us, ctx.recent_throughput_kbps);
        StepOutput {
            decision,
            reward: Some(r),
            switch: None,
        }
    }

    fn on_session_end(&mut self) {
        self.end_session();
    }
}
