//! Learning rate control: observations built from feedback windows, the
//! action-to-rate mapping, network-level and frame-quality rewards, a small
//! tanh policy/value network, and a PPO trainer written from scratch.

mod action;
mod agent;
mod convergence;
mod observation;
mod policy;
mod ppo;
mod reward;
mod train;

pub use action::{map_action, RateState};
pub use agent::{policy_input, RlAgent, INITIAL_RATE_KBPS};
pub use convergence::check_convergence;
pub use observation::{
    extract_observation, StateVector, WindowStats, WindowTracker, FEATURES_PER_WINDOW, HISTORY_WINDOWS, STATE_LEN,
};
pub use policy::{
    gaussian_entropy, gaussian_log_prob, ForwardCache, PolicyNetwork, ARCHITECTURE, HIDDEN1, HIDDEN2, PARAM_COUNT,
};
pub use ppo::{
    build_samples, clip_grad_norm, compute_gae, gradient_check, ppo_loss_and_grad, ppo_update, Adam, LossParts,
    PpoHyper, Sample, Transition,
};
pub use reward::{reward_network, reward_nvc, FrameSample, NetworkSample, RewardConfig, RewardKind};
pub use train::{
    evaluate_policy, frame_reward, run_episode, train, ActionStats, CurvePoint, EpisodeOutcome, EpisodeSummary,
    RunningStat, TraceSource, TrainConfig, TrainEnv, TrainState, CHECKPOINT_VERSION,
};
