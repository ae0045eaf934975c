use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::RlAgent;
use super::policy::{PolicyNetwork, ARCHITECTURE, PARAM_COUNT};
use super::ppo::{build_samples, ppo_update, Adam, PpoHyper, Transition};
use super::reward::RewardConfig;
use crate::codec::{CodecProfile, CodecSession};
use crate::controllers::{Mode, SafeguardConfig, SafeguardController};
use crate::simcore::{run_session, SessionConfig, SessionLog};
use crate::traces::{generate_trace, NetworkTrace, TraceGenParams};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub reward: RewardConfig,
    pub safeguard: Option<SafeguardConfig>,
    pub total_steps: u64,
    pub seed: u64,
    pub hyper: PpoHyper,
    pub session: SessionConfig,
    /// Evaluate on the validation set after this many updates.
    pub eval_every_updates: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            reward: RewardConfig::nvc(),
            safeguard: None,
            total_steps: 50_000,
            seed: 0,
            hyper: PpoHyper::default(),
            session: SessionConfig::default(),
            eval_every_updates: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    /// Episodes draw uniformly from a fixed set.
    Fixed(Vec<NetworkTrace>),
    /// Each episode gets a freshly generated trace.
    Generated(TraceGenParams),
}

/// Where training and validation episodes come from.
#[derive(Debug, Clone)]
pub struct TrainEnv {
    pub traces: TraceSource,
    /// Drawn uniformly per episode.
    pub profiles: Vec<CodecProfile>,
    pub validation_traces: Vec<NetworkTrace>,
    pub validation_profiles: Vec<CodecProfile>,
}

impl TrainEnv {
    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::Empty("training profile set"));
        }
        if let TraceSource::Fixed(t) = &self.traces {
            if t.is_empty() {
                return Err(Error::Empty("training trace set"));
            }
        }
        if let TraceSource::Generated(p) = &self.traces {
            p.validate()?;
        }
        for p in self.profiles.iter().chain(&self.validation_profiles) {
            p.validate()?;
        }
        Ok(())
    }
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStat {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }
}

/// Empirical distribution of sampled (clipped) actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    /// Counts over equal-width bins spanning `[-1, 1]`.
    pub bins: Vec<u64>,
    pub increases: u64,
    pub decreases: u64,
    pub total: u64,
}

impl Default for ActionStats {
    fn default() -> Self {
        Self {
            bins: vec![0; 40],
            increases: 0,
            decreases: 0,
            total: 0,
        }
    }
}

impl ActionStats {
    pub fn push(&mut self, a: f64) {
        let a = a.clamp(-1.0, 1.0);
        let nb = self.bins.len();
        let i = (((a + 1.0) / 2.0 * nb as f64) as usize).min(nb - 1);
        self.bins[i] += 1;
        self.total += 1;
        if a > 0.0 {
            self.increases += 1;
        } else if a < 0.0 {
            self.decreases += 1;
        }
    }

    /// Share of actions that raise the rate.
    pub fn increase_share(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.increases as f64 / self.total as f64
        }
    }

    /// `(upper bin edge, cumulative share)` for every bin.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let nb = self.bins.len();
        let mut acc = 0;
        self.bins
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                acc += c;
                let edge = -1.0 + 2.0 * (i + 1) as f64 / nb as f64;
                (edge, acc as f64 / self.total.max(1) as f64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub steps: u64,
    pub wall_seconds: f64,
    pub validation_reward: f64,
    /// Cumulative safeguard transitions during training.
    pub mode_switches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub steps_after: u64,
    pub trace: String,
    pub profile: String,
    pub switches: u64,
    pub fallback_windows: u64,
    pub mean_reward: f64,
}

/// Everything needed to resume training; this is the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub version: u32,
    pub architecture: String,
    pub config: TrainConfig,
    pub policy: PolicyNetwork,
    pub adam: Adam,
    pub steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub wall_seconds: f64,
    pub reward_stat: RunningStat,
    pub switches: u64,
    pub fallback_windows: u64,
    pub actions: ActionStats,
    pub curve: Vec<CurvePoint>,
    pub episode_log: Vec<EpisodeSummary>,
}

impl TrainState {
    pub fn new(config: TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let policy = PolicyNetwork::new(&mut rng, config.hyper.init_log_std);
        Self {
            version: CHECKPOINT_VERSION,
            architecture: ARCHITECTURE.into(),
            adam: Adam::new(PARAM_COUNT, config.hyper.learning_rate),
            config,
            policy,
            steps: 0,
            updates: 0,
            episodes: 0,
            wall_seconds: 0.0,
            reward_stat: RunningStat::default(),
            switches: 0,
            fallback_windows: 0,
            actions: ActionStats::default(),
            curve: Vec::new(),
            episode_log: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let s: Self = serde_json::from_reader(std::io::BufReader::new(f))?;
        if s.version != CHECKPOINT_VERSION || s.architecture != ARCHITECTURE {
            return Err(Error::Config(format!(
                "{}: checkpoint v{} '{}' does not match v{} '{}'",
                path.display(),
                s.version,
                s.architecture,
                CHECKPOINT_VERSION,
                ARCHITECTURE
            )));
        }
        PolicyNetwork::from_params(s.policy.params.clone())?;
        Ok(s)
    }

    /// Writes the learning curve as CSV: steps, wall_seconds,
    /// validation_reward, mode_switches.
    pub fn write_curve_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for p in &self.curve {
            out.serialize(p)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// What one training episode produced.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub log: SessionLog,
    pub transitions: Vec<Transition>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl EpisodeOutcome {
    pub fn steps(&self) -> u64 {
        self.log.rewards.len() as u64
    }

    pub fn fallback_windows(&self) -> u64 {
        self.log
            .decisions
            .iter()
            .filter(|d| d.mode == Mode::Fallback)
            .count() as u64
    }
}

/// Runs one stochastic, recording session of `policy`.
pub fn run_episode(
    policy: &PolicyNetwork,
    cfg: &TrainConfig,
    trace: &NetworkTrace,
    profile: &CodecProfile,
    seed: u64,
) -> Result<EpisodeOutcome> {
    let agent = RlAgent::new(policy.clone(), cfg.reward, seed ^ 0x5eed).training();
    let codec = CodecSession::new(profile.clone());
    let (log, mut agent) = match cfg.safeguard {
        Some(sg) => {
            let mut c = SafeguardController::new(agent, sg)?;
            let log = run_session(trace, &mut c, codec, &cfg.session, seed)?;
            (log, c.agent)
        }
        None => {
            let mut a = agent;
            let log = run_session(trace, &mut a, codec, &cfg.session, seed)?;
            (log, a)
        }
    };
    Ok(EpisodeOutcome {
        log,
        transitions: agent.take_transitions(),
        actions: agent.take_actions(),
        rewards: agent.take_rewards(),
    })
}

/// Per-frame frame-quality reward averaged over a session's decoded frames.
pub fn frame_reward(log: &SessionLog, latency_coef: f64) -> Option<f64> {
    let vals: Vec<f64> = log
        .frames
        .iter()
        .filter_map(|f| {
            let q = f.quality_norm?.clamp(0.0, 1.0);
            let rtt = f.mean_rtt_ms.unwrap_or(2.0 * crate::simcore::us_to_ms(log.meta.owd_us));
            Some(q - latency_coef * rtt / 1000.0)
        })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean frame-quality reward of the policy, without any safeguard, over every
/// validation trace and profile. Actions are sampled with fixed seeds: the
/// Gaussian policy is what training optimises, and its mean alone can behave
/// quite differently because the rate map reacts asymmetrically to negative
/// actions.
pub fn evaluate_policy(policy: &PolicyNetwork, env: &TrainEnv, session: &SessionConfig) -> Result<f64> {
    let coef = RewardConfig::nvc().nvc_latency_coef;
    let jobs: Vec<(usize, usize)> = (0..env.validation_traces.len())
        .flat_map(|t| (0..env.validation_profiles.len()).map(move |p| (t, p)))
        .collect();
    if jobs.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let scores: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(t, p)| {
            let mut agent = RlAgent::new(policy.clone(), RewardConfig::nvc(), 77 + t as u64).stochastic(true);
            let codec = CodecSession::new(env.validation_profiles[p].clone());
            let log = run_session(&env.validation_traces[t], &mut agent, codec, session, 1_000 + t as u64)?;
            Ok(frame_reward(&log, coef).unwrap_or(0.0))
        })
        .collect();
    let mut sum = 0.0;
    for s in scores {
        sum += s?;
    }
    Ok(sum / jobs.len() as f64)
}

fn episode_seed(seed: u64, episode: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(episode);
    rng.gen()
}

/// Trains (or resumes training of) a policy until `config.total_steps`
/// environment windows have been simulated. Steps count every feedback
/// window, including those controlled by the safeguard's fallback; only
/// policy-controlled steps enter PPO batches.
///
/// `on_update` sees the state after every update, for checkpointing.
pub fn train(
    env: &TrainEnv,
    resume: Option<TrainState>,
    config: TrainConfig,
    mut on_update: impl FnMut(&TrainState) -> Result<()>,
) -> Result<TrainState> {
    env.validate()?;
    if let Some(sg) = &config.safeguard {
        sg.validate()?;
    }
    let mut st = match resume {
        Some(mut s) => {
            s.config.total_steps = config.total_steps;
            s
        }
        None => TrainState::new(config),
    };
    let cfg = st.config.clone();
    if cfg.total_steps == 0 {
        return Ok(st);
    }
    let started = Instant::now();
    let base_wall = st.wall_seconds;
    let wall = |started: &Instant| base_wall + started.elapsed().as_secs_f64();

    if st.curve.is_empty() {
        let v = evaluate_policy(&st.policy, env, &cfg.session)?;
        st.curve.push(CurvePoint {
            steps: 0,
            wall_seconds: wall(&started),
            validation_reward: v,
            mode_switches: 0,
        });
    }

    let steps_per_episode = (cfg.session.duration_s * 20.0).floor().max(1.0) as u64;
    while st.steps < cfg.total_steps {
        let remaining = cfg.total_steps - st.steps;
        let want = (cfg.hyper.rollout_steps as u64).min(remaining);
        let n_eps = want.div_ceil(steps_per_episode).max(1);

        let plans: Vec<(u64, NetworkTrace, CodecProfile)> = (0..n_eps)
            .map(|k| {
                let ep = st.episodes + k;
                let seed = episode_seed(cfg.seed, ep);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let trace = match &env.traces {
                    TraceSource::Fixed(ts) => Ok(ts[rng.gen_range(0..ts.len())].clone()),
                    TraceSource::Generated(p) => generate_trace(p, seed),
                }?;
                let profile = env.profiles[rng.gen_range(0..env.profiles.len())].clone();
                Ok((seed, trace, profile))
            })
            .collect::<Result<_>>()?;
        let outcomes: Vec<Result<EpisodeOutcome>> = plans
            .par_iter()
            .map(|(seed, trace, profile)| run_episode(&st.policy, &cfg, trace, profile, *seed))
            .collect();

        let mut batch: Vec<Transition> = Vec::new();
        for (k, out) in outcomes.into_iter().enumerate() {
            let out = out?;
            st.steps += out.steps();
            let switches = out.log.switches.len() as u64;
            let fallback = out.fallback_windows();
            st.switches += switches;
            st.fallback_windows += fallback;
            for &a in &out.actions {
                st.actions.push(a);
            }
            for t in &out.transitions {
                st.reward_stat.push(t.reward);
            }
            let mean_reward = if out.rewards.is_empty() {
                0.0
            } else {
                out.rewards.iter().sum::<f64>() / out.rewards.len() as f64
            };
            st.episode_log.push(EpisodeSummary {
                episode: st.episodes,
                steps_after: st.steps,
                trace: plans[k].1.label.clone(),
                profile: plans[k].2.label.clone(),
                switches,
                fallback_windows: fallback,
                mean_reward,
            });
            st.episodes += 1;
            batch.extend(out.transitions);
        }

        if !batch.is_empty() {
            let scale = st.reward_stat.std();
            let scale = if scale > 1e-8 { scale } else { 1.0 };
            let centre = st.reward_stat.mean;
            for t in &mut batch {
                t.reward = (t.reward - centre) / scale;
            }
            let samples = build_samples(&batch, &cfg.hyper);
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed ^ 0xada0, st.updates));
            let parts = ppo_update(&mut st.policy, &mut st.adam, &samples, &cfg.hyper, &mut rng);
            log::debug!(
                "update {} steps {} loss {:.4} kl {:.4} clip {:.3} std {:.3}",
                st.updates,
                st.steps,
                parts.total,
                parts.approx_kl,
                parts.clip_fraction,
                st.policy.std()
            );
        }
        st.updates += 1;

        let last = st.steps >= cfg.total_steps;
        if last || st.updates % cfg.eval_every_updates.max(1) == 0 {
            let v = evaluate_policy(&st.policy, env, &cfg.session)?;
            st.curve.push(CurvePoint {
                steps: st.steps,
                wall_seconds: wall(&started),
                validation_reward: v,
                mode_switches: st.switches,
            });
        }
        st.wall_seconds = wall(&started);
        on_update(&st)?;
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::default_nvc_profile;

    fn env() -> TrainEnv {
        let t = NetworkTrace::constant("c2", 2.0, 30.0, 40.0, 0.0, 50).unwrap();
        TrainEnv {
            traces: TraceSource::Fixed(vec![t.clone()]),
            profiles: vec![default_nvc_profile()],
            validation_traces: vec![t],
            validation_profiles: vec![default_nvc_profile()],
        }
    }

    #[test]
    fn zero_steps_returns_initial_net() {
        let cfg = TrainConfig {
            total_steps: 0,
            ..Default::default()
        };
        let st = train(&env(), None, cfg.clone(), |_| Ok(())).unwrap();
        assert!(st.curve.is_empty());
        assert_eq!(st.policy, TrainState::new(cfg).policy);
    }

    #[test]
    fn running_stat_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 3.25];
        let mut s = RunningStat::default();
        xs.iter().for_each(|&x| s.push(x));
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean - m).abs() < 1e-12);
        assert!((s.std() - v.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn action_stats_shares_and_cdf() {
        let mut a = ActionStats::default();
        for x in [-1.0, -0.5, 0.0, 0.2, 0.9, 1.0] {
            a.push(x);
        }
        assert_eq!(a.increases, 3);
        assert_eq!(a.decreases, 2);
        assert_eq!(a.increase_share(), 0.5);
        let cdf = a.cdf();
        assert_eq!(cdf.last().unwrap(), &(1.0, 1.0));
        assert!(cdf.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}
