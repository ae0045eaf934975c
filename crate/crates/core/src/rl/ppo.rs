use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::observation::STATE_LEN;
use super::policy::{gaussian_entropy, gaussian_log_prob, PolicyNetwork, PARAM_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoHyper {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Environment steps collected per update.
    pub rollout_steps: usize,
    pub init_log_std: f64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            rollout_steps: 2048,
            init_log_std: -1.6,
        }
    }
}

/// One policy step as recorded during a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: [f64; STATE_LEN],
    /// Raw Gaussian sample, before clipping to the action range.
    pub action: f64,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    /// Added to `reward` after any reward scaling.
    pub penalty: f64,
    /// Value estimate of the following state; ignored when `terminal`.
    pub next_value: f64,
    /// No bootstrapping past this step.
    pub terminal: bool,
    /// Advantage estimation stops after this step (terminal or truncated).
    pub segment_end: bool,
}

/// Generalized advantage estimation over a list of transitions laid out as
/// consecutive segments. Returns `(advantages, returns)`.
pub fn compute_gae(ts: &[Transition], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ts.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for i in (0..n).rev() {
        let t = &ts[i];
        if t.segment_end {
            running = 0.0;
        }
        let boot = if t.terminal { 0.0 } else { t.next_value };
        let delta = t.reward + t.penalty + gamma * boot - t.value;
        running = delta + gamma * lambda * running;
        adv[i] = running;
    }
    let ret = adv.iter().zip(ts).map(|(a, t)| a + t.value).collect();
    (adv, ret)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: [f64; STATE_LEN],
    pub action: f64,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Clipped-surrogate PPO loss over `batch[idx]` and its exact gradient.
pub fn ppo_loss_and_grad(net: &PolicyNetwork, batch: &[Sample], idx: &[usize], hp: &PpoHyper) -> (LossParts, Vec<f64>) {
    let mut grad = vec![0.0; PARAM_COUNT];
    let mut parts = LossParts::default();
    if idx.is_empty() {
        return (parts, grad);
    }
    let n = idx.len() as f64;
    let log_std = net.log_std();
    let var = (2.0 * log_std).exp();
    let (lo, hi) = (1.0 - hp.clip, 1.0 + hp.clip);
    for &i in idx {
        let s = &batch[i];
        let c = net.forward(&s.obs).expect("finite observation");
        let lp = gaussian_log_prob(s.action, c.mean, log_std);
        let ratio = (lp - s.log_prob_old).exp();
        let unclipped = ratio * s.advantage;
        let clipped = ratio.clamp(lo, hi) * s.advantage;
        parts.policy -= unclipped.min(clipped) / n;
        if !(lo..=hi).contains(&ratio) {
            parts.clip_fraction += 1.0 / n;
        }
        parts.approx_kl += (s.log_prob_old - lp) / n;
        let verr = c.value - s.ret;
        parts.value += verr * verr / n;

        // d(-min)/d(logp): only the unclipped branch depends on the params
        let d_lp = if unclipped <= clipped { -unclipped / n } else { 0.0 };
        let diff = s.action - c.mean;
        let d_mean = d_lp * diff / var;
        let d_log_std = d_lp * (diff * diff / var - 1.0);
        let d_value = hp.value_coef * 2.0 * verr / n;
        net.backward(&c, d_mean, d_value, d_log_std, &mut grad);
    }
    parts.entropy = gaussian_entropy(log_std);
    grad[PARAM_COUNT - 1] -= hp.entropy_coef;
    parts.total = parts.policy + hp.value_coef * parts.value - hp.entropy_coef * parts.entropy;
    (parts, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let b1 = 1.0 - self.beta1.powi(self.step as i32);
        let b2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1;
            let vh = self.v[i] / b2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` so its L2 norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

/// Builds training samples from a rollout, normalizing advantages over the
/// whole rollout.
pub fn build_samples(ts: &[Transition], hp: &PpoHyper) -> Vec<Sample> {
    let (adv, ret) = compute_gae(ts, hp.gamma, hp.lambda);
    let n = adv.len().max(1) as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    ts.iter()
        .zip(adv.iter().zip(ret))
        .map(|(t, (&a, r))| Sample {
            obs: t.obs,
            action: t.action,
            log_prob_old: t.log_prob,
            advantage: (a - mean) / (std + 1e-8),
            ret: r,
        })
        .collect()
}

/// Several epochs of shuffled minibatch updates. Returns the mean loss parts
/// of the last epoch.
pub fn ppo_update<R: Rng>(
    net: &mut PolicyNetwork,
    adam: &mut Adam,
    samples: &[Sample],
    hp: &PpoHyper,
    rng: &mut R,
) -> LossParts {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut last = LossParts::default();
    for _ in 0..hp.epochs {
        order.shuffle(rng);
        let mut acc = LossParts::default();
        let mut batches = 0.0;
        for chunk in order.chunks(hp.minibatch.max(1)) {
            let (parts, mut grad) = ppo_loss_and_grad(net, samples, chunk, hp);
            clip_grad_norm(&mut grad, hp.max_grad_norm);
            adam.apply(&mut net.params, &grad);
            acc.policy += parts.policy;
            acc.value += parts.value;
            acc.entropy += parts.entropy;
            acc.total += parts.total;
            acc.clip_fraction += parts.clip_fraction;
            acc.approx_kl += parts.approx_kl;
            batches += 1.0;
        }
        if batches > 0.0 {
            last = LossParts {
                policy: acc.policy / batches,
                value: acc.value / batches,
                entropy: acc.entropy / batches,
                total: acc.total / batches,
                clip_fraction: acc.clip_fraction / batches,
                approx_kl: acc.approx_kl / batches,
            };
        }
    }
    last
}

/// Largest per-parameter relative error between the analytic PPO gradient
/// and central finite differences, using `max(|a|, |n|, floor)` as the
/// denominator.
pub fn gradient_check(net: &PolicyNetwork, batch: &[Sample], hp: &PpoHyper, eps: f64, floor: f64) -> f64 {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (_, analytic) = ppo_loss_and_grad(net, batch, &idx, hp);
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in 0..PARAM_COUNT {
        let orig = probe.params[i];
        probe.params[i] = orig + eps;
        let up = ppo_loss_and_grad(&probe, batch, &idx, hp).0.total;
        probe.params[i] = orig - eps;
        let down = ppo_loss_and_grad(&probe, batch, &idx, hp).0.total;
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}
