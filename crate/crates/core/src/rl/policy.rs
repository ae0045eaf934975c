use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::observation::STATE_LEN;
use crate::{Error, Result};

pub const HIDDEN1: usize = 32;
pub const HIDDEN2: usize = 16;

// Flat parameter layout.
const W1: usize = 0;
const B1: usize = W1 + HIDDEN1 * STATE_LEN;
const W2: usize = B1 + HIDDEN1;
const B2: usize = W2 + HIDDEN2 * HIDDEN1;
const WM: usize = B2 + HIDDEN2;
const BM: usize = WM + HIDDEN2;
const WV: usize = BM + 1;
const BV: usize = WV + HIDDEN2;
const LOG_STD: usize = BV + 1;
pub const PARAM_COUNT: usize = LOG_STD + 1;

/// Architecture tag stored with checkpoints.
pub const ARCHITECTURE: &str = "mlp-30-32-16-tanh/gaussian-tanh-mean/value";

/// Gaussian policy and value function sharing a two-layer tanh trunk.
///
/// The mean head is squashed by tanh so it stays inside the action range;
/// the standard deviation is a free state-independent parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: [f64; STATE_LEN],
    pub h1: [f64; HIDDEN1],
    pub h2: [f64; HIDDEN2],
    pub mean: f64,
    pub value: f64,
}

impl PolicyNetwork {
    /// Uniform fan-in initialisation for the trunk, a small mean head so the
    /// initial policy is centred on "hold", and `log_std = init_log_std`.
    pub fn new<R: Rng>(rng: &mut R, init_log_std: f64) -> Self {
        let mut params = vec![0.0; PARAM_COUNT];
        let mut fill = |from: usize, n: usize, fan_in: usize, gain: f64, rng: &mut R| {
            let bound = gain / (fan_in as f64).sqrt();
            for p in &mut params[from..from + n] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(W1, HIDDEN1 * STATE_LEN, STATE_LEN, 1.0, rng);
        fill(W2, HIDDEN2 * HIDDEN1, HIDDEN1, 1.0, rng);
        fill(WM, HIDDEN2, HIDDEN2, 0.01, rng);
        fill(WV, HIDDEN2, HIDDEN2, 1.0, rng);
        params[LOG_STD] = init_log_std;
        Self { params }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != PARAM_COUNT {
            return Err(Error::Config(format!(
                "policy expects {PARAM_COUNT} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::OutOfRange("policy parameters must be finite".into()));
        }
        Ok(Self { params })
    }

    pub fn log_std(&self) -> f64 {
        self.params[LOG_STD]
    }

    pub fn std(&self) -> f64 {
        self.log_std().exp()
    }

    pub fn forward(&self, input: &[f64; STATE_LEN]) -> Result<ForwardCache> {
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::OutOfRange("policy input must be finite".into()));
        }
        let p = &self.params;
        let mut h1 = [0.0; HIDDEN1];
        for (j, h) in h1.iter_mut().enumerate() {
            let row = &p[W1 + j * STATE_LEN..W1 + (j + 1) * STATE_LEN];
            let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + p[B1 + j];
            *h = z.tanh();
        }
        let mut h2 = [0.0; HIDDEN2];
        for (j, h) in h2.iter_mut().enumerate() {
            let row = &p[W2 + j * HIDDEN1..W2 + (j + 1) * HIDDEN1];
            let z: f64 = row.iter().zip(&h1).map(|(w, x)| w * x).sum::<f64>() + p[B2 + j];
            *h = z.tanh();
        }
        let zm: f64 = p[WM..WM + HIDDEN2].iter().zip(&h2).map(|(w, x)| w * x).sum::<f64>() + p[BM];
        let value: f64 = p[WV..WV + HIDDEN2].iter().zip(&h2).map(|(w, x)| w * x).sum::<f64>() + p[BV];
        Ok(ForwardCache {
            input: *input,
            h1,
            h2,
            mean: zm.tanh(),
            value,
        })
    }

    /// Accumulates into `grad` the gradient of a scalar loss given its
    /// partial derivatives with respect to the mean, the value and log_std.
    pub fn backward(&self, cache: &ForwardCache, d_mean: f64, d_value: f64, d_log_std: f64, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), PARAM_COUNT);
        let p = &self.params;
        let dzm = d_mean * (1.0 - cache.mean * cache.mean);
        grad[BM] += dzm;
        grad[BV] += d_value;
        grad[LOG_STD] += d_log_std;

        let mut da2 = [0.0; HIDDEN2];
        for j in 0..HIDDEN2 {
            grad[WM + j] += dzm * cache.h2[j];
            grad[WV + j] += d_value * cache.h2[j];
            let dh = dzm * p[WM + j] + d_value * p[WV + j];
            da2[j] = dh * (1.0 - cache.h2[j] * cache.h2[j]);
        }

        let mut dh1 = [0.0; HIDDEN1];
        for (j, &d) in da2.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad[B2 + j] += d;
            let row = W2 + j * HIDDEN1;
            for k in 0..HIDDEN1 {
                grad[row + k] += d * cache.h1[k];
                dh1[k] += d * p[row + k];
            }
        }

        for j in 0..HIDDEN1 {
            let d = dh1[j] * (1.0 - cache.h1[j] * cache.h1[j]);
            if d == 0.0 {
                continue;
            }
            grad[B1 + j] += d;
            let row = W1 + j * STATE_LEN;
            for (k, x) in cache.input.iter().enumerate() {
                grad[row + k] += d * x;
            }
        }
    }

    /// Samples a raw (unclipped) action.
    pub fn sample<R: Rng>(&self, mean: f64, rng: &mut R) -> f64 {
        Normal::new(mean, self.std()).map_or(mean, |n| n.sample(rng))
    }

    pub fn log_prob(&self, mean: f64, u: f64) -> f64 {
        gaussian_log_prob(u, mean, self.log_std())
    }

    pub fn entropy(&self) -> f64 {
        gaussian_entropy(self.log_std())
    }
}

pub fn gaussian_log_prob(u: f64, mean: f64, log_std: f64) -> f64 {
    let z = (u - mean) / log_std.exp();
    -0.5 * z * z - log_std - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

pub fn gaussian_entropy(log_std: f64) -> f64 {
    0.5 + 0.5 * (2.0 * std::f64::consts::PI).ln() + log_std
}
