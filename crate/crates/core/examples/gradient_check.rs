//! Checks the analytic PPO gradient against central finite differences on a
//! random network and buffer.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtclab::rl::{gradient_check, PolicyNetwork, PpoHyper, Sample, PARAM_COUNT, STATE_LEN};

fn main() -> rtclab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = PolicyNetwork::new(&mut rng, -1.0);
    let mut buf = Vec::new();
    for _ in 0..8 {
        let mut obs = [0.0; STATE_LEN];
        obs.iter_mut().for_each(|x| *x = rng.gen_range(-2.0..2.0));
        let mean = net.forward(&obs)?.mean;
        let action = mean + rng.gen_range(-0.3..0.3);
        buf.push(Sample {
            obs,
            action,
            log_prob_old: net.log_prob(mean, action),
            advantage: rng.gen_range(-1.0..1.0),
            ret: rng.gen_range(-1.0..1.0),
        });
    }
    let err = gradient_check(&net, &buf, &PpoHyper::default(), 1e-5, 1e-6);
    println!("{PARAM_COUNT} parameters, max relative error {err:.2e}");
    Ok(())
}
