//! Trains a rate-control policy with the frame-quality reward on freshly
//! generated traces and writes the checkpoint, learning curve and action
//! statistics. Rerunning with more steps resumes from the checkpoint.
//!
//! ```text
//! cargo run --release --example train_policy -- [run_dir] [steps]
//! ```

use std::path::PathBuf;

use rtclab::experiment::{run_training, ProfileSpec, TraceSpec, TrainSpec};
use rtclab::rl::{check_convergence, RewardConfig, TrainConfig};
use rtclab::traces::TraceGenParams;

fn main() -> rtclab::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "rtclab-out/example-train/run".into()));
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);

    let spec = TrainSpec {
        traces: TraceSpec::PerEpisode {
            params: TraceGenParams::default(),
        },
        validation: TraceSpec::Generated {
            count: 3,
            seed: 11,
            params: TraceGenParams::default(),
        },
        profiles: ProfileSpec::Synthetic { count: 2 },
        validation_profiles: None,
        config: TrainConfig {
            reward: RewardConfig::nvc(),
            total_steps: steps,
            ..Default::default()
        },
    };
    let resume = dir.join("checkpoint.json").exists();
    let st = run_training(&spec, &dir, resume, false)?;
    for p in &st.curve {
        println!(
            "step {:>7}  {:>6.1} s  validation reward {:.3}",
            p.steps, p.wall_seconds, p.validation_reward
        );
    }
    let vals: Vec<f64> = st.curve.iter().map(|p| p.validation_reward).collect();
    match check_convergence(&vals, 0.10, None) {
        Some(i) => println!("converged at step {}", st.curve[i].steps),
        None => println!("not converged yet"),
    }
    println!(
        "{} steps, rate-increase share {:.2}, checkpoint in {}",
        st.steps,
        st.actions.increase_share(),
        dir.display()
    );
    Ok(())
}
