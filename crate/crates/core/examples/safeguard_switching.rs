//! Runs a barely trained policy under the jitter safeguard on a
//! shallow-queue link and prints every mode switch.
//!
//! ```text
//! cargo run --release --example safeguard_switching -- [train_steps]
//! ```

use rtclab::codec::{default_nvc_profile, synthetic_profile_set};
use rtclab::controllers::SafeguardConfig;
use rtclab::rl::{run_episode, train, RewardConfig, TraceSource, TrainConfig, TrainEnv};
use rtclab::simcore::FEEDBACK_INTERVAL_US;
use rtclab::traces::{generate_trace, generate_traces, Span, TraceGenParams};

fn main() -> rtclab::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let traces = generate_traces(&TraceGenParams::default(), 3, 11)?;
    let env = TrainEnv {
        traces: TraceSource::Fixed(traces.clone()),
        profiles: synthetic_profile_set(2),
        validation_traces: traces,
        validation_profiles: synthetic_profile_set(2),
    };
    let cfg = TrainConfig {
        reward: RewardConfig::network(),
        safeguard: Some(SafeguardConfig::default()),
        total_steps: steps,
        seed: 2,
        ..Default::default()
    };
    let st = train(&env, None, cfg.clone(), |_| Ok(()))?;

    // 30 KB of buffer at 25 ms one-way delay
    let shallow = TraceGenParams {
        min_rtt_ms: Span::fixed(50.0),
        queue_packets: Span::fixed(24.0),
        loss: Span::fixed(0.0),
        ..Default::default()
    };
    let trace = generate_trace(&shallow, 5)?;
    let out = run_episode(&st.policy, &cfg, &trace, &default_nvc_profile(), 9)?;
    for s in &out.log.switches {
        println!(
            "{:>7.2} s  {:?} -> {:?}  jitter {:>5.2} ms  threshold {:>5.2} ms",
            s.t_us as f64 / 1e6,
            s.from,
            s.to,
            s.jitter_ms,
            s.threshold_ms
        );
    }
    println!(
        "{} switches, {:.2} s in fallback after {steps} training steps",
        out.log.switches.len(),
        out.fallback_windows() as f64 * FEEDBACK_INTERVAL_US as f64 / 1e6
    );
    Ok(())
}
