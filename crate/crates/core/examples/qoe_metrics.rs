//! The QoE and reward building blocks on small hand-checkable inputs.
//!
//! ```text
//! cargo run --example qoe_metrics
//! ```

use rtclab::metrics::{count_stalls, p98, ssim_db};
use rtclab::rl::{reward_network, reward_nvc, FrameSample, NetworkSample, RewardConfig};

fn main() -> rtclab::Result<()> {
    for s in [0.5, 0.9, 0.99] {
        println!("ssim {s} -> {:.2} dB", ssim_db(s)?);
    }
    let delays: Vec<f64> = (1..=100).map(f64::from).collect();
    println!("p98 of 1..=100 ms: {}", p98(&delays)?);

    // one 260 ms gap between decodes: 60 ms beyond the 200 ms stall threshold
    let (rate, ratio) = count_stalls(&[0.0, 40.0, 300.0, 340.0], 1.0);
    println!("stalls per second {rate}, stalled share {ratio}");

    let net = reward_network(
        &[NetworkSample {
            tput_kbps: 1000.0,
            latency_s: 0.1,
            loss: 0.01,
        }],
        &RewardConfig::network(),
    );
    let frame = reward_nvc(
        &[FrameSample {
            quality_norm: 0.8,
            latency_s: 0.1,
        }],
        &RewardConfig::nvc(),
    );
    println!("network reward {net}, frame-quality reward {frame}");
    Ok(())
}
