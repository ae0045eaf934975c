//! Compares how a loss-tolerant profile and a traditional profile turn
//! bitrate and packet loss into quality, and lists the synthetic variants.
//!
//! ```text
//! cargo run --example codec_profiles
//! ```

use rtclab::codec::{default_nvc_profile, default_traditional_profile, synthetic_profile_set};
use rtclab::metrics::ssim_db;

fn main() -> rtclab::Result<()> {
    let nvc = default_nvc_profile();
    let trad = default_traditional_profile();
    println!("quality in dB (SSIM 0.9 is {:.1} dB)", ssim_db(0.9)?);
    // a traditional frame decodes only once all its packets arrive, so loss
    // costs it delay (retransmissions) rather than quality
    println!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>12}", "kbps", "loss 0", "loss 0.1", "loss 0.3", "loss 0.5", trad.label);
    for kbps in [300.0, 1000.0, 3000.0] {
        print!("{kbps:>8.0}");
        for loss in [0.0, 0.1, 0.3, 0.5] {
            print!(" {:>10.2}", nvc.quality(kbps, loss));
        }
        println!(" {:>12.2}", trad.ceiling(kbps));
    }
    println!("\nsynthetic variants:");
    for p in synthetic_profile_set(5) {
        println!(
            "{:<16} {:>6.0}..{:<6.0} kbps  {:>5.2}..{:<5.2} dB  monotone {}",
            p.label,
            p.min_bitrate(),
            p.max_bitrate(),
            p.floor_db(),
            p.ceiling_db(),
            p.first_monotonicity_violation().is_none()
        );
    }
    Ok(())
}
