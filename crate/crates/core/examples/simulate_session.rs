//! Runs the rule-based and oracle controllers over one trace and prints the
//! QoE of each session.
//!
//! ```text
//! cargo run --example simulate_session -- [trace.txt]
//! ```

use rtclab::codec::{default_nvc_profile, default_traditional_profile, CodecSession};
use rtclab::controllers::{Controller, GccConfig, GccLike, OracleController};
use rtclab::metrics::session_qoe;
use rtclab::simcore::{run_session, SessionConfig};
use rtclab::traces::{load_trace, NetworkTrace};

fn main() -> rtclab::Result<()> {
    let trace = match std::env::args().nth(1) {
        Some(path) => load_trace(path.as_ref())?,
        None => NetworkTrace::new("step-2-to-1", vec![(0.0, 2.0), (15.0, 1.0)], 30.0, 40.0, 0.0, 50)?,
    };
    let cfg = SessionConfig::default();
    println!(
        "{:<8} {:<12} {:>9} {:>10} {:>8} {:>8} {:>8}",
        "codec", "controller", "quality", "p98 delay", "stall/s", "tput", "loss%"
    );
    for profile in [default_nvc_profile(), default_traditional_profile()] {
        let controllers: Vec<Box<dyn Controller>> = vec![
            Box::new(GccLike::new(GccConfig::default())),
            Box::new(OracleController::new(trace.clone())),
        ];
        for mut c in controllers {
            let log = run_session(&trace, &mut c, CodecSession::new(profile.clone()), &cfg, 1)?;
            let q = session_qoe(&log)?;
            println!(
                "{:<8} {:<12} {:>8.2}dB {:>8.1}ms {:>8.3} {:>7.2}M {:>8.2}",
                profile.label, log.meta.controller, q.mean_quality_db, q.p98_frame_delay_ms,
                q.stalls_per_sec, q.tput_mbps, q.loss_pct
            );
        }
    }
    Ok(())
}
