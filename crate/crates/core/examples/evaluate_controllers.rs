//! Evaluates controllers over a trace x profile x seed matrix and prints the
//! per-controller means. With a config path the experiment comes from TOML;
//! otherwise a small built-in matrix compares the rule-based controllers.
//!
//! ```text
//! cargo run --release --example evaluate_controllers -- [config.toml] [out_dir]
//! ```

use std::path::PathBuf;

use rtclab::experiment::{run_eval, summarize, ControllerSpec, ExperimentConfig, ProfileSpec, TraceSpec};
use rtclab::simcore::SessionConfig;
use rtclab::traces::TraceGenParams;

fn main() -> rtclab::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig {
            name: "example-eval".into(),
            output_dir: None,
            seeds: vec![1, 2],
            session: SessionConfig::default(),
            traces: Some(TraceSpec::Generated {
                count: 4,
                seed: 2024,
                params: TraceGenParams::default(),
            }),
            profiles: ProfileSpec::Synthetic { count: 2 },
            controllers: vec![
                ControllerSpec::Oracle,
                ControllerSpec::Gcc { config: None },
                ControllerSpec::Fixed { rate_kbps: 1000.0 },
            ],
            session_logs: false,
            train: None,
        },
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| format!("rtclab-out/{}/eval", cfg.name)));
    let res = run_eval(&cfg, &out, true)?;
    for name in &res.missing {
        println!("skipped {name}: checkpoint missing");
    }
    println!(
        "{:<22} {:>8} {:>9} {:>10} {:>8} {:>8}",
        "controller", "sessions", "quality", "p98 delay", "stall/s", "loss%"
    );
    for c in summarize(&res.rows) {
        println!(
            "{:<22} {:>8} {:>7.2}dB {:>8.1}ms {:>8.3} {:>8.2}",
            c.controller, c.sessions, c.mean_quality_db, c.p98_frame_delay_ms, c.stalls_per_sec, c.loss_pct
        );
    }
    println!("rows in {}", res.results_path.display());
    Ok(())
}
