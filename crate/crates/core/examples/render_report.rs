//! Turns an evaluation's results.csv, plus any training run directories,
//! into a text summary and SVG plots.
//!
//! ```text
//! cargo run --example render_report -- <results.csv> [run_dir ...]
//! ```

use std::path::PathBuf;

use rtclab::experiment::run_report;

fn main() -> rtclab::Result<()> {
    let mut args = std::env::args().skip(1);
    let results = PathBuf::from(
        args.next()
            .unwrap_or_else(|| "rtclab-out/example-eval/eval/results.csv".into()),
    );
    let runs: Vec<PathBuf> = args.map(PathBuf::from).collect();
    let out = results
        .parent()
        .and_then(|p| p.parent())
        .map_or_else(|| PathBuf::from("report"), |p| p.join("report"));
    let summary = run_report(&results, &runs, &out, true)?;
    print!("{}", summary.text);
    for p in &summary.plots {
        println!("wrote {}", p.display());
    }
    Ok(())
}
