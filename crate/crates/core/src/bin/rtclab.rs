//! Command-line front end: `gen-traces`, `train`, `eval` and `report`.
//!
//! Exit codes: 0 success, 1 user error (bad flags, configs or inputs, refused
//! overwrite, missing checkpoints), 2 internal or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rtclab::experiment::{self, ExperimentConfig, OUT_ENV};
use rtclab::traces::{Span, TraceGenParams};

#[derive(Parser)]
#[command(name = "rtclab", version, about = "Trace-driven real-time video congestion control lab")]
struct Cli {
    /// Output root.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic bandwidth traces into <out>/traces.
    GenTraces {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bandwidth range in Mbps, `lo,hi`.
        #[arg(long)]
        bandwidth: Option<Span>,
        /// Minimum RTT range in ms.
        #[arg(long)]
        min_rtt: Option<Span>,
        /// Bandwidth change interval range in s.
        #[arg(long)]
        change_interval: Option<Span>,
        /// Random loss range, as a fraction.
        #[arg(long)]
        loss: Option<Span>,
        /// Queue capacity range in packets.
        #[arg(long)]
        queue: Option<Span>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Train the policy described by the config's [train] table.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured step budget.
        #[arg(long)]
        steps: Option<u64>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate every controller on every trace, profile and seed.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarise a results CSV and draw plots.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Training run directories to include.
        #[arg(long = "run")]
        runs: Vec<PathBuf>,
        /// Report directory; defaults to `report` next to the results'
        /// directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn load(path: &Path) -> rtclab::Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

fn run(cli: Cli) -> rtclab::Result<ExitCode> {
    match cli.cmd {
        Cmd::GenTraces {
            count,
            seed,
            bandwidth,
            min_rtt,
            change_interval,
            loss,
            queue,
            duration,
        } => {
            let d = TraceGenParams::default();
            let params = TraceGenParams {
                bandwidth_mbps: bandwidth.unwrap_or(d.bandwidth_mbps),
                min_rtt_ms: min_rtt.unwrap_or(d.min_rtt_ms),
                change_interval_s: change_interval.unwrap_or(d.change_interval_s),
                loss: loss.unwrap_or(d.loss),
                queue_packets: queue.unwrap_or(d.queue_packets),
                duration_s: duration.unwrap_or(d.duration_s),
            };
            let dir = experiment::output_root(cli.out.as_deref(), None).join("traces");
            let paths = experiment::gen_traces(&params, count, seed, &dir, cli.force)?;
            println!("wrote {} traces to {}", paths.len(), dir.display());
        }
        Cmd::Train {
            config,
            steps,
            seed,
            resume,
        } => {
            let cfg = load(&config)?;
            let mut spec = cfg
                .train
                .clone()
                .ok_or_else(|| rtclab::Error::Config("config has no [train] table".into()))?;
            if let Some(s) = steps {
                spec.config.total_steps = s;
            }
            if let Some(s) = seed {
                spec.config.seed = s;
            }
            let dir = experiment::output_root(cli.out.as_deref(), Some(&cfg)).join(&cfg.name).join("run");
            let st = experiment::run_training(&spec, &dir, resume, cli.force)?;
            let last = st.curve.last().map_or(f64::NAN, |p| p.validation_reward);
            println!(
                "{} steps, {} updates, {:.1} s, validation reward {last:.4}, switches {}; outputs in {}",
                st.steps,
                st.updates,
                st.wall_seconds,
                st.switches,
                dir.display()
            );
        }
        Cmd::Eval { config } => {
            let cfg = load(&config)?;
            let dir = experiment::output_root(cli.out.as_deref(), Some(&cfg)).join(&cfg.name).join("eval");
            let out = experiment::run_eval(&cfg, &dir, cli.force)?;
            for s in experiment::summarize(&out.rows) {
                println!(
                    "{:<20} {:>4} sessions  quality {:>7.3} dB  loss {:>6.2}%",
                    s.controller, s.sessions, s.mean_quality_db, s.loss_pct
                );
            }
            println!("results: {}", out.results_path.display());
            if !out.missing.is_empty() {
                eprintln!("skipped (checkpoint unavailable): {}", out.missing.join(", "));
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Report { results, runs, dir } => {
            let dir = dir.unwrap_or_else(|| {
                let parent = results.parent().unwrap_or(Path::new("."));
                parent.parent().unwrap_or(parent).join("report")
            });
            let rep = experiment::run_report(&results, &runs, &dir, cli.force)?;
            print!("{}", rep.text);
            for p in &rep.plots {
                println!("plot: {}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
