//! Experiment drivers: trace generation, training runs, evaluation matrices
//! and report plots.
//!
//! Output layout under an output root:
//!
//! ```text
//! traces/<label>.txt, <label>.json      gen-traces
//! <name>/run/checkpoint.json            train
//! <name>/run/curve.csv                  learning curve
//! <name>/run/episodes.csv               per-episode reward and mode switches
//! <name>/run/actions.csv                action CDF
//! <name>/eval/results.csv               one row per session
//! <name>/eval/summary.csv               per-controller means
//! <name>/eval/quality_cdf.csv           per-controller quality deciles
//! <name>/eval/logs/*.csv                per-session frame logs
//! <name>/report/summary.txt, *.svg      report
//! ```
//!
//! Nothing is overwritten unless `force` is set.

mod config;
pub mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ControllerSpec, ExperimentConfig, ProfileSpec, TraceSpec, TrainSpec};

use crate::codec::{CodecProfile, CodecSession};
use crate::controllers::{Controller, FixedRate, GccLike, OracleController, SafeguardController};
use crate::metrics::{percentile_nearest_rank, session_qoe, QoEReport};
use crate::rl::{check_convergence, train, ActionStats, CurvePoint, RlAgent, TrainState};
use crate::simcore::run_session;
use crate::traces::{generate_traces, NetworkTrace, TraceGenParams};
use crate::{Error, Result};
use svg::{BarPanels, Series, Style, XyChart};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "RTCLAB_OUT";
pub const DEFAULT_OUT: &str = "rtclab-out";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn guard(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Exists(path.to_path_buf()));
    }
    Ok(())
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes via a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    f(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(Error::from)
}

fn flush<W: Write>(w: &mut csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' })
        .collect()
}

// ---------------------------------------------------------------- traces

/// Generates `count` traces into `dir` as `<label>.txt` plus sidecar.
pub fn gen_traces(params: &TraceGenParams, count: usize, seed: u64, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    let traces = generate_traces(params, count, seed)?;
    let paths: Vec<PathBuf> = traces.iter().map(|t| dir.join(format!("{}.txt", t.label))).collect();
    for p in &paths {
        guard(p, force)?;
        guard(&crate::traces::sidecar_path(p), force)?;
    }
    ensure_dir(dir)?;
    for (t, p) in traces.iter().zip(&paths) {
        t.save(p)?;
    }
    Ok(paths)
}

// ---------------------------------------------------------------- training

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const ACTIONS_FILE: &str = "actions.csv";

const CURVE_HEADER: [&str; 4] = ["steps", "wall_seconds", "validation_reward", "mode_switches"];
const EPISODE_HEADER: [&str; 7] = [
    "episode",
    "steps_after",
    "trace",
    "profile",
    "switches",
    "fallback_windows",
    "mean_reward",
];

/// Trains the `[train]` section of an experiment into `run_dir`.
///
/// With `resume`, an existing checkpoint there is continued up to the
/// configured step count. Otherwise an existing checkpoint needs `force`.
pub fn run_training(spec: &TrainSpec, run_dir: &Path, resume: bool, force: bool) -> Result<TrainState> {
    let ckpt = run_dir.join(CHECKPOINT_FILE);
    let previous = if resume && ckpt.exists() {
        Some(TrainState::load(&ckpt)?)
    } else {
        for f in [CHECKPOINT_FILE, CURVE_FILE, EPISODES_FILE, ACTIONS_FILE] {
            guard(&run_dir.join(f), force)?;
        }
        None
    };
    if let Some(p) = &previous {
        let mut a = p.config.clone();
        a.total_steps = spec.config.total_steps;
        if a != spec.config {
            log::warn!("resuming with a configuration that differs from the checkpoint's; the checkpoint's wins");
        }
    }
    let env = spec.env()?;
    ensure_dir(run_dir)?;
    let state = train(&env, previous, spec.config.clone(), |st| {
        write_atomic(&ckpt, |tmp| st.save(tmp))
    })?;
    write_atomic(&ckpt, |tmp| state.save(tmp))?;
    write_run_files(&state, run_dir)?;
    Ok(state)
}

/// Writes the curve, episode and action CSVs of a training state.
pub fn write_run_files(st: &TrainState, run_dir: &Path) -> Result<()> {
    let path = run_dir.join(CURVE_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(CURVE_HEADER)?;
    for p in &st.curve {
        w.serialize(p)?;
    }
    flush(&mut w, &path)?;

    let path = run_dir.join(EPISODES_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(EPISODE_HEADER)?;
    for e in &st.episode_log {
        w.serialize(e)?;
    }
    flush(&mut w, &path)?;

    let path = run_dir.join(ACTIONS_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(["action_upper_edge", "cdf"])?;
    if st.actions.total > 0 {
        for (edge, c) in st.actions.cdf() {
            w.serialize((edge, c))?;
        }
    }
    flush(&mut w, &path)
}

/// What a report needs from a finished training run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub name: String,
    pub curve: Vec<CurvePoint>,
    pub actions: ActionStats,
}

impl RunArtifacts {
    /// Loads a run directory; the run is named after the directory, or its
    /// parent when the directory is called `run`.
    pub fn load(run_dir: &Path) -> Result<Self> {
        let st = TrainState::load(&run_dir.join(CHECKPOINT_FILE))?;
        let base = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned());
        let name = match base(run_dir).as_deref() {
            Some("run") => run_dir.parent().and_then(base),
            other => other.map(str::to_owned),
        }
        .unwrap_or_else(|| "run".into());
        Ok(Self {
            name,
            curve: st.curve,
            actions: st.actions,
        })
    }

    /// Wall time at which the validation reward settles within `band`.
    pub fn convergence_seconds(&self, band: f64) -> Option<f64> {
        let vals: Vec<f64> = self.curve.iter().map(|p| p.validation_reward).collect();
        check_convergence(&vals, band, None).map(|i| self.curve[i].wall_seconds)
    }
}

// ---------------------------------------------------------------- evaluation

/// One evaluated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub controller: String,
    pub trace: String,
    pub profile: String,
    pub seed: u64,
    pub mean_quality_db: f64,
    pub p98_frame_delay_ms: f64,
    pub stalls_per_sec: f64,
    pub stall_time_ratio: f64,
    pub tput_mbps: f64,
    pub p98_packet_delay_ms: f64,
    pub loss_pct: f64,
    pub network_loss_pct: f64,
    pub frames_decoded: usize,
    pub frames_total: usize,
    pub mode_switches: usize,
}

impl ResultRow {
    fn new(controller: &str, trace: &str, profile: &str, seed: u64, q: QoEReport, switches: usize) -> Self {
        Self {
            controller: controller.into(),
            trace: trace.into(),
            profile: profile.into(),
            seed,
            mean_quality_db: q.mean_quality_db,
            p98_frame_delay_ms: q.p98_frame_delay_ms,
            stalls_per_sec: q.stalls_per_sec,
            stall_time_ratio: q.stall_time_ratio,
            tput_mbps: q.tput_mbps,
            p98_packet_delay_ms: q.p98_packet_delay_ms,
            loss_pct: q.loss_pct,
            network_loss_pct: q.network_loss_pct,
            frames_decoded: q.frames_decoded,
            frames_total: q.frames_total,
            mode_switches: switches,
        }
    }
}

const RESULT_HEADER: [&str; 15] = [
    "controller",
    "trace",
    "profile",
    "seed",
    "mean_quality_db",
    "p98_frame_delay_ms",
    "stalls_per_sec",
    "stall_time_ratio",
    "tput_mbps",
    "p98_packet_delay_ms",
    "loss_pct",
    "network_loss_pct",
    "frames_decoded",
    "frames_total",
    "mode_switches",
];

/// Per-controller means over every session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub controller: String,
    pub sessions: usize,
    pub mean_quality_db: f64,
    pub p98_frame_delay_ms: f64,
    pub stalls_per_sec: f64,
    pub stall_time_ratio: f64,
    pub tput_mbps: f64,
    pub p98_packet_delay_ms: f64,
    pub loss_pct: f64,
    pub network_loss_pct: f64,
}

/// Groups rows by controller, keeping first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<ControllerSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        if !groups.contains_key(r.controller.as_str()) {
            order.push(&r.controller);
        }
        groups.entry(&r.controller).or_default().push(r);
    }
    order
        .into_iter()
        .map(|name| {
            let g = &groups[name];
            let mean = |f: fn(&ResultRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64;
            ControllerSummary {
                controller: name.into(),
                sessions: g.len(),
                mean_quality_db: mean(|r| r.mean_quality_db),
                p98_frame_delay_ms: mean(|r| r.p98_frame_delay_ms),
                stalls_per_sec: mean(|r| r.stalls_per_sec),
                stall_time_ratio: mean(|r| r.stall_time_ratio),
                tput_mbps: mean(|r| r.tput_mbps),
                p98_packet_delay_ms: mean(|r| r.p98_packet_delay_ms),
                loss_pct: mean(|r| r.loss_pct),
                network_loss_pct: mean(|r| r.network_loss_pct),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub rows: Vec<ResultRow>,
    /// Controllers skipped because their checkpoint could not be loaded.
    pub missing: Vec<String>,
    pub results_path: PathBuf,
}

pub const RESULTS_FILE: &str = "results.csv";

/// Session seed shared by every controller on the same cell, so they all
/// face the same random losses.
fn session_seed(seed: u64, trace: usize, profile: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((trace as u64) << 32) ^ profile as u64
}

enum Built {
    Plain(ControllerSpec),
    Rl {
        name: String,
        state: Box<TrainState>,
        safeguard: Option<crate::controllers::SafeguardConfig>,
        deterministic: bool,
    },
}

impl Built {
    fn make(&self, trace: &NetworkTrace, seed: u64) -> Result<Box<dyn Controller>> {
        Ok(match self {
            Built::Plain(ControllerSpec::Gcc { config }) => Box::new(GccLike::new(config.unwrap_or_default())),
            Built::Plain(ControllerSpec::Oracle) => Box::new(OracleController::new(trace.clone())),
            Built::Plain(ControllerSpec::Fixed { rate_kbps }) => Box::new(FixedRate(*rate_kbps)),
            Built::Plain(ControllerSpec::Rl { .. }) => unreachable!("rl specs are loaded first"),
            Built::Rl {
                name,
                state,
                safeguard,
                deterministic,
            } => {
                let agent = RlAgent::new(state.policy.clone(), state.config.reward, seed)
                    .stochastic(!deterministic)
                    .named(name.clone());
                match safeguard {
                    Some(sg) => Box::new(SafeguardController::new(agent, *sg)?.named(name.clone())),
                    None => Box::new(agent),
                }
            }
        })
    }
}

/// Runs the full controllers × traces × profiles × seeds matrix of `cfg`
/// into `out_dir`.
///
/// Sessions run in parallel; rows come out in matrix order regardless. RL
/// controllers whose checkpoint fails to load are listed in
/// [`EvalOutcome::missing`] and skipped.
pub fn run_eval(cfg: &ExperimentConfig, out_dir: &Path, force: bool) -> Result<EvalOutcome> {
    cfg.validate()?;
    let traces = cfg
        .traces
        .as_ref()
        .ok_or_else(|| Error::Config("evaluation needs a [traces] table".into()))?
        .load()?;
    let profiles = cfg.profiles.load()?;
    if cfg.controllers.is_empty() {
        return Err(Error::Config("evaluation needs at least one controller".into()));
    }
    let results_path = out_dir.join(RESULTS_FILE);
    guard(&results_path, force)?;

    let mut built = Vec::new();
    let mut names = Vec::new();
    let mut missing = Vec::new();
    for c in &cfg.controllers {
        match c {
            ControllerSpec::Rl {
                name,
                checkpoint,
                safeguard,
                deterministic,
            } => match TrainState::load(checkpoint) {
                Ok(state) => {
                    names.push(name.clone());
                    built.push(Built::Rl {
                    name: name.clone(),
                    state: Box::new(state),
                    safeguard: *safeguard,
                    deterministic: *deterministic,
                    })
                }
                Err(e) => {
                    log::error!("skipping {name}: {e}");
                    missing.push(name.clone());
                }
            },
            other => {
                names.push(other.name());
                built.push(Built::Plain(other.clone()));
            }
        }
    }

    let mut jobs: Vec<(usize, usize, usize, u64)> = Vec::new();
    for c in 0..built.len() {
        for t in 0..traces.len() {
            for p in 0..profiles.len() {
                jobs.extend(cfg.seeds.iter().map(|&s| (c, t, p, s)));
            }
        }
    }
    let logs_dir = out_dir.join("logs");
    ensure_dir(out_dir)?;
    if cfg.session_logs {
        ensure_dir(&logs_dir)?;
    }

    let run_one = |&(c, t, p, s): &(usize, usize, usize, u64)| -> Result<ResultRow> {
        let trace = &traces[t];
        let profile: &CodecProfile = &profiles[p];
        let seed = session_seed(s, t, p);
        let mut ctl = built[c].make(trace, seed)?;
        let name = &names[c];
        let log = run_session(trace, &mut ctl, CodecSession::new(profile.clone()), &cfg.session, seed)?;
        if cfg.session_logs {
            let path = logs_dir.join(format!(
                "{}__{}__{}__s{s}.csv",
                file_safe(name),
                file_safe(&trace.label),
                file_safe(&profile.label)
            ));
            let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            log.write_frames_csv(std::io::BufWriter::new(f))?;
        }
        let q = session_qoe(&log)?;
        Ok(ResultRow::new(name, &trace.label, &profile.label, s, q, log.switches.len()))
    };
    let rows: Vec<ResultRow> = jobs
        .par_iter()
        .map(run_one)
        .collect::<Vec<Result<ResultRow>>>()
        .into_iter()
        .collect::<Result<_>>()?;

    write_results(&rows, &results_path)?;
    write_summary(&rows, out_dir)?;
    Ok(EvalOutcome {
        rows,
        missing,
        results_path,
    })
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    flush(&mut w, path)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => Error::Csv(e),
    })?;
    if r.headers()?.iter().ne(RESULT_HEADER) && !r.headers()?.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "unexpected results header".into(),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn write_summary(rows: &[ResultRow], out_dir: &Path) -> Result<()> {
    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for s in summarize(rows) {
        w.serialize(s)?;
    }
    flush(&mut w, &path)?;

    let path = out_dir.join("quality_cdf.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["controller", "percentile", "mean_quality_db"])?;
    for s in summarize(rows) {
        let q: Vec<f64> = rows
            .iter()
            .filter(|r| r.controller == s.controller)
            .map(|r| r.mean_quality_db)
            .collect();
        for pct in (0..=100).step_by(10) {
            w.serialize((&s.controller, pct, percentile_nearest_rank(&q, pct)?))?;
        }
    }
    flush(&mut w, &path)
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub sessions: usize,
    pub controllers: Vec<ControllerSummary>,
    pub plots: Vec<PathBuf>,
    pub text: String,
}

pub const CONVERGENCE_BAND: f64 = 0.10;

/// Summarises a results CSV and draws the report plots into `out_dir`.
///
/// `runs` are training run directories; they feed the learning-curve,
/// action-CDF and quality-versus-convergence plots. With no result rows the
/// summary says so and no plot is drawn.
pub fn run_report(results: &Path, runs: &[PathBuf], out_dir: &Path, force: bool) -> Result<ReportSummary> {
    let rows = read_results(results)?;
    let arts: Vec<RunArtifacts> = runs.iter().map(|r| RunArtifacts::load(r)).collect::<Result<_>>()?;
    let summary_path = out_dir.join("summary.txt");
    guard(&summary_path, force)?;
    ensure_dir(out_dir)?;

    let controllers = summarize(&rows);
    let mut text = format!("{} sessions, {} controllers\n", rows.len(), controllers.len());
    let mut plots = Vec::new();
    if !rows.is_empty() {
        text.push_str(&format!(
            "{:<20} {:>8} {:>10} {:>10} {:>9} {:>9} {:>8}\n",
            "controller", "sessions", "quality_dB", "p98_delay", "stalls/s", "tput_Mbps", "loss%"
        ));
        for c in &controllers {
            text.push_str(&format!(
                "{:<20} {:>8} {:>10.3} {:>10.1} {:>9.3} {:>9.3} {:>8.2}\n",
                c.controller, c.sessions, c.mean_quality_db, c.p98_frame_delay_ms, c.stalls_per_sec, c.tput_mbps, c.loss_pct
            ));
        }
        let mut emit = |file: &str, body: String| -> Result<()> {
            let p = out_dir.join(file);
            guard(&p, force)?;
            write_file(&p, body.as_bytes())?;
            plots.push(p);
            Ok(())
        };
        emit("qoe_bars.svg", qoe_bars(&controllers).render())?;
        let curves: Vec<&RunArtifacts> = arts.iter().filter(|a| !a.curve.is_empty()).collect();
        if !curves.is_empty() {
            emit("learning_curves.svg", learning_curves(&curves).render())?;
        }
        let acted: Vec<&RunArtifacts> = arts.iter().filter(|a| a.actions.total > 0).collect();
        if !acted.is_empty() {
            emit("action_cdf.svg", action_cdf(&acted).render())?;
        }
        if let Some(chart) = quality_vs_convergence(&arts, &controllers) {
            emit("qoe_vs_convergence.svg", chart.render())?;
        }
        for a in &arts {
            text.push_str(&format!(
                "run {}: {} curve points, convergence {}, increase share {:.3}\n",
                a.name,
                a.curve.len(),
                a.convergence_seconds(CONVERGENCE_BAND)
                    .map_or("none".into(), |s| format!("{s:.1} s")),
                a.actions.increase_share()
            ));
        }
    }
    write_file(&summary_path, text.as_bytes())?;
    Ok(ReportSummary {
        sessions: rows.len(),
        controllers,
        plots,
        text,
    })
}

pub fn qoe_bars(controllers: &[ControllerSummary]) -> BarPanels {
    let metric = |name: &str, f: fn(&ControllerSummary) -> f64| (name.to_string(), controllers.iter().map(f).collect());
    BarPanels {
        title: "QoE breakdown".into(),
        groups: controllers.iter().map(|c| c.controller.clone()).collect(),
        metrics: vec![
            metric("quality (dB)", |c| c.mean_quality_db),
            metric("p98 delay (ms)", |c| c.p98_frame_delay_ms),
            metric("stalls/s", |c| c.stalls_per_sec),
            metric("tput (Mbps)", |c| c.tput_mbps),
            metric("loss (%)", |c| c.loss_pct),
        ],
    }
}

/// Validation reward against wall time; the x axis spans exactly the
/// curves' wall-time range.
pub fn learning_curves(runs: &[&RunArtifacts]) -> XyChart {
    let walls = runs.iter().flat_map(|r| r.curve.iter().map(|p| p.wall_seconds));
    let lo = walls.clone().fold(f64::INFINITY, f64::min);
    let hi = walls.fold(f64::NEG_INFINITY, f64::max);
    XyChart {
        title: "Learning curves".into(),
        x_label: "wall time (s)".into(),
        y_label: "validation reward".into(),
        x_range: Some((lo, hi)),
        y_range: None,
        series: runs
            .iter()
            .map(|r| Series {
                name: r.name.clone(),
                points: r.curve.iter().map(|p| (p.wall_seconds, p.validation_reward)).collect(),
                style: Style::Line,
            })
            .collect(),
    }
}

pub fn action_cdf(runs: &[&RunArtifacts]) -> XyChart {
    XyChart {
        title: "Action distribution".into(),
        x_label: "action".into(),
        y_label: "CDF".into(),
        x_range: Some((-1.0, 1.0)),
        y_range: Some((0.0, 1.0)),
        series: runs
            .iter()
            .map(|r| {
                let mut pts = vec![(-1.0, 0.0)];
                pts.extend(r.actions.cdf());
                Series {
                    name: format!("{} (up {:.0}%)", r.name, 100.0 * r.actions.increase_share()),
                    points: pts,
                    style: Style::Step,
                }
            })
            .collect(),
    }
}

/// Mean quality of each run's namesake controller against the run's
/// convergence time. Runs that never converge or were not evaluated are left
/// out; `None` when nothing remains.
pub fn quality_vs_convergence(runs: &[RunArtifacts], controllers: &[ControllerSummary]) -> Option<XyChart> {
    let series: Vec<Series> = runs
        .iter()
        .filter_map(|r| {
            let t = r.convergence_seconds(CONVERGENCE_BAND)?;
            let c = controllers.iter().find(|c| c.controller == r.name)?;
            Some(Series {
                name: r.name.clone(),
                points: vec![(t, c.mean_quality_db)],
                style: Style::Points,
            })
        })
        .collect();
    (!series.is_empty()).then(|| XyChart {
        title: "Quality vs convergence time".into(),
        x_label: "convergence time (s)".into(),
        y_label: "mean quality (dB)".into(),
        x_range: None,
        y_range: None,
        series,
    })
}

/// Output root: explicit value, else the config's, else `$RTCLAB_OUT`, else
/// [`DEFAULT_OUT`].
pub fn output_root(explicit: Option<&Path>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_toml(
            r#"
name = "t"
seeds = [3]
session = { duration_s = 4.0 }
traces = { kind = "generated", count = 3, seed = 9 }
profiles = { kind = "synthetic", count = 2 }

[[controllers]]
kind = "gcc"

[[controllers]]
kind = "oracle"
"#,
        )
        .unwrap();
        c.output_dir = Some(dir.to_path_buf());
        c
    }

    #[test]
    fn eval_cross_product_and_overwrite_guard() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        let out = run_eval(&c, dir.path(), false).unwrap();
        assert_eq!(out.rows.len(), 12);
        assert!(out.missing.is_empty());
        assert!(matches!(run_eval(&c, dir.path(), false), Err(Error::Exists(_))));
        assert_eq!(read_results(&out.results_path).unwrap(), out.rows);
        assert_eq!(fs::read_dir(dir.path().join("logs")).unwrap().count(), 12);
    }

    #[test]
    fn missing_checkpoint_is_listed_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        c.controllers.push(ControllerSpec::Rl {
            name: "ghost".into(),
            checkpoint: dir.path().join("nope.json"),
            safeguard: None,
            deterministic: false,
        });
        let out = run_eval(&c, dir.path(), false).unwrap();
        assert_eq!(out.missing, vec!["ghost".to_string()]);
        assert_eq!(out.rows.len(), 12);
    }

    #[test]
    fn empty_results_give_summary_without_plots() {
        let dir = tempfile::tempdir().unwrap();
        let res = dir.path().join("results.csv");
        write_results(&[], &res).unwrap();
        let rep = run_report(&res, &[], &dir.path().join("rep"), false).unwrap();
        assert_eq!(rep.sessions, 0);
        assert!(rep.plots.is_empty());
        assert!(rep.text.starts_with("0 sessions"));
    }

    #[test]
    fn malformed_results_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let res = dir.path().join("results.csv");
        fs::write(&res, "a,b\n1,2\n").unwrap();
        assert!(run_report(&res, &[], dir.path(), false).is_err());
    }

    #[test]
    fn gen_traces_refuses_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let p = TraceGenParams::default();
        assert_eq!(gen_traces(&p, 2, 7, dir.path(), false).unwrap().len(), 2);
        assert!(gen_traces(&p, 2, 7, dir.path(), false).is_err());
        assert!(gen_traces(&p, 2, 7, dir.path(), true).is_ok());
    }
}
