//! Network traces: a piecewise-constant bandwidth timeline plus per-trace link
//! parameters, a seeded synthetic generator, and a plain-text file format with
//! a JSON sidecar.
//!
//! Trace file (`<name>.txt`), one breakpoint per line, `#` starts a comment:
//!
//! ```text
//! 0 2.0
//! 5 4.0
//! ```
//!
//! Sidecar (`<name>.json`):
//!
//! ```json
//! {"label": "t0", "min_rtt_ms": 40.0, "loss": 0.01, "queue": 25, "duration_s": 30.0}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_DURATION_S: f64 = 30.0;
pub const DEFAULT_MIN_RTT_MS: f64 = 40.0;
pub const DEFAULT_QUEUE_PACKETS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTrace {
    pub label: String,
    /// Sorted `(time_s, bandwidth_mbps)`; the first breakpoint is at 0.
    pub breakpoints: Vec<(f64, f64)>,
    pub duration_s: f64,
    pub min_rtt_ms: f64,
    pub random_loss_rate: f64,
    pub queue_capacity_packets: usize,
}

impl NetworkTrace {
    pub fn new(
        label: impl Into<String>,
        breakpoints: Vec<(f64, f64)>,
        duration_s: f64,
        min_rtt_ms: f64,
        random_loss_rate: f64,
        queue_capacity_packets: usize,
    ) -> Result<Self> {
        let trace = Self {
            label: label.into(),
            breakpoints,
            duration_s,
            min_rtt_ms,
            random_loss_rate,
            queue_capacity_packets,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// A single-segment trace.
    pub fn constant(
        label: impl Into<String>,
        bandwidth_mbps: f64,
        duration_s: f64,
        min_rtt_ms: f64,
        random_loss_rate: f64,
        queue_capacity_packets: usize,
    ) -> Result<Self> {
        Self::new(
            label,
            vec![(0.0, bandwidth_mbps)],
            duration_s,
            min_rtt_ms,
            random_loss_rate,
            queue_capacity_packets,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let Some(&(t0, _)) = self.breakpoints.first() else {
            return Err(Error::Empty("trace has no breakpoints"));
        };
        if t0 != 0.0 {
            return Err(Error::Config(format!(
                "trace {}: first breakpoint must be at 0 s, got {t0}",
                self.label
            )));
        }
        for w in self.breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config(format!(
                    "trace {}: breakpoint times must be strictly increasing ({} then {})",
                    self.label, w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(_, bw)) = self
            .breakpoints
            .iter()
            .find(|(_, bw)| !(bw.is_finite() && *bw > 0.0))
        {
            return Err(Error::Config(format!(
                "trace {}: bandwidth must be positive, got {bw}",
                self.label
            )));
        }
        let last = self.breakpoints.last().map(|b| b.0).unwrap_or(0.0);
        if !(self.duration_s.is_finite() && self.duration_s > last) {
            return Err(Error::Config(format!(
                "trace {}: duration {} must exceed the last breakpoint {last}",
                self.label, self.duration_s
            )));
        }
        if !(self.min_rtt_ms.is_finite() && self.min_rtt_ms > 0.0) {
            return Err(Error::Config(format!(
                "trace {}: min_rtt_ms must be positive",
                self.label
            )));
        }
        if !(0.0..=1.0).contains(&self.random_loss_rate) {
            return Err(Error::Config(format!(
                "trace {}: loss rate {} outside [0, 1]",
                self.label, self.random_loss_rate
            )));
        }
        if self.queue_capacity_packets == 0 {
            return Err(Error::Config(format!(
                "trace {}: queue capacity must be at least one packet",
                self.label
            )));
        }
        Ok(())
    }

    /// Bandwidth of the segment active at `t_s` (segments are left-closed,
    /// right-open).
    pub fn bandwidth_at(&self, t_s: f64) -> Result<f64> {
        if !(0.0..=self.duration_s).contains(&t_s) {
            return Err(Error::OutOfRange(format!(
                "t = {t_s} s outside trace {} [0, {}]",
                self.label, self.duration_s
            )));
        }
        let idx = self.breakpoints.partition_point(|&(t, _)| t <= t_s);
        Ok(self.breakpoints[idx.saturating_sub(1)].1)
    }

    /// Minimum bandwidth over `[from_s, to_s)`, clipped to the trace.
    pub fn min_bandwidth_over(&self, from_s: f64, to_s: f64) -> f64 {
        let from = from_s.clamp(0.0, self.duration_s);
        let start = self.breakpoints.partition_point(|&(t, _)| t <= from);
        let mut min = self.breakpoints[start.saturating_sub(1)].1;
        for &(t, bw) in &self.breakpoints[start..] {
            if t >= to_s {
                break;
            }
            min = min.min(bw);
        }
        min
    }

    pub fn owd_ms(&self) -> f64 {
        self.min_rtt_ms / 2.0
    }

    /// Time-averaged bandwidth over the whole trace.
    pub fn mean_bandwidth_mbps(&self) -> f64 {
        let mut acc = 0.0;
        for (i, &(t, bw)) in self.breakpoints.iter().enumerate() {
            let end = self
                .breakpoints
                .get(i + 1)
                .map(|b| b.0)
                .unwrap_or(self.duration_s);
            acc += bw * (end - t);
        }
        acc / self.duration_s
    }

    /// Writes `<stem>.txt` and `<stem>.json` next to each other.
    pub fn save(&self, txt_path: &Path) -> Result<()> {
        let mut body = String::new();
        for (t, bw) in &self.breakpoints {
            body.push_str(&format!("{t} {bw}\n"));
        }
        fs::write(txt_path, body).map_err(|e| Error::io(txt_path, e))?;
        let meta = Sidecar {
            label: Some(self.label.clone()),
            min_rtt_ms: Some(self.min_rtt_ms),
            loss: Some(self.random_loss_rate),
            queue: Some(self.queue_capacity_packets),
            duration_s: Some(self.duration_s),
        };
        let side = sidecar_path(txt_path);
        fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&side, e))
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Sidecar {
    label: Option<String>,
    min_rtt_ms: Option<f64>,
    loss: Option<f64>,
    queue: Option<usize>,
    duration_s: Option<f64>,
}

pub fn sidecar_path(txt_path: &Path) -> PathBuf {
    txt_path.with_extension("json")
}

/// Loads a trace file and its optional sidecar. Missing sidecar fields fall
/// back to [`DEFAULT_MIN_RTT_MS`], zero loss, [`DEFAULT_QUEUE_PACKETS`] and a
/// duration of `max(30 s, last breakpoint + 1 s)`.
pub fn load_trace(path: &Path) -> Result<NetworkTrace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let breakpoints = parse_breakpoints(&text, path)?;

    let side = sidecar_path(path);
    let meta: Sidecar = if side.exists() {
        let raw = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        serde_json::from_str(&raw)?
    } else {
        Sidecar::default()
    };
    let last = breakpoints.last().map(|b| b.0).unwrap_or(0.0);
    let label = meta.label.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    NetworkTrace::new(
        label,
        breakpoints,
        meta.duration_s
            .unwrap_or_else(|| DEFAULT_DURATION_S.max(last + 1.0)),
        meta.min_rtt_ms.unwrap_or(DEFAULT_MIN_RTT_MS),
        meta.loss.unwrap_or(0.0),
        meta.queue.unwrap_or(DEFAULT_QUEUE_PACKETS),
    )
}

fn parse_breakpoints(text: &str, path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let mut fields = line.split_whitespace();
        let (Some(t), Some(bw), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(format!(
                "expected `time_s bandwidth_mbps`, got {line:?}"
            )));
        };
        let t: f64 = t.parse().map_err(|_| err(format!("bad time {t:?}")))?;
        let bw: f64 = bw
            .parse()
            .map_err(|_| err(format!("bad bandwidth {bw:?}")))?;
        out.push((t, bw));
    }
    if out.is_empty() {
        return Err(Error::Empty("trace file has no breakpoints"));
    }
    Ok(out)
}

/// Loads every `*.txt` trace in a directory, sorted by file name.
pub fn load_trace_dir(dir: &Path) -> Result<Vec<NetworkTrace>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_trace(p)).collect()
}

/// Closed interval `[lo, hi]`; `lo == hi` is a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn check(&self, name: &str, min: f64, max: f64) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::Config(format!("{name}: non-finite range")));
        }
        if self.lo > self.hi {
            return Err(Error::Config(format!(
                "{name}: inverted range [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.lo < min || self.hi > max {
            return Err(Error::Config(format!(
                "{name}: range [{}, {}] outside admissible [{min}, {max}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }
}

impl std::str::FromStr for Span {
    type Err = Error;

    /// Parses `lo,hi` or a single fixed value.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad range bound {x:?}")))
        };
        match s.split_once(',') {
            Some((a, b)) => Ok(Span::new(parse(a)?, parse(b)?)),
            None => Ok(Span::fixed(parse(s)?)),
        }
    }
}

/// Parameter ranges for the synthetic generator. Defaults follow the
/// standard training distribution: 0.6–6 Mbps, 2–200 ms min RTT, change
/// interval up to 15 s, 0–5 % random loss, 1–100 packet queues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceGenParams {
    pub bandwidth_mbps: Span,
    pub min_rtt_ms: Span,
    /// The lower bound is exclusive when it is 0.
    pub change_interval_s: Span,
    pub loss: Span,
    pub queue_packets: Span,
    pub duration_s: f64,
}

impl Default for TraceGenParams {
    fn default() -> Self {
        Self {
            bandwidth_mbps: Span::new(0.6, 6.0),
            min_rtt_ms: Span::new(2.0, 200.0),
            change_interval_s: Span::new(0.0, 15.0),
            loss: Span::new(0.0, 0.05),
            queue_packets: Span::new(1.0, 100.0),
            duration_s: DEFAULT_DURATION_S,
        }
    }
}

impl TraceGenParams {
    pub fn validate(&self) -> Result<()> {
        self.bandwidth_mbps.check("bandwidth_mbps", 1e-3, 1e4)?;
        if self.bandwidth_mbps.lo <= 0.0 {
            return Err(Error::Config("bandwidth_mbps must be positive".into()));
        }
        self.min_rtt_ms.check("min_rtt_ms", 1e-3, 1e4)?;
        self.change_interval_s.check("change_interval_s", 0.0, 1e6)?;
        if self.change_interval_s.hi <= 0.0 {
            return Err(Error::Config("change_interval_s must allow positive values".into()));
        }
        self.loss.check("loss", 0.0, 1.0)?;
        self.queue_packets.check("queue_packets", 1.0, 1e6)?;
        if self.queue_packets.hi.floor() < self.queue_packets.lo.ceil() {
            return Err(Error::Config("queue_packets range holds no integer".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        Ok(())
    }
}

/// Draws one trace. Scalar link parameters are drawn once per trace; segment
/// lengths and per-segment bandwidths are drawn uniformly until the duration
/// is covered.
pub fn generate_trace(params: &TraceGenParams, seed: u64) -> Result<NetworkTrace> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let min_rtt_ms = params.min_rtt_ms.sample(&mut rng);
    let loss = params.loss.sample(&mut rng);
    let q_lo = params.queue_packets.lo.ceil() as usize;
    let q_hi = params.queue_packets.hi.floor() as usize;
    let queue = rng.gen_range(q_lo..=q_hi);

    let mut breakpoints = Vec::new();
    let mut t = 0.0;
    while t < params.duration_s {
        breakpoints.push((t, params.bandwidth_mbps.sample(&mut rng)));
        let iv = &params.change_interval_s;
        let step = if iv.lo == iv.hi {
            iv.lo
        } else {
            // (lo, hi]: mirror the half-open [lo, hi) draw
            iv.hi - rng.gen_range(0.0..(iv.hi - iv.lo))
        };
        // sub-millisecond segments collapse onto one another at µs clock
        // resolution
        t += step.max(1e-3);
    }

    NetworkTrace::new(
        format!("gen-{seed}"),
        breakpoints,
        params.duration_s,
        min_rtt_ms,
        loss,
        queue,
    )
}

/// `count` traces with seeds derived from `seed`.
pub fn generate_traces(params: &TraceGenParams, count: usize, seed: u64) -> Result<Vec<NetworkTrace>> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let s: u64 = master.gen();
            let mut t = generate_trace(params, s)?;
            t.label = format!("gen-{seed}-{i:04}");
            Ok(t)
        })
        .collect()
}
