use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FPS: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecMode {
    /// Loss-tolerant neural codec: decodes whatever arrived by the deadline.
    Nvc,
    /// Blocks until every packet of a frame is present.
    Traditional,
}

/// Quality surface `q[bitrate][loss]` in SSIM-dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecProfile {
    #[serde(default)]
    pub label: String,
    pub mode: CodecMode,
    pub bitrates_kbps: Vec<f64>,
    pub losses: Vec<f64>,
    /// One row per bitrate, one column per loss.
    pub quality_db: Vec<Vec<f64>>,
}

impl CodecProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("profile {}: {m}", self.label)));
        if self.bitrates_kbps.is_empty() || self.losses.is_empty() {
            return bad("empty axis".into());
        }
        if self.bitrates_kbps.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
            return bad("bitrates must be positive".into());
        }
        if self.bitrates_kbps.windows(2).any(|w| w[1] <= w[0]) {
            return bad("bitrates must be strictly increasing".into());
        }
        if self.losses[0] != 0.0 {
            return bad("loss axis must start at 0".into());
        }
        if self.losses.windows(2).any(|w| w[1] <= w[0]) || *self.losses.last().unwrap() > 1.0 {
            return bad("losses must be strictly increasing within [0, 1]".into());
        }
        if self.quality_db.len() != self.bitrates_kbps.len()
            || self.quality_db.iter().any(|r| r.len() != self.losses.len())
        {
            return bad("quality grid shape does not match the axes".into());
        }
        if self.quality_db.iter().flatten().any(|q| !q.is_finite()) {
            return bad("non-finite quality value".into());
        }
        if self.mode == CodecMode::Nvc {
            if let Some((i, j)) = self.first_monotonicity_violation() {
                return bad(format!("quality not monotone at cell ({i}, {j})"));
            }
        }
        Ok(())
    }

    /// First grid cell where quality increases with loss or decreases with
    /// bitrate.
    pub fn first_monotonicity_violation(&self) -> Option<(usize, usize)> {
        let q = &self.quality_db;
        for i in 0..q.len() {
            for j in 0..q[i].len() {
                if j + 1 < q[i].len() && q[i][j + 1] > q[i][j] {
                    return Some((i, j));
                }
                if i + 1 < q.len() && q[i + 1][j] < q[i][j] {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut p: CodecProfile = serde_json::from_str(&raw)?;
        if p.label.is_empty() {
            p.label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn min_bitrate(&self) -> f64 {
        self.bitrates_kbps[0]
    }

    pub fn max_bitrate(&self) -> f64 {
        *self.bitrates_kbps.last().unwrap()
    }

    /// Bilinear interpolation on (ln bitrate, loss). Out-of-grid bitrates are
    /// clamped to the edge.
    pub fn quality(&self, bitrate_kbps: f64, loss: f64) -> f64 {
        let b = if bitrate_kbps < self.min_bitrate() || bitrate_kbps > self.max_bitrate() {
            log::warn!(
                "profile {}: bitrate {bitrate_kbps:.1} kbps outside grid, clamped",
                self.label
            );
            bitrate_kbps.clamp(self.min_bitrate(), self.max_bitrate())
        } else {
            bitrate_kbps
        };
        let loss = loss.clamp(0.0, *self.losses.last().unwrap());

        let (i0, i1, wb) = bracket(&self.bitrates_kbps, b, f64::ln);
        let (j0, j1, wl) = bracket(&self.losses, loss, |x| x);
        let q = &self.quality_db;
        let lo = q[i0][j0] * (1.0 - wl) + q[i0][j1] * wl;
        let hi = q[i1][j0] * (1.0 - wl) + q[i1][j1] * wl;
        lo * (1.0 - wb) + hi * wb
    }

    /// Loss-free quality at `bitrate_kbps`.
    pub fn ceiling(&self, bitrate_kbps: f64) -> f64 {
        self.quality(bitrate_kbps, 0.0)
    }

    /// Lowest quality anywhere on the grid.
    pub fn floor_db(&self) -> f64 {
        self.quality_db
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Highest quality anywhere on the grid.
    pub fn ceiling_db(&self) -> f64 {
        self.quality_db
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Maps a quality onto `[0, 1]` between the profile's worst and best
    /// achievable quality. Values may fall outside when reference damage
    /// pushes quality below the grid floor.
    pub fn normalize(&self, quality_db: f64) -> f64 {
        let (lo, hi) = (self.floor_db(), self.ceiling_db());
        if hi > lo {
            (quality_db - lo) / (hi - lo)
        } else {
            1.0
        }
    }

    pub fn with_mode(&self, mode: CodecMode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }
}

fn bracket(axis: &[f64], x: f64, map: impl Fn(f64) -> f64) -> (usize, usize, f64) {
    if axis.len() == 1 {
        return (0, 0, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1);
    let lo = hi - 1;
    let (a, b) = (map(axis[lo]), map(axis[hi]));
    let w = ((map(x) - a) / (b - a)).clamp(0.0, 1.0);
    (lo, hi, w)
}

/// Shape parameters for the synthetic loss-tolerant profile
/// `q(R, L) = floor + (q0(R) - floor) * (1 - L^p)` with
/// `q0(R) = base + slope * ln(R / 100 kbps)`.
///
/// `slope` is solved so that `q(hi_rate, anchor_loss) - q(lo_rate, 0)` equals
/// `anchor_gain_db`: a high-rate frame with minor loss beats a lower-rate
/// lossless frame by a fixed margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfileParams {
    pub base_db: f64,
    pub floor_db: f64,
    pub loss_exponent: f64,
    pub anchor_gain_db: f64,
    pub anchor_hi_kbps: f64,
    pub anchor_lo_kbps: f64,
    pub anchor_loss: f64,
}

impl Default for SyntheticProfileParams {
    fn default() -> Self {
        Self {
            base_db: 7.0,
            floor_db: 4.0,
            loss_exponent: 1.5,
            anchor_gain_db: 2.0,
            anchor_hi_kbps: 1810.0,
            anchor_lo_kbps: 1068.0,
            anchor_loss: 0.10,
        }
    }
}

impl SyntheticProfileParams {
    /// Slope of loss-free quality per unit of ln(bitrate) satisfying the
    /// anchor relation.
    pub fn slope(&self) -> f64 {
        let keep = 1.0 - self.anchor_loss.powf(self.loss_exponent);
        let lh = (self.anchor_hi_kbps / REF_KBPS).ln();
        let ll = (self.anchor_lo_kbps / REF_KBPS).ln();
        // floor + (base + s*lh - floor)*keep - (base + s*ll) = gain
        let rhs = self.anchor_gain_db - self.floor_db * (1.0 - keep) + self.base_db * (1.0 - keep);
        rhs / (lh * keep - ll)
    }

    pub fn quality(&self, bitrate_kbps: f64, loss: f64) -> f64 {
        let q0 = self.base_db + self.slope() * (bitrate_kbps / REF_KBPS).ln();
        self.floor_db + (q0 - self.floor_db) * (1.0 - loss.powf(self.loss_exponent))
    }
}

const REF_KBPS: f64 = 100.0;

/// Grid used for synthetic profiles: 100–8000 kbps log-spaced, loss 0–1 in
/// 5 % steps.
pub fn synthetic_profile(label: &str, params: &SyntheticProfileParams) -> CodecProfile {
    let n_rates = 33;
    let (lo, hi) = (100.0f64, 8000.0f64);
    let mut bitrates_kbps: Vec<f64> = (0..n_rates)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n_rates - 1) as f64).exp())
        .collect();
    // pin the ends so the controllers' rate limits land on the grid exactly
    bitrates_kbps[0] = lo;
    bitrates_kbps[n_rates - 1] = hi;
    let losses: Vec<f64> = (0..=20).map(|j| j as f64 * 0.05).collect();
    let quality_db = bitrates_kbps
        .iter()
        .map(|&r| losses.iter().map(|&l| params.quality(r, l)).collect())
        .collect();
    CodecProfile {
        label: label.to_string(),
        mode: CodecMode::Nvc,
        bitrates_kbps,
        losses,
        quality_db,
    }
}

pub fn default_nvc_profile() -> CodecProfile {
    synthetic_profile("nvc-default", &SyntheticProfileParams::default())
}

/// Same loss-free qualities as [`default_nvc_profile`], decoded by a codec
/// that needs complete frames.
pub fn default_traditional_profile() -> CodecProfile {
    let mut p = default_nvc_profile().with_mode(CodecMode::Traditional);
    p.label = "traditional-default".into();
    p
}

/// `n` content variants standing in for different videos: they differ in
/// loss-free quality offset, loss sensitivity and the high-rate-with-loss
/// gain. The first one is the default profile.
pub fn synthetic_profile_set(n: usize) -> Vec<CodecProfile> {
    const VARIANTS: [(f64, f64, f64, f64); 5] = [
        // base_db, floor_db, loss_exponent, anchor_gain_db
        (7.0, 4.0, 1.5, 2.0),
        (5.5, 3.0, 1.3, 1.6),
        (8.5, 5.0, 1.8, 2.4),
        (6.0, 3.5, 1.6, 1.8),
        (9.0, 5.5, 1.4, 2.2),
    ];
    (0..n)
        .map(|i| {
            let (base_db, floor_db, loss_exponent, anchor_gain_db) = VARIANTS[i % VARIANTS.len()];
            let params = SyntheticProfileParams {
                base_db: base_db + 0.25 * (i / VARIANTS.len()) as f64,
                floor_db,
                loss_exponent,
                anchor_gain_db,
                ..Default::default()
            };
            let label = if i == 0 {
                "nvc-default".to_string()
            } else {
                format!("nvc-v{i}")
            };
            synthetic_profile(&label, &params)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_point_interpolation_is_exact() {
        let p = default_nvc_profile();
        let r = p.bitrates_kbps[7];
        assert!((p.quality(r, 0.0) - p.quality_db[7][0]).abs() < 1e-12);
        assert!((p.quality(r, 0.25) - p.quality_db[7][5]).abs() < 1e-12);
    }

    #[test]
    fn anchor_relation() {
        let p = default_nvc_profile();
        let gain = p.quality(1810.0, 0.10) - p.quality(1068.0, 0.0);
        assert!((gain - 2.0).abs() <= 0.2, "gain {gain}");
    }

    #[test]
    fn full_grid_monotone() {
        for p in synthetic_profile_set(5) {
            assert_eq!(p.first_monotonicity_violation(), None, "{}", p.label);
            p.validate().unwrap();
        }
    }

    #[test]
    fn lossless_quality_strictly_increases() {
        let p = default_nvc_profile();
        for w in p.quality_db.windows(2) {
            assert!(w[1][0] > w[0][0]);
        }
    }

    #[test]
    fn total_loss_hits_floor() {
        let params = SyntheticProfileParams::default();
        let p = default_nvc_profile();
        for row in &p.quality_db {
            assert!((row.last().unwrap() - params.floor_db).abs() < 1e-12);
        }
        assert!((p.floor_db() - params.floor_db).abs() < 1e-12);
    }

    #[test]
    fn concave_in_loss() {
        let p = default_nvc_profile();
        for row in &p.quality_db {
            for w in row.windows(3) {
                // second difference <= 0
                assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
            }
        }
    }

    #[test]
    fn log_linear_in_bitrate() {
        let p = default_nvc_profile();
        let d1 = p.quality(400.0, 0.0) - p.quality(200.0, 0.0);
        let d2 = p.quality(3200.0, 0.0) - p.quality(1600.0, 0.0);
        assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn out_of_grid_bitrate_clamps() {
        let p = default_nvc_profile();
        assert_eq!(p.quality(10.0, 0.0), p.quality(100.0, 0.0));
        assert_eq!(p.quality(1e6, 0.0), p.quality(8000.0, 0.0));
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = default_nvc_profile();
        p.save(&path).unwrap();
        assert_eq!(CodecProfile::load(&path).unwrap(), p);

        let mut bad = p.clone();
        bad.quality_db[3][4] = 100.0;
        bad.save(&path).unwrap();
        assert!(CodecProfile::load(&path).is_err());

        let mut ragged = p;
        ragged.quality_db[0].pop();
        assert!(ragged.validate().is_err());
    }

    #[test]
    fn schema_field_names() {
        let v = serde_json::to_value(default_nvc_profile()).unwrap();
        for k in ["mode", "bitrates_kbps", "losses", "quality_db"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert_eq!(v["mode"], "nvc");
    }
}
