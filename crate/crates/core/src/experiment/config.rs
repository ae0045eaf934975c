use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::{default_nvc_profile, default_traditional_profile, synthetic_profile_set, CodecProfile};
use crate::controllers::{GccConfig, SafeguardConfig};
use crate::rl::{TraceSource, TrainConfig, TrainEnv};
use crate::simcore::SessionConfig;
use crate::traces::{generate_traces, load_trace, load_trace_dir, NetworkTrace, TraceGenParams};
use crate::{Error, Result};

/// Where an experiment's traces come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceSpec {
    /// `count` traces drawn up front from `params`.
    Generated {
        count: usize,
        seed: u64,
        #[serde(default)]
        params: TraceGenParams,
    },
    /// A fresh trace per training episode. Training only.
    PerEpisode {
        #[serde(default)]
        params: TraceGenParams,
    },
    /// Every `*.txt` trace in a directory.
    Dir { path: PathBuf },
    Files { paths: Vec<PathBuf> },
}

impl TraceSpec {
    fn resolve_paths(&mut self, base: &Path) {
        match self {
            TraceSpec::Dir { path } => *path = base.join(&*path),
            TraceSpec::Files { paths } => paths.iter_mut().for_each(|p| *p = base.join(&*p)),
            _ => {}
        }
    }

    fn check_files(&self) -> Result<()> {
        let missing = |p: &Path| Error::Config(format!("trace path {} does not exist", p.display()));
        match self {
            TraceSpec::Dir { path } if !path.is_dir() => Err(missing(path)),
            TraceSpec::Files { paths } => match paths.iter().find(|p| !p.is_file()) {
                Some(p) => Err(missing(p)),
                None => Ok(()),
            },
            TraceSpec::Generated { params, .. } | TraceSpec::PerEpisode { params } => params.validate(),
            _ => Ok(()),
        }
    }

    /// Materialises a fixed trace list.
    pub fn load(&self) -> Result<Vec<NetworkTrace>> {
        let traces = match self {
            TraceSpec::Generated { count, seed, params } => generate_traces(params, *count, *seed)?,
            TraceSpec::PerEpisode { .. } => {
                return Err(Error::Config("per-episode traces only apply to training".into()))
            }
            TraceSpec::Dir { path } => load_trace_dir(path)?,
            TraceSpec::Files { paths } => paths.iter().map(|p| load_trace(p)).collect::<Result<_>>()?,
        };
        if traces.is_empty() {
            return Err(Error::Empty("trace set"));
        }
        Ok(traces)
    }

    fn source(&self) -> Result<TraceSource> {
        match self {
            TraceSpec::PerEpisode { params } => Ok(TraceSource::Generated(params.clone())),
            other => Ok(TraceSource::Fixed(other.load()?)),
        }
    }
}

/// Which codec profiles an experiment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `nvc-default` and/or `traditional-default`.
    Builtin { names: Vec<String> },
    /// The first `count` synthetic content variants.
    Synthetic { count: usize },
    /// Profile JSON files.
    Files { paths: Vec<PathBuf> },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Builtin {
            names: vec!["nvc-default".into()],
        }
    }
}

impl ProfileSpec {
    fn resolve_paths(&mut self, base: &Path) {
        if let ProfileSpec::Files { paths } = self {
            paths.iter_mut().for_each(|p| *p = base.join(&*p));
        }
    }

    pub fn load(&self) -> Result<Vec<CodecProfile>> {
        let profiles = match self {
            ProfileSpec::Builtin { names } => names
                .iter()
                .map(|n| match n.as_str() {
                    "nvc-default" => Ok(default_nvc_profile()),
                    "traditional-default" => Ok(default_traditional_profile()),
                    other => Err(Error::Config(format!("unknown builtin profile {other:?}"))),
                })
                .collect::<Result<Vec<_>>>()?,
            ProfileSpec::Synthetic { count } => synthetic_profile_set(*count),
            ProfileSpec::Files { paths } => paths
                .iter()
                .map(|p| CodecProfile::load(p))
                .collect::<Result<Vec<_>>>()?,
        };
        if profiles.is_empty() {
            return Err(Error::Empty("profile set"));
        }
        Ok(profiles)
    }
}

/// One controller column of an evaluation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerSpec {
    Gcc {
        #[serde(default)]
        config: Option<GccConfig>,
    },
    Oracle,
    Fixed {
        rate_kbps: f64,
    },
    /// A trained policy. Actions are sampled from a seeded generator unless
    /// `deterministic`, which acts on the policy mean. With `safeguard` it
    /// runs under the jitter safeguard.
    Rl {
        name: String,
        checkpoint: PathBuf,
        #[serde(default)]
        safeguard: Option<SafeguardConfig>,
        #[serde(default)]
        deterministic: bool,
    },
}

impl ControllerSpec {
    pub fn name(&self) -> String {
        match self {
            ControllerSpec::Gcc { .. } => "gcc".into(),
            ControllerSpec::Oracle => "oracle".into(),
            ControllerSpec::Fixed { rate_kbps } => format!("fixed-{rate_kbps}"),
            ControllerSpec::Rl { name, .. } => name.clone(),
        }
    }
}

/// The `[train]` table: what to train and on which episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub traces: TraceSpec,
    pub validation: TraceSpec,
    #[serde(default)]
    pub profiles: ProfileSpec,
    /// Validation profiles; the training profiles when absent.
    #[serde(default)]
    pub validation_profiles: Option<ProfileSpec>,
    #[serde(default)]
    pub config: TrainConfig,
}

impl TrainSpec {
    pub fn env(&self) -> Result<TrainEnv> {
        let profiles = self.profiles.load()?;
        let validation_profiles = match &self.validation_profiles {
            Some(p) => p.load()?,
            None => profiles.clone(),
        };
        let env = TrainEnv {
            traces: self.traces.source()?,
            profiles,
            validation_traces: self.validation.load()?,
            validation_profiles,
        };
        env.validate()?;
        Ok(env)
    }
}

/// One experiment, read from a TOML file.
///
/// Relative paths inside the file resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Output root; overridden by the command line or the environment.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub session: SessionConfig,
    /// Evaluation traces.
    #[serde(default)]
    pub traces: Option<TraceSpec>,
    #[serde(default)]
    pub profiles: ProfileSpec,
    #[serde(default)]
    pub controllers: Vec<ControllerSpec>,
    /// Write a per-session frame CSV next to the results.
    #[serde(default = "yes")]
    pub session_logs: bool,
    #[serde(default)]
    pub train: Option<TrainSpec>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(d) = &mut self.output_dir {
            *d = base.join(&*d);
        }
        if let Some(t) = &mut self.traces {
            t.resolve_paths(base);
        }
        self.profiles.resolve_paths(base);
        for c in &mut self.controllers {
            if let ControllerSpec::Rl { checkpoint, .. } = c {
                *checkpoint = base.join(&*checkpoint);
            }
        }
        if let Some(t) = &mut self.train {
            t.traces.resolve_paths(base);
            t.validation.resolve_paths(base);
            t.profiles.resolve_paths(base);
            if let Some(p) = &mut t.validation_profiles {
                p.resolve_paths(base);
            }
        }
    }

    /// Checks everything except checkpoints, which may not exist until
    /// training has run.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("experiment name {:?} is not a plain name", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if let Some(t) = &self.traces {
            t.check_files()?;
            if matches!(t, TraceSpec::PerEpisode { .. }) {
                return Err(Error::Config("evaluation traces cannot be per-episode".into()));
            }
        }
        for p in [&self.profiles]
            .into_iter()
            .chain(self.train.iter().map(|t| &t.profiles))
            .chain(self.train.iter().filter_map(|t| t.validation_profiles.as_ref()))
        {
            if let ProfileSpec::Files { paths } = p {
                if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
                    return Err(Error::Config(format!("profile {} does not exist", missing.display())));
                }
            }
        }
        let mut names: Vec<String> = self.controllers.iter().map(ControllerSpec::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("controller name {:?} appears twice", w[0])));
        }
        for c in &self.controllers {
            if let ControllerSpec::Rl {
                safeguard: Some(sg), ..
            } = c
            {
                sg.validate()?;
            }
        }
        if let Some(t) = &self.train {
            t.traces.check_files()?;
            t.validation.check_files()?;
            if let Some(sg) = &t.config.safeguard {
                sg.validate()?;
            }
        }
        Ok(())
    }
}
