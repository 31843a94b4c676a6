use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qcrystal::gibbs::ChainConfig;
use qcrystal::interaction::{BoundaryMode, BoundarySource, Model, ModelSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variable that overrides the output directory of a manifest.
pub const OUT_ENV: &str = "QCRYSTAL_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Ibp,
    Flow,
    Dlr,
    Moments,
    Holder,
    Matsubara,
    Conditions,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Ibp,
        Suite::Flow,
        Suite::Dlr,
        Suite::Moments,
        Suite::Holder,
        Suite::Matsubara,
        Suite::Conditions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ibp => "ibp",
            Suite::Flow => "flow",
            Suite::Dlr => "dlr",
            Suite::Moments => "moments",
            Suite::Holder => "holder",
            Suite::Matsubara => "matsubara",
            Suite::Conditions => "conditions",
            Suite::All => "all",
        }
    }

    /// Whether the suite reads the sample stream of the run.
    pub fn needs_samples(self) -> bool {
        matches!(self, Suite::Ibp | Suite::Flow | Suite::Dlr | Suite::Holder | Suite::Matsubara)
    }
}

/// Expands `all` and removes duplicates, keeping the canonical order.
pub fn expand_suites(list: &[Suite]) -> Vec<Suite> {
    if list.contains(&Suite::All) {
        return Suite::EACH.to_vec();
    }
    Suite::EACH.iter().copied().filter(|s| list.contains(s)).collect()
}

/// Model given inline (a spec document, possibly with a `preset` key) or as a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(Value),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    #[serde(default = "five")]
    pub threshold: f64,
    /// Shift size for the quasi-invariance suite.
    #[serde(default = "tenth")]
    pub flow_theta: f64,
    /// Sweeps per volume of the moment ladder (default: the chain's).
    #[serde(default)]
    pub ladder_sweeps: Option<u64>,
    /// Boundary of the ladder volumes (default periodic).
    #[serde(default = "periodic")]
    pub ladder_boundary: BoundaryMode,
    #[serde(default = "four")]
    pub time_shifts: usize,
    /// Starting Hermite basis size of the ED comparison.
    #[serde(default = "sixty")]
    pub ed_dim: usize,
    /// Sample inline when no stream is found.
    #[serde(default)]
    pub sample_inline: bool,
}

fn five() -> f64 {
    5.0
}
fn tenth() -> f64 {
    0.1
}
fn four() -> usize {
    4
}
fn sixty() -> usize {
    60
}
fn periodic() -> BoundaryMode {
    BoundaryMode::Periodic
}

impl Default for VerifyOptions {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn all_suites() -> Vec<Suite> {
    vec![Suite::All]
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// One batch run: model, chain, suites, output directory and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub model: ModelRef,
    #[serde(default)]
    pub chain: Option<ChainConfig>,
    #[serde(default = "all_suites")]
    pub suites: Vec<Suite>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Existing sample stream for `verify`; defaults to `<out>/samples.bin`.
    #[serde(default)]
    pub samples: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifyOptions,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

/// Command-line values that take precedence over the manifest.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub suites: Option<Vec<Suite>>,
}

impl RunManifest {
    pub fn load(path: &Path, over: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        let mut m: RunManifest = serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.base = base.to_path_buf();
        if let ModelRef::Path(p) = &mut m.model {
            *p = base.join(&*p);
        }
        if let Some(s) = &mut m.samples {
            *s = base.join(&*s);
        }
        m.out = base.join(&m.out);
        if let Ok(dir) = std::env::var(OUT_ENV) {
            m.out = PathBuf::from(dir);
        }
        if let Some(o) = &over.out {
            m.out = o.clone();
        }
        if let Some(s) = over.seed {
            m.seed = s;
        }
        if let Some(s) = &over.suites {
            m.suites = s.clone();
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let ModelRef::Path(p) = &self.model {
            if !p.is_file() {
                bail!("model file {} does not exist", p.display());
            }
        }
        if let Some(s) = &self.samples {
            if !s.is_file() {
                bail!("sample stream {} does not exist", s.display());
            }
        }
        if self.suites.is_empty() {
            bail!("no suites selected");
        }
        if let Some(c) = &self.chain {
            c.validate()?;
        }
        Ok(())
    }

    /// The model spec, with a frozen boundary file resolved like every other path.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut spec = match &self.model {
            ModelRef::Path(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read model {}", p.display()))?;
                ModelSpec::from_json(&text).with_context(|| format!("invalid model {}", p.display()))?
            }
            ModelRef::Inline(v) => ModelSpec::from_value(v.clone()).context("invalid inline model")?,
        };
        if let BoundaryMode::Frozen { source: BoundarySource::File { path } } = &mut spec.lattice.boundary {
            *path = self.base.join(&*path).to_string_lossy().into_owned();
        }
        Ok(spec)
    }

    pub fn build_model(&self) -> Result<Model> {
        Model::new(self.model_spec()?).context("model validation failed")
    }

    /// The chain configuration with the run seed applied.
    pub fn chain_config(&self) -> ChainConfig {
        let mut c = self.chain.clone().unwrap_or_else(|| ChainConfig::pcn(0.5, 20_000, 1_000, 0));
        c.seed = self.seed;
        c
    }

    pub fn suites(&self) -> Vec<Suite> {
        expand_suites(&self.suites)
    }
}
