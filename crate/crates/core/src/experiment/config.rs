use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::build_grid;
use crate::groundstate::GroundStateOptions;
use crate::io::{GridSpec, ModelSpec};

/// Model section: every physics parameter is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub d: usize,
    /// Number of components; must match the lengths of `alpha` and `gamma`.
    pub l: usize,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl ModelSection {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            d: self.d,
            alpha: self.alpha.clone(),
            gamma: self.gamma.clone(),
            params: self.params.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "hundred")]
    pub blowup_factor: f64,
    #[serde(default = "milli")]
    pub boundary_mass_tol: f64,
    /// Radius of the truncated virials; `r_max / 4` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virial_radius: Option<f64>,
}

fn one() -> usize {
    1
}
fn hundred() -> f64 {
    100.0
}
fn milli() -> f64 {
    1e-3
}

/// Initial data recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    /// `a·ψ`, with `ψ` from `[reference]` or computed on the fly.
    GroundState { amplitude: f64 },
    /// `a_k e^{−(r/w_k)²}` in component `k`.
    Gaussian { amplitudes: Vec<f64>, widths: Vec<f64> },
    /// Continue from a saved checkpoint.
    Checkpoint { path: PathBuf },
}

/// Where thresholds come from: a ground-state file, or explicit numbers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_state: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_opt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_check_tol")]
    pub tol: f64,
}

fn default_samples() -> usize {
    10_000
}
fn default_check_tol() -> f64 {
    1e-8
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            tol: default_check_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub amplitudes: Vec<f64>,
    #[serde(default = "one")]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(default)]
    pub groundstate: GroundStateOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| usage(format!("config: {e}")))
    }

    /// The effective config as a document; parsing it gives back `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| usage(format!("config serialization: {e}")))
    }

    /// SHA-256 of the effective config document with the output directory
    /// blanked, so that the same experiment written elsewhere keeps its hash.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
    }

    /// Checks ranges and cross-field consistency.  Paths are checked
    /// separately by [`Experiment`] once they are resolved.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.alpha.len() != m.l || m.gamma.len() != m.l {
            return Err(usage(format!(
                "model: l = {} but alpha has {} and gamma has {} entries",
                m.l,
                m.alpha.len(),
                m.gamma.len()
            )));
        }
        m.spec().build().map_err(|e| usage(format!("model: {}", inner(e))))?;
        build_grid(m.d, self.grid.n, self.grid.r_max).map_err(|e| usage(format!("grid: {}", inner(e))))?;
        if let Some(i) = &self.integrator {
            let ok = i.dt > 0.0
                && i.dt.is_finite()
                && i.t_end > 0.0
                && i.t_end.is_finite()
                && i.record_every >= 1
                && i.blowup_factor > 1.0
                && i.boundary_mass_tol > 0.0
                && i.virial_radius.is_none_or(|r| r > 0.0 && r.is_finite());
            if !ok {
                return Err(usage(format!(
                    "integrator: need dt > 0, t_end > 0, record_every >= 1, blowup_factor > 1, \
                     boundary_mass_tol > 0 and a positive virial_radius; got {i:?}"
                )));
            }
        }
        self.groundstate
            .validate(m.l)
            .map_err(|e| usage(format!("groundstate: {}", inner(e))))?;
        match &self.initial {
            Some(InitialSection::GroundState { amplitude }) if !(amplitude.is_finite() && *amplitude >= 0.0) => {
                return Err(usage(format!("initial: amplitude {amplitude} must be non-negative")));
            }
            Some(InitialSection::Gaussian { amplitudes, widths }) => {
                if amplitudes.len() != m.l || widths.len() != m.l {
                    return Err(usage(format!("initial: need {} amplitudes and widths", m.l)));
                }
                if amplitudes.iter().any(|a| !a.is_finite()) || widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(usage("initial: amplitudes must be finite and widths positive"));
                }
            }
            _ => {}
        }
        let r = &self.reference;
        for (name, v) in [("e_psi", r.e_psi), ("k_psi", r.k_psi), ("c_opt", r.c_opt)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(usage(format!("reference: {name} = {v} must be positive")));
                }
            }
        }
        let explicit = [r.e_psi, r.k_psi, r.c_opt].iter().filter(|v| v.is_some()).count();
        if explicit != 0 && explicit != 3 {
            return Err(usage("reference: give all of e_psi, k_psi and c_opt, or none"));
        }
        if explicit == 3 && r.ground_state.is_some() {
            return Err(usage("reference: give either ground_state or explicit thresholds, not both"));
        }
        if !(self.check.samples >= 1 && self.check.tol > 0.0 && self.check.tol.is_finite()) {
            return Err(usage("check: samples must be >= 1 and tol positive"));
        }
        if let Some(s) = &self.sweep {
            if s.amplitudes.is_empty() || s.amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(usage("sweep: amplitudes must be a non-empty list of non-negative numbers"));
            }
            if s.workers == 0 {
                return Err(usage("sweep: workers must be >= 1"));
            }
        }
        Ok(())
    }
}

fn inner(e: Error) -> String {
    match e {
        Error::Domain(s) | Error::Usage(s) | Error::State(s) | Error::Numerical(s) => s,
        other => other.to_string(),
    }
}

/// A validated config together with the directory its relative paths are
/// resolved against (the directory of the config file).
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base: PathBuf,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, base: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let exp = Self {
            config,
            base: base.into(),
        };
        for p in exp.input_paths() {
            if !p.is_file() {
                return Err(usage(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(exp)
    }

    pub fn from_str(text: &str, base: impl Into<PathBuf>) -> Result<Self> {
        Self::new(ExperimentConfig::parse(text)?, base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.config.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.config.output.dir = dir.into();
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output.dir)
    }

    fn input_paths(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        if let Some(InitialSection::Checkpoint { path }) = &self.config.initial {
            out.push(self.resolve(path));
        }
        if let Some(p) = &self.config.reference.ground_state {
            out.push(self.resolve(p));
        }
        out
    }
}
