//! Persistent artifacts: checkpoints, time series and summaries.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::Discretization;
use crate::groundstate::GroundState;
use crate::model::{ModelParams, NonlinearityModel};
use crate::propagate::{Resume, SolutionState};
use crate::scalar::C;

pub const CHECKPOINT_FORMAT: &str = "biharm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Crate version stamped into every artifact.
pub fn code_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Named built-in model with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub d: usize,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Model-specific constants such as `beta` or `exponent`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<NonlinearityModel<f64>> {
        let params = ModelParams::new(self.d, self.alpha.clone(), self.gamma.clone())?;
        NonlinearityModel::by_name(&self.name, params, &self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
}

/// A state on disk.  Node values are `[re, im]` pairs in node order and
/// round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub model: ModelSpec,
    pub d: usize,
    pub grid: GridSpec,
    pub t: f64,
    pub fields: Vec<Vec<[f64; 2]>>,
    /// Present when the checkpoint continues a run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume: Option<Resume<f64>>,
}

impl Checkpoint {
    pub fn from_state(state: &SolutionState<f64>, model: &ModelSpec, config_hash: &str) -> Self {
        let grid = state.space().grid();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            code_version: code_version().into(),
            config_hash: config_hash.into(),
            model: model.clone(),
            d: grid.d(),
            grid: GridSpec {
                n: grid.n(),
                r_max: grid.r_max(),
            },
            t: state.t(),
            fields: state
                .fields()
                .iter()
                .map(|f| f.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            resume: None,
        }
    }

    pub fn with_resume(mut self, resume: Resume<f64>) -> Self {
        self.resume = Some(resume);
        self
    }

    /// Rebuilds the state on `space`, which must match the stored grid.
    pub fn to_state(&self, space: Arc<Discretization<f64>>, model: Arc<NonlinearityModel<f64>>) -> Result<SolutionState<f64>> {
        let g = space.grid();
        if g.d() != self.d || g.n() != self.grid.n || g.r_max().to_bits() != self.grid.r_max.to_bits() {
            return Err(Error::Usage(format!(
                "checkpoint grid (d={}, n={}, r_max={}) does not match the configured grid (d={}, n={}, r_max={})",
                self.d,
                self.grid.n,
                self.grid.r_max,
                g.d(),
                g.n(),
                g.r_max()
            )));
        }
        let fields = self
            .fields
            .iter()
            .map(|f| f.iter().map(|p| C::new(p[0], p[1])).collect())
            .collect();
        SolutionState::new(self.t, fields, space, model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cp: Self = serde_json::from_str(&text)?;
        if cp.format != CHECKPOINT_FORMAT {
            return Err(Error::Usage(format!("{} is not a checkpoint (format '{}')", path.display(), cp.format)));
        }
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Usage(format!("unsupported checkpoint version {}", cp.version)));
        }
        Ok(cp)
    }
}

pub const GROUND_STATE_FORMAT: &str = "biharm-groundstate";

/// A computed ground state with the grid and model it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateFile {
    pub format: String,
    pub version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub ground_state: GroundState<f64>,
}

impl GroundStateFile {
    pub fn new(ground_state: GroundState<f64>, model: &ModelSpec, grid: GridSpec, config_hash: &str) -> Self {
        Self {
            format: GROUND_STATE_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            code_version: code_version().into(),
            config_hash: config_hash.into(),
            model: model.clone(),
            grid,
            ground_state,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let gs: Self = read_json(path)?;
        if gs.format != GROUND_STATE_FORMAT {
            return Err(Error::Usage(format!("{} is not a ground-state file (format '{}')", path.display(), gs.format)));
        }
        if gs.version != CHECKPOINT_VERSION {
            return Err(Error::Usage(format!("unsupported ground-state file version {}", gs.version)));
        }
        Ok(gs)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<V: for<'de> Deserialize<'de>>(path: &Path) -> Result<V> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub const TIMESERIES_COLUMNS: [&str; 11] = [
    "t",
    "M",
    "K",
    "P",
    "E",
    "S_accum",
    "V",
    "V_rate_rhs",
    "zR",
    "coercivity",
    "boundary_mass_fraction",
];

fn row(r: &DiagnosticsRecord<f64>) -> [f64; 11] {
    [
        r.t,
        r.mass,
        r.kinetic,
        r.potential,
        r.energy,
        r.s_accum,
        r.virial,
        r.virial_rate_rhs,
        r.z_r,
        r.coercivity,
        r.boundary_mass_fraction,
    ]
}

/// CSV time series: a `#` provenance line, a header row, one row per record.
/// Values use the shortest round-tripping decimal form.
pub fn write_timeseries<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a DiagnosticsRecord<f64>>,
    config_hash: &str,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = fs::File::create(path)?;
    writeln!(file, "# config_hash={config_hash}, code_version={}", code_version())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(TIMESERIES_COLUMNS)?;
    for r in records {
        w.write_record(row(r).iter().map(|x| format!("{x:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_timeseries`] back into columns.
pub fn read_timeseries(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let (comment, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::Usage(format!("{} is empty", path.display())))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Usage(format!("bad number '{s}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    Ok((comment.trim_start_matches('#').trim().to_string(), header, rows))
}
