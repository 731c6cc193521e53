use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{Experiment, InitialSection};
use crate::diagnostics::{classify_values, Classification, CoercivityConstants, DiagnosticsRecord, Thresholds};
use crate::error::{Error, Result};
use crate::grid::Discretization;
use crate::groundstate::{solve_ground_state, validate_pohozaev, GroundState};
use crate::io::{code_version, write_json, write_timeseries, Checkpoint, GroundStateFile};
use crate::model::{check_hypotheses, NonlinearityModel};
use crate::propagate::{evolve, EvolveOptions, Resume, SolutionState, Termination, Trajectory};
use crate::scalar::C;

/// Relative tolerance for the identities a computed ground state must satisfy.
pub const POHOZAEV_TOL: f64 = 1e-4;

/// A run counts as having a stabilizing scattering size when the increase
/// of `S_accum` over the second half of the recorded window is at most this
/// fraction of its final value.
pub const STABILIZING_TAIL: f64 = 0.01;

/// Result of a command.  `success == false` means an invariant or a
/// convergence requirement failed; scientific outcomes such as detected
/// blow-up are successes.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub success: bool,
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
}

/// Process exit status for a command result: usage errors map to 2, every
/// other failure to 1.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.success => 0,
        Ok(_) => 1,
        Err(Error::Usage(_)) => 2,
        Err(_) => 1,
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn stamp(exp: &Experiment, mut body: Value) -> Result<Value> {
    body["config_hash"] = json!(exp.config.hash()?);
    body["code_version"] = json!(code_version());
    Ok(body)
}

pub fn build_model(exp: &Experiment) -> Result<Arc<NonlinearityModel<f64>>> {
    Ok(Arc::new(exp.config.model.spec().build()?))
}

pub fn build_space(exp: &Experiment) -> Result<Arc<Discretization<f64>>> {
    let g = &exp.config.grid;
    Ok(Arc::new(Discretization::build(exp.config.model.d, g.n, g.r_max)?))
}

pub fn cmd_check(exp: &Experiment) -> Result<Outcome> {
    let model = build_model(exp)?;
    let report = check_hypotheses(&*model, exp.config.check.samples, exp.config.check.tol, exp.config.seed)?;
    let path = exp.output_dir().join("hypotheses.json");
    write_json(&path, &stamp(exp, serde_json::to_value(&report)?)?)?;
    Ok(Outcome {
        success: report.all_pass(),
        summary: stamp(exp, serde_json::to_value(&report)?)?,
        artifacts: vec![path],
    })
}

/// Summary numbers of a ground state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSummary {
    #[serde(rename = "I")]
    pub normalized_value: f64,
    #[serde(rename = "K_psi")]
    pub kinetic: f64,
    #[serde(rename = "E_psi")]
    pub energy: f64,
    #[serde(rename = "P_psi")]
    pub potential: f64,
    #[serde(rename = "C_opt")]
    pub c_opt: f64,
    pub c_opt_from_kinetic: f64,
    pub c_opt_disagreement: f64,
    pub residual: f64,
    pub pohozaev: crate::groundstate::PohozaevReport,
}

impl GroundStateSummary {
    pub fn of(gs: &GroundState<f64>) -> Result<Self> {
        let copt = gs.copt()?;
        Ok(Self {
            normalized_value: gs.normalized_value,
            kinetic: gs.kinetic,
            energy: gs.energy,
            potential: gs.potential,
            c_opt: gs.c_opt,
            c_opt_from_kinetic: copt.from_kinetic,
            c_opt_disagreement: copt.relative_disagreement(),
            residual: gs.residual,
            pohozaev: validate_pohozaev(gs, POHOZAEV_TOL),
        })
    }
}

pub fn cmd_groundstate(exp: &Experiment) -> Result<Outcome> {
    let model = build_model(exp)?;
    let dir = exp.output_dir();
    let check = check_hypotheses(&*model, exp.config.check.samples, exp.config.check.tol, exp.config.seed)?;
    if !check.all_pass() {
        let path = dir.join("hypotheses.json");
        write_json(&path, &stamp(exp, serde_json::to_value(&check)?)?)?;
        return Ok(Outcome {
            success: false,
            summary: stamp(exp, json!({"error": "model fails the hypothesis audit", "report": check}))?,
            artifacts: vec![path],
        });
    }
    let space = build_space(exp)?;
    match solve_ground_state(&*model, &space, &exp.config.groundstate) {
        Ok((gs, min)) => {
            let summary = GroundStateSummary::of(&gs)?;
            let hash = exp.config.hash()?;
            let gs_path = dir.join("groundstate.json");
            GroundStateFile::new(gs.clone(), &exp.config.model.spec(), exp.config.grid, &hash).save(&gs_path)?;
            let psi = gs.state(1.0, 0.0, Arc::clone(&space), Arc::clone(&model))?;
            let cp_path = dir.join("psi_checkpoint.json");
            Checkpoint::from_state(&psi, &exp.config.model.spec(), &hash).save(&cp_path)?;
            let body = stamp(
                exp,
                json!({
                    "ground_state": summary,
                    "iterations": min.iterations,
                    "decrement": min.decrement,
                    "scale_force": min.scale_force,
                }),
            )?;
            let sum_path = dir.join("summary.json");
            write_json(&sum_path, &body)?;
            Ok(Outcome {
                success: summary.pohozaev.passed,
                summary: body,
                artifacts: vec![gs_path, cp_path, sum_path],
            })
        }
        Err(Error::IterationLimit {
            iterations,
            decrement,
            last,
        }) => {
            let path = dir.join("groundstate_last_iterate.json");
            let body = stamp(
                exp,
                json!({
                    "error": "ground-state iteration did not converge",
                    "iterations": iterations,
                    "decrement": decrement,
                    "nodes": space.grid().nodes(),
                    "profiles": last,
                }),
            )?;
            write_json(&path, &body)?;
            Ok(Outcome {
                success: false,
                summary: json!({"error": "ground-state iteration did not converge", "iterations": iterations,
                    "decrement": decrement, "last_iterate": path}),
                artifacts: vec![path],
            })
        }
        Err(e) => Err(e),
    }
}

/// Loads the reference ground state, checking that it belongs to the
/// configured model and, when `same_grid`, to the configured grid.
fn reference_ground_state(exp: &Experiment, same_grid: bool) -> Result<Option<(GroundState<f64>, String)>> {
    let Some(p) = &exp.config.reference.ground_state else {
        return Ok(None);
    };
    let path = exp.resolve(p);
    let file = GroundStateFile::load(&path)?;
    if file.model != exp.config.model.spec() {
        return Err(usage(format!("{} was computed for a different model", path.display())));
    }
    if same_grid && file.grid != exp.config.grid {
        return Err(usage(format!(
            "{} was computed on grid {:?}, the config uses {:?}",
            path.display(),
            file.grid,
            exp.config.grid
        )));
    }
    Ok(Some((file.ground_state, path.display().to_string())))
}

/// Ground state from `[reference]`, or computed with `[groundstate]`.
pub fn obtain_ground_state(exp: &Experiment, model: &NonlinearityModel<f64>, space: &Discretization<f64>) -> Result<(GroundState<f64>, String)> {
    if let Some(found) = reference_ground_state(exp, true)? {
        return Ok(found);
    }
    let (gs, _) = solve_ground_state(model, space, &exp.config.groundstate)?;
    Ok((gs, "computed from [groundstate]".into()))
}

/// Thresholds from `[reference]`; `None` when none are configured.
pub fn reference_thresholds(exp: &Experiment) -> Result<Option<Thresholds>> {
    let r = &exp.config.reference;
    if let (Some(e), Some(k), Some(c)) = (r.e_psi, r.k_psi, r.c_opt) {
        return Ok(Some(Thresholds::new(e, k, c, exp.config.model.d, "explicit [reference] values")?));
    }
    match reference_ground_state(exp, false)? {
        Some((gs, src)) => Ok(Some(gs.thresholds(src)?)),
        None => Ok(None),
    }
}

/// Initial data and, for a checkpoint, the bookkeeping needed to resume.
pub struct InitialData {
    pub state: SolutionState<f64>,
    pub resume: Option<Resume<f64>>,
    /// Set when the data is `a·ψ`.
    pub ground_state: Option<(GroundState<f64>, String, f64)>,
}

pub fn initial_data(exp: &Experiment, space: &Arc<Discretization<f64>>, model: &Arc<NonlinearityModel<f64>>) -> Result<InitialData> {
    let Some(init) = &exp.config.initial else {
        return Err(usage("config has no [initial] section"));
    };
    match init {
        InitialSection::GroundState { amplitude } => {
            let (gs, src) = obtain_ground_state(exp, model, space)?;
            let state = gs.state(*amplitude, 0.0, Arc::clone(space), Arc::clone(model))?;
            Ok(InitialData {
                state,
                resume: None,
                ground_state: Some((gs, src, *amplitude)),
            })
        }
        InitialSection::Gaussian { amplitudes, widths } => {
            let g = space.grid();
            let fields = amplitudes
                .iter()
                .zip(widths)
                .map(|(&a, &w)| g.sample_complex(|r| C::new(a * (-(r / w) * (r / w)).exp(), 0.0)))
                .collect();
            Ok(InitialData {
                state: SolutionState::new(0.0, fields, Arc::clone(space), Arc::clone(model))?,
                resume: None,
                ground_state: None,
            })
        }
        InitialSection::Checkpoint { path } => {
            let path = exp.resolve(path);
            let cp = Checkpoint::load(&path)?;
            if cp.model != exp.config.model.spec() {
                return Err(usage(format!("{} holds a state of a different model", path.display())));
            }
            Ok(InitialData {
                state: cp.to_state(Arc::clone(space), Arc::clone(model))?,
                resume: cp.resume,
                ground_state: None,
            })
        }
    }
}

/// What a trajectory shows about the regime it is in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvidence {
    pub termination: Termination,
    pub steps: usize,
    pub t_final: f64,
    pub kinetic_initial: f64,
    pub kinetic_max: f64,
    /// `max K / K(u₀)`.
    pub kinetic_growth: f64,
    /// `max K < K_psi`, when thresholds are known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub below_k_psi: Option<bool>,
    pub s_accum: f64,
    /// Share of `S_accum` gained in the second half of the recorded window.
    pub s_tail_fraction: f64,
    pub s_stabilizing: bool,
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// `δ′ K(u₀)`, when the data is sub-threshold and trapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coercivity_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coercivity_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coercivity_violations: Option<usize>,
}

/// Share of the final `S_accum` accumulated after the midpoint of the
/// recorded time window.
pub fn scattering_tail_fraction(records: &[DiagnosticsRecord<f64>]) -> f64 {
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return 0.0;
    };
    if last.s_accum <= 0.0 {
        return 0.0;
    }
    let mid = 0.5 * (first.t + last.t);
    let at_mid = records.iter().take_while(|r| r.t <= mid).last().unwrap_or(first);
    (last.s_accum - at_mid.s_accum) / last.s_accum
}

pub fn evidence(traj: &Trajectory<f64>, thresholds: Option<&Thresholds>) -> TrajectoryEvidence {
    let records: Vec<DiagnosticsRecord<f64>> = traj.diagnostics().copied().collect();
    let first = traj.first();
    let last = traj.last();
    let kinetic_max = traj.max_kinetic();
    let tail = scattering_tail_fraction(&records);
    let constants = thresholds.and_then(|th| CoercivityConstants::from_data(first.energy, first.kinetic, th).ok());
    let (floor, min, violations) = match constants {
        Some(c) => {
            let floor = c.coercivity_floor();
            let min = records.iter().map(|r| r.coercivity).fold(f64::INFINITY, f64::min);
            let bad = records.iter().filter(|r| r.coercivity < floor).count();
            (Some(floor), Some(min), Some(bad))
        }
        None => (None, None, None),
    };
    TrajectoryEvidence {
        termination: traj.termination,
        steps: traj.steps,
        t_final: last.t,
        kinetic_initial: traj.kinetic_initial,
        kinetic_max,
        kinetic_growth: kinetic_max / traj.kinetic_initial,
        below_k_psi: thresholds.map(|th| kinetic_max < th.k_psi),
        s_accum: last.s_accum,
        s_tail_fraction: tail,
        s_stabilizing: traj.termination == Termination::ReachedEnd && last.s_accum.is_finite() && tail <= STABILIZING_TAIL,
        mass_drift: traj.relative_drift(|r| r.mass),
        energy_drift: traj.relative_drift(|r| r.energy),
        coercivity_floor: floor,
        coercivity_min: min,
        coercivity_violations: violations,
    }
}

pub fn evolve_options(exp: &Experiment, resume: Option<Resume<f64>>) -> Result<EvolveOptions<f64>> {
    let Some(i) = &exp.config.integrator else {
        return Err(usage("config has no [integrator] section"));
    };
    let mut opts = EvolveOptions::new(i.dt, i.t_end)
        .record_every(i.record_every)
        .blowup_factor(i.blowup_factor)
        .boundary_tol(i.boundary_mass_tol);
    if let Some(r) = i.virial_radius {
        opts = opts.radius(r);
    }
    if let Some(r) = resume {
        opts = opts.resuming(r);
    }
    Ok(opts)
}

/// Evolves `state` and writes `timeseries.csv`, `final_checkpoint.json` and
/// `summary.json` into `dir`.
fn run_and_write(
    exp: &Experiment,
    state: &SolutionState<f64>,
    resume: Option<Resume<f64>>,
    thresholds: Option<&Thresholds>,
    dir: &Path,
    extra: Value,
) -> Result<(Trajectory<f64>, TrajectoryEvidence, Outcome)> {
    let hash = exp.config.hash()?;
    let traj = evolve(state, &evolve_options(exp, resume)?)?;
    let ev = evidence(&traj, thresholds);
    let ts = dir.join("timeseries.csv");
    write_timeseries(&ts, traj.diagnostics(), &hash)?;
    let cp = dir.join("final_checkpoint.json");
    Checkpoint::from_state(&traj.final_state, &exp.config.model.spec(), &hash)
        .with_resume(traj.resume_point())
        .save(&cp)?;
    let mut body = json!({ "evidence": ev });
    if let (Value::Object(b), Value::Object(x)) = (&mut body, extra) {
        b.extend(x);
    }
    let body = stamp(exp, body)?;
    let sp = dir.join("summary.json");
    write_json(&sp, &body)?;
    let outcome = Outcome {
        success: true,
        summary: body,
        artifacts: vec![ts, cp, sp],
    };
    Ok((traj, ev, outcome))
}

fn classification_of(state: &SolutionState<f64>, thresholds: Option<&Thresholds>) -> Option<Classification> {
    let e0 = crate::diagnostics::energy(state);
    let k0 = crate::diagnostics::kinetic(state);
    match thresholds {
        Some(th) => Some(classify_values(e0, k0, th)),
        None if e0 < 0.0 => Some(Classification::BlowUpRegime),
        None => None,
    }
}

/// Thresholds for a run: `[reference]` first, then the ground state the data
/// was built from.
fn run_thresholds(exp: &Experiment, init: &InitialData) -> Result<Option<Thresholds>> {
    if let Some(th) = reference_thresholds(exp)? {
        return Ok(Some(th));
    }
    match &init.ground_state {
        Some((gs, src, _)) => Ok(Some(gs.thresholds(src.clone())?)),
        None => Ok(None),
    }
}

pub fn cmd_evolve(exp: &Experiment) -> Result<Outcome> {
    let model = build_model(exp)?;
    let space = build_space(exp)?;
    let init = initial_data(exp, &space, &model)?;
    let thresholds = run_thresholds(exp, &init)?;
    let extra = json!({
        "classification": classification_of(&init.state, thresholds.as_ref()),
        "thresholds": thresholds,
    });
    let (_, _, outcome) = run_and_write(exp, &init.state, init.resume, thresholds.as_ref(), &exp.output_dir(), extra)?;
    Ok(outcome)
}

/// Threshold margins of initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub e0: f64,
    pub k0: f64,
    /// `E(u₀)/E_psi`.
    pub energy_ratio: f64,
    /// `K(u₀)/K_psi`.
    pub kinetic_ratio: f64,
}

pub fn cmd_classify(exp: &Experiment, with_evolution: bool) -> Result<Outcome> {
    let model = build_model(exp)?;
    let space = build_space(exp)?;
    let init = initial_data(exp, &space, &model)?;
    let thresholds = run_thresholds(exp, &init)?;
    let Some(class) = classification_of(&init.state, thresholds.as_ref()) else {
        return Err(usage(
            "classification needs thresholds: set [reference] ground_state or e_psi/k_psi/c_opt",
        ));
    };
    let e0 = crate::diagnostics::energy(&init.state);
    let k0 = crate::diagnostics::kinetic(&init.state);
    let margins = thresholds.as_ref().map(|th| Margins {
        e0,
        k0,
        energy_ratio: e0 / th.e_psi,
        kinetic_ratio: k0 / th.k_psi,
    });
    let extra = json!({ "classification": class, "margins": margins, "thresholds": thresholds });
    if with_evolution {
        let (_, _, outcome) = run_and_write(exp, &init.state, init.resume, thresholds.as_ref(), &exp.output_dir(), extra)?;
        return Ok(outcome);
    }
    let body = stamp(exp, extra)?;
    let path = exp.output_dir().join("classification.json");
    write_json(&path, &body)?;
    Ok(Outcome {
        success: true,
        summary: body,
        artifacts: vec![path],
    })
}

/// `E(a·ψ)/E_psi` for an exact ground state.
pub fn scaled_energy_ratio(a: f64, d: usize) -> f64 {
    let dd = d as f64;
    dd / 4.0 * a * a - (dd - 4.0) / 4.0 * a.powf(2.0 * dd / (dd - 4.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub amplitude: f64,
    pub dir: PathBuf,
    pub classification: Classification,
    pub energy_ratio: f64,
    pub energy_ratio_predicted: f64,
    pub kinetic_ratio: f64,
    pub evidence: TrajectoryEvidence,
}

/// Evolves `a·ψ` for every configured amplitude in a pool of
/// `[sweep] workers` threads, one run directory per amplitude.
pub fn cmd_sweep(exp: &Experiment) -> Result<Outcome> {
    let Some(sweep) = &exp.config.sweep else {
        return Err(usage("config has no [sweep] section"));
    };
    evolve_options(exp, None)?;
    let model = build_model(exp)?;
    let space = build_space(exp)?;
    let (gs, src) = obtain_ground_state(exp, &model, &space)?;
    let thresholds = gs.thresholds(src)?;
    let d = exp.config.model.d;
    let out = exp.output_dir();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        sweep
            .amplitudes
            .par_iter()
            .enumerate()
            .map(|(i, &a)| {
                let dir = out.join(format!("run-{i:03}-a{a}"));
                let state = gs.state(a, 0.0, Arc::clone(&space), Arc::clone(&model))?;
                let class = classification_of(&state, Some(&thresholds)).expect("thresholds given");
                let e0 = crate::diagnostics::energy(&state);
                let k0 = crate::diagnostics::kinetic(&state);
                let extra = json!({ "amplitude": a, "classification": class, "thresholds": thresholds });
                let (_, ev, _) = run_and_write(exp, &state, None, Some(&thresholds), &dir, extra)?;
                Ok(SweepEntry {
                    amplitude: a,
                    dir,
                    classification: class,
                    energy_ratio: e0 / thresholds.e_psi,
                    energy_ratio_predicted: scaled_energy_ratio(a, d),
                    kinetic_ratio: k0 / thresholds.k_psi,
                    evidence: ev,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let body = stamp(exp, json!({ "thresholds": thresholds, "runs": entries }))?;
    let path = out.join("sweep_summary.json");
    write_json(&path, &body)?;
    let mut artifacts: Vec<PathBuf> = entries.iter().map(|e| e.dir.clone()).collect();
    artifacts.push(path);
    Ok(Outcome {
        success: true,
        summary: body,
        artifacts,
    })
}
