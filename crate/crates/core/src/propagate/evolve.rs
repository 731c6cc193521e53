use serde::{Deserialize, Serialize};

use super::SolutionState;
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{domain, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions<T> {
    pub dt: T,
    pub t_end: T,
    /// Record diagnostics every this many steps (and always at the end).
    pub record_every: usize,
    /// Stop once `K(u) > blowup_kinetic_factor · K(u₀)`.
    pub blowup_kinetic_factor: T,
    /// Stop once the mass share in the outer tenth of the grid exceeds this.
    pub boundary_mass_tol: T,
    /// Radius `R` of the truncated virials; defaults to `r_max / 4`.
    pub virial_radius: Option<T>,
    /// Keep a copy of the state at every record.
    pub keep_snapshots: bool,
    /// Continue a run that was interrupted; see [`Resume`].
    pub resume: Option<Resume<T>>,
}

/// Bookkeeping carried across a checkpoint so that a resumed run reproduces
/// the uninterrupted one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Resume<T> {
    /// Steps already taken.
    pub step: usize,
    pub s_accum: T,
    /// `K(u₀)` of the original initial data, the blow-up reference.
    pub kinetic_initial: T,
}

impl<T: Real> EvolveOptions<T> {
    pub fn new(dt: T, t_end: T) -> Self {
        Self {
            dt,
            t_end,
            record_every: 1,
            blowup_kinetic_factor: T::lit(100.0),
            boundary_mass_tol: T::lit(1e-3),
            virial_radius: None,
            keep_snapshots: false,
            resume: None,
        }
    }

    pub fn resuming(mut self, resume: Resume<T>) -> Self {
        self.resume = Some(resume);
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn blowup_factor(mut self, factor: T) -> Self {
        self.blowup_kinetic_factor = factor;
        self
    }

    pub fn boundary_tol(mut self, tol: T) -> Self {
        self.boundary_mass_tol = tol;
        self
    }

    pub fn snapshots(mut self, keep: bool) -> Self {
        self.keep_snapshots = keep;
        self
    }

    pub fn radius(mut self, r: T) -> Self {
        self.virial_radius = Some(r);
        self
    }

    fn validate(&self, t0: T) -> Result<()> {
        if !(self.dt.finite() && self.dt > T::zero()) {
            return Err(domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.finite() && self.t_end >= t0) {
            return Err(domain(format!("t_end={} precedes the initial time {t0}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(domain("record_every must be at least 1"));
        }
        if !(self.blowup_kinetic_factor > T::one()) {
            return Err(domain("blowup_kinetic_factor must exceed 1"));
        }
        if !(self.boundary_mass_tol > T::zero()) {
            return Err(domain("boundary_mass_tol must be positive"));
        }
        if let Some(r) = self.virial_radius {
            if !(r.finite() && r > T::zero()) {
                return Err(domain("virial radius must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ReachedEnd,
    BlowUpDetected,
    ResolutionLost,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord<T: Real> {
    pub step: usize,
    pub diagnostics: DiagnosticsRecord<T>,
    pub snapshot: Option<SolutionState<T>>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub records: Vec<TrajectoryRecord<T>>,
    pub termination: Termination,
    /// Steps taken by this call.
    pub steps: usize,
    pub kinetic_initial: T,
    pub final_state: SolutionState<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn diagnostics(&self) -> impl Iterator<Item = &DiagnosticsRecord<T>> {
        self.records.iter().map(|r| &r.diagnostics)
    }

    pub fn first(&self) -> &DiagnosticsRecord<T> {
        &self.records[0].diagnostics
    }

    pub fn last(&self) -> &DiagnosticsRecord<T> {
        &self.records[self.records.len() - 1].diagnostics
    }

    /// `max_t |X(t) − X(t₀)| / |X(t₀)|` for a recorded quantity `X`.
    pub fn relative_drift(&self, pick: impl Fn(&DiagnosticsRecord<T>) -> T) -> T {
        let x0 = pick(self.first());
        let scale = x0.magnitude();
        self.diagnostics()
            .map(|r| {
                let dx = (pick(r) - x0).magnitude();
                if scale > T::zero() {
                    dx / scale
                } else {
                    dx
                }
            })
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Bookkeeping to continue from [`Trajectory::final_state`].
    pub fn resume_point(&self) -> Resume<T> {
        Resume {
            step: self.records[self.records.len() - 1].step,
            s_accum: self.last().s_accum,
            kinetic_initial: self.kinetic_initial,
        }
    }

    pub fn max_kinetic(&self) -> T {
        self.diagnostics().map(|r| r.kinetic).fold(T::zero(), |a, b| a.max(b))
    }
}

/// `K > factor · K₀` or a non-finite functional.
pub fn detect_blowup<T: Real>(record: &DiagnosticsRecord<T>, kinetic_initial: T, opts: &EvolveOptions<T>) -> bool {
    !record.is_finite() || record.kinetic > opts.blowup_kinetic_factor * kinetic_initial
}

/// Number of steps and whether the last one is shortened to land on `t_end`.
///
/// Spans within `10⁻⁹` relative of a whole number of steps use `dt`
/// throughout, so that split runs repeat the uninterrupted arithmetic.
fn step_plan<T: Real>(t0: T, opts: &EvolveOptions<T>) -> (usize, bool) {
    let ratio = ((opts.t_end - t0) / opts.dt).to_f64_lossy();
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        (nearest as usize, false)
    } else {
        (ratio.ceil() as usize, true)
    }
}

pub fn evolve<T: Real>(state: &SolutionState<T>, opts: &EvolveOptions<T>) -> Result<Trajectory<T>> {
    evolve_with_hook(state, opts, |_, _| {})
}

/// Repeated Strang steps; `hook` sees the state at every record.
pub fn evolve_with_hook<T: Real>(
    state: &SolutionState<T>,
    opts: &EvolveOptions<T>,
    mut hook: impl FnMut(&SolutionState<T>, &DiagnosticsRecord<T>),
) -> Result<Trajectory<T>> {
    let t0 = state.t();
    opts.validate(t0)?;
    if state.space().bilaplacian().spectral().is_none() {
        return Err(Error::State("evolution needs a factorised bilaplacian".into()));
    }
    let radius = opts
        .virial_radius
        .unwrap_or_else(|| state.space().grid().r_max() * T::lit(0.25));
    let (total, shortened) = step_plan(t0, opts);

    let mut u = state.clone();
    let offset = opts.resume.map_or(0, |r| r.step);
    let mut s_accum = opts.resume.map_or(T::zero(), |r| r.s_accum);
    let first = DiagnosticsRecord::compute(&u, s_accum, radius);
    let kinetic_initial = opts.resume.map_or(first.kinetic, |r| r.kinetic_initial);
    hook(&u, &first);
    let mut records = vec![TrajectoryRecord {
        step: offset,
        diagnostics: first,
        snapshot: opts.keep_snapshots.then(|| u.clone()),
    }];

    let mut termination = Termination::ReachedEnd;
    let mut steps = 0;
    for local in 1..=total {
        let step = offset + local;
        let dt = if shortened && local == total {
            opts.t_end - u.t()
        } else {
            opts.dt
        };
        s_accum += diagnostics::scattering_increment(&u, dt);
        let outcome = u.advance(dt);
        steps = local;
        match outcome {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => {
                termination = Termination::BlowUpDetected;
            }
            Err(e) => return Err(e),
        }
        if termination == Termination::ReachedEnd {
            let k = diagnostics::kinetic(&u);
            if !k.finite() || k > opts.blowup_kinetic_factor * kinetic_initial {
                termination = Termination::BlowUpDetected;
            } else if diagnostics::boundary_mass_fraction(&u) > opts.boundary_mass_tol {
                termination = Termination::ResolutionLost;
            }
        }
        let stopping = termination != Termination::ReachedEnd;
        if stopping || step % opts.record_every == 0 || local == total {
            let rec = DiagnosticsRecord::compute(&u, s_accum, radius);
            hook(&u, &rec);
            records.push(TrajectoryRecord {
                step,
                diagnostics: rec,
                snapshot: opts.keep_snapshots.then(|| u.clone()),
            });
        }
        if stopping {
            break;
        }
    }
    Ok(Trajectory {
        records,
        termination,
        steps,
        kinetic_initial,
        final_state: u,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{build_grid, Discretization};
    use crate::model::{ModelParams, NonlinearityModel};
    use crate::scalar::C;

    fn setup(d: usize, n: usize, r_max: f64, free: bool) -> (Arc<Discretization<f64>>, Arc<NonlinearityModel<f64>>) {
        let space = Arc::new(Discretization::new(build_grid(d, n, r_max).unwrap()).unwrap());
        let params = ModelParams::unit(d, 1).unwrap();
        let model = if free {
            NonlinearityModel::free(params)
        } else {
            NonlinearityModel::decoupled(params)
        };
        (space, Arc::new(model.unwrap()))
    }

    fn gaussian(space: &Arc<Discretization<f64>>, model: &Arc<NonlinearityModel<f64>>, a: f64) -> SolutionState<f64> {
        SolutionState::from_fn(
            0.0,
            &[&|r: f64| C::new(a * (-r * r).exp(), 0.0)],
            Arc::clone(space),
            Arc::clone(model),
        )
        .unwrap()
    }

    #[test]
    fn zero_length_run_has_one_record() {
        let (space, model) = setup(5, 64, 6.0, false);
        let u = gaussian(&space, &model, 0.5);
        let traj = evolve(&u, &EvolveOptions::new(1e-3, 0.0)).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.termination, Termination::ReachedEnd);
        assert_eq!(traj.steps, 0);
    }

    #[test]
    fn records_follow_the_cadence_and_end_on_time() {
        let (space, model) = setup(5, 64, 6.0, false);
        let u = gaussian(&space, &model, 0.5);
        let opts = EvolveOptions::new(1e-3, 0.0105).record_every(4);
        let traj = evolve(&u, &opts).unwrap();
        let steps: Vec<usize> = traj.records.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 4, 8, 11]);
        assert!((traj.last().t - 0.0105).abs() < 1e-15);
        assert!(traj.records.windows(2).all(|w| w[0].diagnostics.t < w[1].diagnostics.t));
        assert!(traj.records.windows(2).all(|w| w[0].diagnostics.s_accum <= w[1].diagnostics.s_accum));
    }

    #[test]
    fn rejects_bad_options() {
        let (space, model) = setup(5, 64, 6.0, false);
        let u = gaussian(&space, &model, 0.5);
        assert!(evolve(&u, &EvolveOptions::new(0.0, 1.0)).is_err());
        assert!(evolve(&u, &EvolveOptions::new(1e-3, -1.0)).is_err());
        assert!(evolve(&u, &EvolveOptions::new(1e-3, 1.0).record_every(0)).is_err());
    }

    #[test]
    fn free_flow_conserves_mass_exactly() {
        let (space, model) = setup(5, 128, 8.0, true);
        let u = gaussian(&space, &model, 1.0);
        let traj = evolve(&u, &EvolveOptions::new(1e-3, 0.05).boundary_tol(1.0)).unwrap();
        assert!(traj.relative_drift(|r| r.mass) < 1e-12);
        assert!(traj.relative_drift(|r| r.energy) < 1e-11);
    }

    #[test]
    fn blowup_predicate() {
        let (space, model) = setup(5, 64, 6.0, false);
        let u = gaussian(&space, &model, 0.5);
        let opts = EvolveOptions::new(1e-3, 1.0);
        let mut rec = DiagnosticsRecord::compute(&u, 0.0, 1.0);
        let k0 = rec.kinetic;
        assert!(!detect_blowup(&rec, k0, &opts));
        rec.kinetic = 1e3 * k0;
        assert!(detect_blowup(&rec, k0, &opts));
        rec.kinetic = k0;
        rec.potential = f64::NAN;
        assert!(detect_blowup(&rec, k0, &opts));
    }

    #[test]
    fn resolution_loss_is_reported() {
        let (space, model) = setup(5, 64, 3.0, true);
        // Mass sitting near the wall from the start.
        let u = SolutionState::from_fn(
            0.0,
            &[&|r: f64| C::new((-(r - 2.8) * (r - 2.8) * 20.0).exp(), 0.0)],
            Arc::clone(&space),
            Arc::clone(&model),
        )
        .unwrap();
        let traj = evolve(&u, &EvolveOptions::new(1e-3, 1.0).boundary_tol(1e-3)).unwrap();
        assert_eq!(traj.termination, Termination::ResolutionLost);
        assert_eq!(traj.steps, 1);
    }

    #[test]
    fn split_run_repeats_the_uninterrupted_one() {
        let (space, model) = setup(5, 64, 6.0, false);
        let u = gaussian(&space, &model, 0.8);
        let whole = evolve(&u, &EvolveOptions::new(1e-3, 0.02).record_every(5)).unwrap();
        let first = evolve(&u, &EvolveOptions::new(1e-3, 0.01).record_every(5)).unwrap();
        let rest = evolve(
            &first.final_state,
            &EvolveOptions::new(1e-3, 0.02).record_every(5).resuming(first.resume_point()),
        )
        .unwrap();
        assert_eq!(rest.final_state.fields(), whole.final_state.fields());
        assert_eq!(rest.final_state.t(), whole.final_state.t());
        let joined: Vec<_> = first.diagnostics().chain(rest.diagnostics().skip(1)).cloned().collect();
        let steps: Vec<usize> = first.records.iter().chain(rest.records.iter().skip(1)).map(|r| r.step).collect();
        assert_eq!(steps, whole.records.iter().map(|r| r.step).collect::<Vec<_>>());
        assert_eq!(joined, whole.diagnostics().cloned().collect::<Vec<_>>());
    }
}
