//! Ground states of the elliptic system `γ_k Δ² ψ_k = f_k(ψ)` and the
//! thresholds derived from them.
//!
//! The minimiser works on the normalised problem `inf K(v)` over `P(v) = 1`.
//! Each iteration is a gradient step preconditioned by `(γΔ²)⁻¹`, followed by
//! the closed-form amplitude projection back onto `P = 1` that homogeneity of
//! `F` allows.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Thresholds;
use crate::error::{domain, Error, Result};
use crate::grid::{Discretization, RadialGrid};
use crate::model::NonlinearityModel;
use crate::propagate::SolutionState;
use crate::scalar::{Real, C};


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateOptions {
    /// Preconditioned gradient step; `0.5` is the plain fixed-point map.
    pub step: f64,
    pub max_iter: usize,
    /// Stop once the relative decrement falls below this.
    pub tol: f64,
    /// Width `ρ` of the initial profile `e^{−(r/ρ)²}`.
    pub init_width: f64,
    /// Initial amplitude per component; equal amplitudes when `None`.
    pub init_amplitudes: Option<Vec<f64>>,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_iter: 20_000,
            tol: 1e-9,
            init_width: 1.0,
            init_amplitudes: None,
        }
    }
}

impl GroundStateOptions {
    pub(crate) fn validate(&self, l: usize) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 0.5) {
            return Err(domain(format!("ground-state step {} must lie in (0, 0.5]", self.step)));
        }
        if self.max_iter == 0 {
            return Err(domain("ground-state max_iter must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(domain(format!("ground-state tol {} must be positive", self.tol)));
        }
        if !(self.init_width > 0.0 && self.init_width.is_finite()) {
            return Err(domain(format!("initial width {} must be positive", self.init_width)));
        }
        if let Some(a) = &self.init_amplitudes {
            if a.len() != l {
                return Err(domain(format!("{} initial amplitudes for {l} components", a.len())));
            }
            if a.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || a.iter().all(|&x| x == 0.0) {
                return Err(domain("initial amplitudes must be non-negative and not all zero"));
            }
        }
        Ok(())
    }
}

/// Output of [`minimize_normalized`].
#[derive(Debug, Clone)]
pub struct NormalizedMinimizer<T> {
    /// Non-negative profiles with `P = 1`.
    pub profiles: Vec<Vec<T>>,
    /// `I = K(v)`.
    pub value: T,
    pub iterations: usize,
    /// Relative H-norm of the step with its dilation component removed.
    pub decrement: T,
    /// Relative H-norm of the removed dilation component.
    pub scale_force: T,
    /// `K(v)` after each projection, starting with the initial guess.
    pub history: Vec<T>,
}

/// Kinetic energy `Σ γ_k ‖Δ v_k‖²` of real profiles.
pub fn kinetic_real<T: Real>(space: &Discretization<T>, gamma: &[T], profiles: &[Vec<T>]) -> T {
    let grid = space.grid();
    profiles
        .iter()
        .zip(gamma)
        .map(|(v, &g)| {
            let lv = space.laplacian().apply_real(v);
            g * grid.inner_real(&lv, &lv)
        })
        .fold(T::zero(), |a, b| a + b)
}

fn node_values<T: Real>(profiles: &[Vec<T>], i: usize) -> Vec<C<T>> {
    profiles.iter().map(|v| C::new(v[i], T::zero())).collect()
}

/// `Re ∫ F(v)` of real profiles.
pub fn potential_real<T: Real>(space: &Discretization<T>, model: &NonlinearityModel<T>, profiles: &[Vec<T>]) -> T {
    let grid = space.grid();
    let dens: Vec<T> = (0..grid.n())
        .map(|i| model.potential(&node_values(profiles, i)).re)
        .collect();
    grid.inner_real(&dens, &vec![T::one(); grid.n()])
}

/// Real parts of `f_k(v)` at every node.
pub(crate) fn forcing_real<T: Real>(model: &NonlinearityModel<T>, profiles: &[Vec<T>]) -> Vec<Vec<T>> {
    let l = profiles.len();
    let n = profiles[0].len();
    let mut out = vec![vec![T::zero(); n]; l];
    let mut f = vec![C::new(T::zero(), T::zero()); l];
    for i in 0..n {
        model.forcing(&node_values(profiles, i), &mut f);
        for k in 0..l {
            out[k][i] = f[k].re;
        }
    }
    out
}

/// `Σ_k ∫ f_k(v) v_k`.
fn forcing_pairing<T: Real>(space: &Discretization<T>, model: &NonlinearityModel<T>, profiles: &[Vec<T>]) -> T {
    let grid = space.grid();
    forcing_real(model, profiles)
        .iter()
        .zip(profiles)
        .map(|(f, v)| grid.inner_real(f, v))
        .fold(T::zero(), |a, b| a + b)
}

fn scale_profiles<T: Real>(profiles: &mut [Vec<T>], c: T) {
    for v in profiles.iter_mut() {
        for x in v.iter_mut() {
            *x *= c;
        }
    }
}

fn to_f64(profiles: &[Vec<impl Real>]) -> Vec<Vec<f64>> {
    profiles.iter().map(|v| v.iter().map(|x| x.to_f64_lossy()).collect()).collect()
}

/// `((d−4)/2) v + r v′`, the generator of `v ↦ ν^{(d−4)/2} v(ν·)`.
fn dilation_generator<T: Real>(grid: &RadialGrid<T>, d: usize, v: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = grid.n();
    let half = T::from_usize_lossy(d - 4) / T::lit(2.0);
    let inv = T::one() / (grid.spacing() * T::lit(2.0));
    let rho = grid.outer_ghost_ratio();
    v.iter()
        .map(|f| {
            (0..n)
                .map(|i| {
                    let left = if i == 0 { f[0] } else { f[i - 1] };
                    let right = if i + 1 == n { f[n - 1] * rho } else { f[i + 1] };
                    half * f[i] + grid.nodes()[i] * (right - left) * inv
                })
                .collect()
        })
        .collect()
}

/// Minimises `K(v)` subject to `P(v) = 1` over non-negative radial profiles.
pub fn minimize_normalized<T: Real>(
    model: &NonlinearityModel<T>,
    space: &Discretization<T>,
    opts: &GroundStateOptions,
) -> Result<NormalizedMinimizer<T>> {
    let params = model.params();
    if params.d() != space.grid().d() {
        return Err(domain(format!(
            "model is {}-dimensional but the grid is {}-dimensional",
            params.d(),
            space.grid().d()
        )));
    }
    let l = model.l();
    opts.validate(l)?;
    let d = T::from_usize_lossy(params.d());
    let deg = params.deg();
    let gamma = params.gamma();
    let grid = space.grid();
    let width = T::lit(opts.init_width);

    let amps = opts.init_amplitudes.clone().unwrap_or_else(|| vec![1.0; l]);
    let mut v: Vec<Vec<T>> = amps
        .iter()
        .map(|&a| grid.sample(|r| T::lit(a) * (-(r / width) * (r / width)).exp()))
        .collect();

    // The projection relies on P(λv) = λ^deg P(v).
    let p0 = potential_real(space, model, &v);
    if !(p0 > T::zero() && p0.finite()) {
        return Err(domain(format!("initial profile has non-positive potential {p0}")));
    }
    let mut doubled = v.clone();
    scale_profiles(&mut doubled, T::lit(2.0));
    let measured = (potential_real(space, model, &doubled) / p0).ln() / T::lit(2.0).ln();
    if (measured - deg).magnitude() > T::lit(1e-6) * deg {
        return Err(domain(format!(
            "potential is homogeneous of degree {measured}, expected the critical degree {deg}"
        )));
    }

    let project = |v: &mut Vec<Vec<T>>| -> Result<()> {
        let p = potential_real(space, model, v);
        if !(p > T::zero() && p.finite()) {
            return Err(Error::Numerical(format!("potential {p} during normalisation")));
        }
        scale_profiles(v, p.powf(-T::one() / deg));
        Ok(())
    };
    project(&mut v)?;

    let two_s = T::lit(2.0 * opts.step);
    let h_inner = |a: &[Vec<T>], b: &[Vec<T>]| -> T {
        let mut acc = T::zero();
        for ((x, z), &g) in a.iter().zip(b).zip(gamma) {
            let lx = space.laplacian().apply_real(x);
            let lz = space.laplacian().apply_real(z);
            acc += g * grid.inner_real(&lx, &lz);
        }
        acc
    };
    let mut history = vec![kinetic_real(space, gamma, &v)];
    let mut decrement = T::max_value().unwrap_or(T::one());
    let mut scale_force = T::zero();
    for iter in 1..=opts.max_iter {
        let k = *history.last().expect("non-empty");
        // Multiplier of 2γΔ²v = Λ f(v), from pairing with v.
        let half_lambda = (d - T::lit(4.0)) * k / (T::lit(2.0) * d);
        let f = forcing_real(model, &v);
        let mut delta = Vec::with_capacity(l);
        for ((fk, vk), &g) in f.iter().zip(&v).zip(gamma) {
            let mut yk = space.bilaplacian().solve_real(fk)?;
            for (y, &x) in yk.iter_mut().zip(vk) {
                *y = *y * half_lambda / g - x;
            }
            delta.push(yk);
        }
        // The continuum problem is invariant under the P- and K-preserving
        // dilations; on the grid that symmetry is broken at the level of the
        // discretisation error and drifting along it ends in grid-scale
        // collapse.  The step is therefore taken orthogonally (in the energy
        // product) to both `v`, which the normalisation absorbs, and the
        // dilation generator.
        let gen = dilation_generator(grid, params.d(), &v);
        let vg = h_inner(&v, &gen) / k;
        let gen: Vec<Vec<T>> = gen
            .iter()
            .zip(&v)
            .map(|(g, x)| g.iter().zip(x).map(|(&a, &b)| a - vg * b).collect())
            .collect();
        let gg = h_inner(&gen, &gen);
        let dv = h_inner(&delta, &v) / k;
        let along = if gg > T::zero() { h_inner(&delta, &gen) / gg } else { T::zero() };
        for ((dk, gk), vk) in delta.iter_mut().zip(&gen).zip(&v) {
            for ((x, &z), &y) in dk.iter_mut().zip(gk).zip(vk) {
                *x -= along * z + dv * y;
            }
        }
        decrement = (kinetic_real(space, gamma, &delta) / k).sqrt();
        scale_force = along.magnitude() * (gg / k).sqrt();
        if !decrement.finite() {
            return Err(Error::Numerical("non-finite decrement in ground-state iteration".into()));
        }
        if decrement < T::lit(opts.tol) {
            return Ok(NormalizedMinimizer {
                profiles: v,
                value: k,
                iterations: iter - 1,
                decrement,
                scale_force,
                history,
            });
        }
        for (vk, dk) in v.iter_mut().zip(&delta) {
            for (x, &z) in vk.iter_mut().zip(dk) {
                *x = (*x + two_s * z).magnitude();
            }
        }
        project(&mut v)?;
        history.push(kinetic_real(space, gamma, &v));
    }
    let _ = scale_force;
    Err(Error::IterationLimit {
        iterations: opts.max_iter,
        decrement: decrement.to_f64_lossy(),
        last: to_f64(&v),
    })
}

/// A solution of `γ_k Δ² ψ_k = f_k(ψ)` with its energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GroundState<T> {
    pub d: usize,
    pub profiles: Vec<Vec<T>>,
    /// Value `I` of the normalised problem.
    pub normalized_value: T,
    #[serde(rename = "K_psi")]
    pub kinetic: T,
    #[serde(rename = "P_psi")]
    pub potential: T,
    #[serde(rename = "E_psi")]
    pub energy: T,
    #[serde(rename = "C_opt")]
    pub c_opt: T,
    /// `‖γΔ²ψ − f(ψ)‖ / ‖f(ψ)‖` in the weighted norm.
    pub residual: T,
    /// `Σ_k ∫ f_k(ψ) ψ_k`.
    pub forcing_pairing: T,
}

/// Amplitude `c` with `ψ = c·v`, from `c^{8/(d−4)} = (d−4) I/(2d)`.
pub fn rescaling_amplitude<T: Real>(value: T, d: usize) -> Result<T> {
    if !(value > T::zero() && value.finite()) {
        return Err(domain(format!("normalised value I = {value} must be positive")));
    }
    check_dimension(d)?;
    let dd = T::from_usize_lossy(d);
    let four = T::lit(4.0);
    Ok(((dd - four) * value / (T::lit(2.0) * dd)).powf((dd - four) / T::lit(8.0)))
}

fn check_dimension(d: usize) -> Result<()> {
    if d <= 4 {
        return Err(domain(format!("energy-critical problem needs d > 4 (got d={d})")));
    }
    Ok(())
}

/// Rescales a normalised minimiser into a solution of the elliptic system.
pub fn to_ground_state<T: Real>(
    min: &NormalizedMinimizer<T>,
    model: &NonlinearityModel<T>,
    space: &Discretization<T>,
) -> Result<GroundState<T>> {
    let d = model.params().d();
    let c = rescaling_amplitude(min.value, d)?;
    let mut psi = min.profiles.clone();
    scale_profiles(&mut psi, c);
    let gamma = model.params().gamma();
    let grid = space.grid();

    let f = forcing_real(model, &psi);
    let (mut num, mut den) = (T::zero(), T::zero());
    for ((p, fk), &g) in psi.iter().zip(&f).zip(gamma) {
        let b = space.bilaplacian().apply_real(p);
        let r: Vec<T> = b.iter().zip(fk).map(|(&x, &y)| g * x - y).collect();
        num += grid.inner_real(&r, &r);
        den += grid.inner_real(fk, fk);
    }
    let kinetic = kinetic_real(space, gamma, &psi);
    let potential = potential_real(space, model, &psi);
    let energy = kinetic / T::lit(2.0) - potential;
    Ok(GroundState {
        d,
        normalized_value: min.value,
        kinetic,
        potential,
        energy,
        c_opt: compute_copt(min.value, d)?.value,
        residual: (num / den).sqrt(),
        forcing_pairing: forcing_pairing(space, model, &psi),
        profiles: psi,
    })
}

/// Both closed forms of the sharp constant in `P ≤ C_opt K^{d/(d−4)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoptEvaluation<T> {
    /// `I^{−d/(d−4)}`; the value used downstream.
    pub value: T,
    /// `C_d⁻¹ (d/(2K_psi))^{4/(d−4)}` with `C_d = (2d/(d−4)) (d/2)^{4/(d−4)}`.
    pub from_kinetic: T,
}

impl<T: Real> CoptEvaluation<T> {
    pub fn relative_disagreement(&self) -> T {
        (self.value - self.from_kinetic).magnitude() / self.value.magnitude()
    }
}

/// Sharp constant from the normalised value `I`.
pub fn compute_copt<T: Real>(value: T, d: usize) -> Result<CoptEvaluation<T>> {
    let c = rescaling_amplitude(value, d)?;
    // K(ψ) = c² I by quadratic homogeneity of K.
    Ok(CoptEvaluation {
        value: copt_from_value(value, d),
        from_kinetic: copt_from_kinetic(c * c * value, d)?,
    })
}

fn copt_from_value<T: Real>(value: T, d: usize) -> T {
    let dd = T::from_usize_lossy(d);
    value.powf(-dd / (dd - T::lit(4.0)))
}

/// `C_d⁻¹ (d/(2K))^{4/(d−4)}`.
pub fn copt_from_kinetic<T: Real>(kinetic: T, d: usize) -> Result<T> {
    check_dimension(d)?;
    if !(kinetic > T::zero() && kinetic.finite()) {
        return Err(domain(format!("ground-state kinetic energy {kinetic} must be positive")));
    }
    let dd = T::from_usize_lossy(d);
    let four = T::lit(4.0);
    let half_d = dd / T::lit(2.0);
    let e = four / (dd - four);
    let cd = T::lit(2.0) * dd / (dd - four) * half_d.powf(e);
    Ok((half_d / kinetic).powf(e) / cd)
}

impl<T: Real> GroundState<T> {
    /// Both evaluations of the sharp constant for this ground state.
    pub fn copt(&self) -> Result<CoptEvaluation<T>> {
        Ok(CoptEvaluation {
            value: copt_from_value(self.normalized_value, self.d),
            from_kinetic: copt_from_kinetic(self.kinetic, self.d)?,
        })
    }

    pub fn thresholds(&self, source: impl Into<String>) -> Result<Thresholds> {
        Thresholds::new(
            self.energy.to_f64_lossy(),
            self.kinetic.to_f64_lossy(),
            self.c_opt.to_f64_lossy(),
            self.d,
            source,
        )
    }

    /// `a·ψ` as a propagatable state at time `t`.
    pub fn state(
        &self,
        amplitude: T,
        t: T,
        space: Arc<Discretization<T>>,
        model: Arc<NonlinearityModel<T>>,
    ) -> Result<SolutionState<T>> {
        let fields = self
            .profiles
            .iter()
            .map(|p| p.iter().map(|&x| C::new(amplitude * x, T::zero())).collect())
            .collect();
        SolutionState::new(t, fields, space, model)
    }
}

/// Residuals of the identities satisfied by every solution, relative to `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    /// `K − (2d/(d−4)) P`.
    pub kinetic_potential: f64,
    /// `K − (d/2) E`.
    pub kinetic_energy: f64,
    /// `P − ((d−4)/4) E`.
    pub potential_energy: f64,
    /// `K − Σ ∫ f_k(ψ) ψ_k`.
    pub kinetic_pairing: f64,
    pub tol: f64,
    pub passed: bool,
}

impl PohozaevReport {
    pub fn worst(&self) -> f64 {
        [
            self.kinetic_potential,
            self.kinetic_energy,
            self.potential_energy,
            self.kinetic_pairing,
        ]
        .into_iter()
        .fold(0.0, |a: f64, b| a.max(b.abs()))
    }
}

/// `(E, P)` that an exact solution with kinetic energy `K` must have.
pub fn pohozaev_targets(kinetic: f64, d: usize) -> Result<(f64, f64)> {
    check_dimension(d)?;
    let dd = d as f64;
    let e = 2.0 * kinetic / dd;
    Ok((e, (dd - 4.0) / 4.0 * e))
}

/// Checks the identities on raw `(K, P, E, Σ∫fψ)`.
pub fn pohozaev_residuals(kinetic: f64, potential: f64, energy: f64, pairing: f64, d: usize, tol: f64) -> PohozaevReport {
    let dd = d as f64;
    let scale = kinetic.abs();
    let mut report = PohozaevReport {
        kinetic_potential: (kinetic - 2.0 * dd / (dd - 4.0) * potential) / scale,
        kinetic_energy: (kinetic - dd / 2.0 * energy) / scale,
        potential_energy: (potential - (dd - 4.0) / 4.0 * energy) / scale,
        kinetic_pairing: (kinetic - pairing) / scale,
        tol,
        passed: false,
    };
    report.passed = report.worst() <= tol;
    report
}

pub fn validate_pohozaev<T: Real>(gs: &GroundState<T>, tol: f64) -> PohozaevReport {
    pohozaev_residuals(
        gs.kinetic.to_f64_lossy(),
        gs.potential.to_f64_lossy(),
        gs.energy.to_f64_lossy(),
        gs.forcing_pairing.to_f64_lossy(),
        gs.d,
        tol,
    )
}

/// Minimises and rescales in one call.
pub fn solve_ground_state<T: Real>(
    model: &NonlinearityModel<T>,
    space: &Discretization<T>,
    opts: &GroundStateOptions,
) -> Result<(GroundState<T>, NormalizedMinimizer<T>)> {
    let min = minimize_normalized(model, space, opts)?;
    let gs = to_ground_state(&min, model, space)?;
    Ok((gs, min))
}

/// `c_d (1 + r²)^{−(d−4)/2}` with `c_d = ((d−4)(d−2)d(d+2))^{(d−4)/8}`, the
/// explicit solution of `Δ²W = W^{(d+4)/(d−4)}`, dilated to
/// `ν^{(d−4)/2} W(ν r)`.
pub fn explicit_profile(d: usize, nu: f64, r: f64) -> f64 {
    let dd = d as f64;
    let cd = ((dd - 4.0) * (dd - 2.0) * dd * (dd + 2.0)).powf((dd - 4.0) / 8.0);
    let x = nu * r;
    nu.powf((dd - 4.0) / 2.0) * cd * (1.0 + x * x).powf(-(dd - 4.0) / 2.0)
}

/// Dilation `ν` for which the explicit profile takes `value` at radius `r`
/// (the more spread-out of the two solutions).
pub fn matching_dilation(d: usize, r: f64, value: f64) -> Result<f64> {
    check_dimension(d)?;
    let a = (d as f64 - 4.0) / 2.0;
    // ν^a (1 + ν²r²)^{−a} = (1/ν + ν r²)^{−a}, so 1/ν + ν r² = s.
    let s = (explicit_profile(d, 1.0, 0.0) / value).powf(1.0 / a);
    let disc = s * s - 4.0 * r * r;
    if !(value > 0.0 && disc >= 0.0) {
        return Err(domain(format!("no dilation of the explicit profile takes the value {value} at r={r}")));
    }
    Ok(2.0 / (s + disc.sqrt()))
}
