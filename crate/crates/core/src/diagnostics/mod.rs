//! Functionals of a state and the threshold classifier.

mod coercivity;

pub use coercivity::{coercivity_margins, trapping_root, CoercivityConstants, CoercivityReport};

use serde::{Deserialize, Serialize};

use crate::grid::{Discretization, RadialGrid};
use crate::model::{ModelParams, NonlinearityModel};
use crate::propagate::SolutionState;
use crate::scalar::{cabs, cfinite, Real, C};

/// Fraction of the domain treated as the boundary layer.
pub const BOUNDARY_LAYER: f64 = 0.1;

/// `Σ_k (α_k²/γ_k) ‖u_k‖²`.
pub fn mass<T: Real>(state: &SolutionState<T>) -> T {
    mass_of(state.space().grid(), state.model().params(), state.fields())
}

pub(crate) fn mass_of<T: Real>(grid: &RadialGrid<T>, params: &ModelParams<T>, fields: &[Vec<C<T>>]) -> T {
    fields
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let a = params.alpha()[k];
            a * a / params.gamma()[k] * grid.norm_sq(f)
        })
        .fold(T::zero(), |a, b| a + b)
}

/// `Σ_k γ_k ⟨Δu_k, Δu_k⟩`.
pub fn kinetic<T: Real>(state: &SolutionState<T>) -> T {
    kinetic_of(state.space(), state.model().params().gamma(), state.fields())
}

pub(crate) fn kinetic_of<T: Real>(space: &Discretization<T>, gamma: &[T], fields: &[Vec<C<T>>]) -> T {
    let lap = space.laplacian();
    fields
        .iter()
        .zip(gamma)
        .map(|(f, &g)| g * space.grid().norm_sq(&lap.apply_complex(f)))
        .fold(T::zero(), |a, b| a + b)
}

/// `Re Σ_i w_i F(u(r_i))`.
pub fn potential<T: Real>(state: &SolutionState<T>) -> T {
    potential_of(state.space().grid(), state.model(), state.fields())
}

pub(crate) fn potential_of<T: Real>(
    grid: &RadialGrid<T>,
    model: &NonlinearityModel<T>,
    fields: &[Vec<C<T>>],
) -> T {
    let l = fields.len();
    let mut z = vec![C::new(T::zero(), T::zero()); l];
    let mut acc = T::zero();
    for (i, &w) in grid.weights().iter().enumerate() {
        for k in 0..l {
            z[k] = fields[k][i];
        }
        acc += w * model.potential(&z).re;
    }
    acc
}

/// `K/2 − P`.
pub fn energy<T: Real>(state: &SolutionState<T>) -> T {
    kinetic(state) * T::lit(0.5) - potential(state)
}

/// `Σ_k Σ_i w_i |u_k|^{2(d+4)/(d−4)}`: the space integrand of the scattering size.
pub fn scattering_density<T: Real>(state: &SolutionState<T>) -> T {
    let s = state.model().params().s_exp();
    let grid = state.space().grid();
    state
        .fields()
        .iter()
        .map(|f| {
            grid.weights()
                .iter()
                .zip(f)
                .fold(T::zero(), |a, (&w, c)| a + w * cabs(*c).powf(s))
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Left-endpoint contribution `dt · Σ_k ∫|u_k|^{s}` over a step of length `dt`.
pub fn scattering_increment<T: Real>(state: &SolutionState<T>, dt: T) -> T {
    if dt == T::zero() {
        return T::zero();
    }
    dt * scattering_density(state)
}

/// Centred radial derivative; `u_{−1} = u_0` by evenness and the outer ghost
/// is the one the Laplacian uses.
pub(crate) fn radial_derivative<T: Real>(grid: &RadialGrid<T>, f: &[C<T>]) -> Vec<C<T>> {
    let n = f.len();
    let inv = T::one() / (grid.spacing() * T::lit(2.0));
    let rho = grid.outer_ghost_ratio();
    (0..n)
        .map(|i| {
            let left = if i == 0 { f[0] } else { f[i - 1] };
            let right = if i + 1 == n { f[n - 1] * rho } else { f[i + 1] };
            (right - left) * inv
        })
        .collect()
}

/// `−2 Σ_k α_k Im Σ_i w_i ρ(r_i) u_k′(r_i) conj(u_k(r_i))` for a radial weight `ρ`.
fn weighted_momentum<T: Real>(state: &SolutionState<T>, rho: impl Fn(T) -> T) -> T {
    let grid = state.space().grid();
    let alpha = state.model().params().alpha();
    let mut acc = T::zero();
    for (k, f) in state.fields().iter().enumerate() {
        let df = radial_derivative(grid, f);
        let mut im = T::zero();
        for i in 0..f.len() {
            im += grid.weights()[i] * rho(grid.nodes()[i]) * (df[i] * f[i].conj()).im;
        }
        acc += alpha[k] * im;
    }
    -T::lit(2.0) * acc
}

/// Virial functional with the quadratic weight `|x|²/2`.
pub fn virial<T: Real>(state: &SolutionState<T>) -> T {
    weighted_momentum(state, |r| r)
}

/// Radial derivative of the truncated weight `φ_R(r) = R² φ(r/R)`.
///
/// `φ″(s) = 1` on `s ≤ 1`, decreases to `0` through a cubic smoothstep on
/// `[1, 2]` and vanishes beyond, so `φ(s) = s²/2` on `s ≤ 1` and `φ″ ≤ 1`.
pub fn truncated_weight_slope<T: Real>(r: T, radius: T) -> T {
    let s = r / radius;
    let one = T::one();
    let half = T::lit(0.5);
    if s <= one {
        r
    } else if s >= T::lit(2.0) {
        radius * T::lit(1.5)
    } else {
        let tau = s - one;
        let t3 = tau * tau * tau;
        radius * (one + tau - t3 + half * t3 * tau)
    }
}

/// Truncated virial `V_R`; equals [`virial`] when `R ≥ r_max`.
pub fn virial_truncated<T: Real>(state: &SolutionState<T>, radius: T) -> T {
    weighted_momentum(state, |r| truncated_weight_slope(r, radius))
}

/// `8K − (16d/(d−4)) P`.
pub fn virial_rate_rhs<T: Real>(state: &SolutionState<T>) -> T {
    virial_rate_from(state.model().params(), kinetic(state), potential(state))
}

pub fn virial_rate_from<T: Real>(params: &ModelParams<T>, k: T, p: T) -> T {
    T::lit(8.0) * k - T::lit(8.0) * params.deg() * p
}

/// The same rate written through the energy: `(16d/(d−4)) E − (32/(d−4)) K`.
pub fn virial_rate_energy_form<T: Real>(params: &ModelParams<T>, e: T, k: T) -> T {
    let dm4 = params.dim() - T::lit(4.0);
    T::lit(16.0) * params.dim() / dm4 * e - T::lit(32.0) / dm4 * k
}

/// Smooth cutoff: 1 on `s ≤ 1`, 0 on `s ≥ 2`, quintic smoothstep between.
pub fn cutoff<T: Real>(s: T) -> T {
    let one = T::one();
    if s <= one {
        one
    } else if s >= T::lit(2.0) {
        T::zero()
    } else {
        let x = s - one;
        let step = x * x * x * (T::lit(10.0) - T::lit(15.0) * x + T::lit(6.0) * x * x);
        one - step
    }
}

/// `z_R = Σ_k α_k Im Σ_i w_i r_i cutoff(r_i/R) conj(u_k′) u_k`.
pub fn zr_virial<T: Real>(state: &SolutionState<T>, radius: T) -> T {
    // Im(conj(u′) u) = −Im(u′ conj(u)): half the weighted momentum, so
    // z_R = V/2 once the cutoff covers the grid.
    weighted_momentum(state, |r| r * cutoff(r / radius)) * T::lit(0.5)
}

/// `K − (2d/(d−4)) P`, the quantity whose positivity drives the trapping
/// estimates; the lower bound on `z_R′` is four times this.
pub fn coercivity_value<T: Real>(params: &ModelParams<T>, k: T, p: T) -> T {
    k - params.deg() * p
}

fn weighted_mass_where<T: Real>(state: &SolutionState<T>, keep: impl Fn(T) -> bool) -> T {
    let grid = state.space().grid();
    let params = state.model().params();
    let mut acc = T::zero();
    for (k, f) in state.fields().iter().enumerate() {
        let a = params.alpha()[k];
        let c = a * a / params.gamma()[k];
        for i in 0..f.len() {
            if keep(grid.nodes()[i]) {
                acc += c * grid.weights()[i] * f[i].norm_sqr();
            }
        }
    }
    acc
}

fn fraction<T: Real>(part: T, total: T) -> T {
    if total > T::zero() {
        part / total
    } else if part.finite() {
        T::zero()
    } else {
        part
    }
}

/// Share of the mass in the outer tenth of the grid.
pub fn boundary_mass_fraction<T: Real>(state: &SolutionState<T>) -> T {
    let edge = state.space().grid().r_max() * (T::one() - T::lit(BOUNDARY_LAYER));
    fraction(weighted_mass_where(state, |r| r >= edge), mass(state))
}

/// Share of the mass in the annulus `R ≤ r ≤ 2R`, where the truncated
/// virials differ from the untruncated ones.
pub fn annulus_mass_fraction<T: Real>(state: &SolutionState<T>, radius: T) -> T {
    let outer = radius * T::lit(2.0);
    fraction(weighted_mass_where(state, |r| r >= radius && r <= outer), mass(state))
}

/// Every monitored functional at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    #[serde(rename = "M")]
    pub mass: T,
    #[serde(rename = "K")]
    pub kinetic: T,
    #[serde(rename = "P")]
    pub potential: T,
    #[serde(rename = "E")]
    pub energy: T,
    #[serde(rename = "S_accum")]
    pub s_accum: T,
    #[serde(rename = "V")]
    pub virial: T,
    #[serde(rename = "V_rate_rhs")]
    pub virial_rate_rhs: T,
    #[serde(rename = "V_R")]
    pub virial_truncated: T,
    #[serde(rename = "zR")]
    pub z_r: T,
    pub coercivity: T,
    pub annulus_mass_fraction: T,
    pub boundary_mass_fraction: T,
}

impl<T: Real> DiagnosticsRecord<T> {
    /// Evaluates every functional; `s_accum` is supplied by the caller.
    pub fn compute(state: &SolutionState<T>, s_accum: T, radius: T) -> Self {
        let params = state.model().params();
        let k = kinetic(state);
        let p = potential(state);
        Self {
            t: state.t(),
            mass: mass(state),
            kinetic: k,
            potential: p,
            energy: k * T::lit(0.5) - p,
            s_accum,
            virial: virial(state),
            virial_rate_rhs: virial_rate_from(params, k, p),
            virial_truncated: virial_truncated(state, radius),
            z_r: zr_virial(state, radius),
            coercivity: coercivity_value(params, k, p),
            annulus_mass_fraction: annulus_mass_fraction(state, radius),
            boundary_mass_fraction: boundary_mass_fraction(state),
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.mass,
            self.kinetic,
            self.potential,
            self.energy,
            self.virial,
            self.virial_truncated,
            self.z_r,
        ]
        .iter()
        .all(|v| v.finite())
    }
}

/// Ground-state energy and kinetic thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub e_psi: f64,
    pub k_psi: f64,
    pub c_opt: f64,
    pub d: usize,
    /// Where the numbers came from (a path or a description).
    pub source: String,
}

impl Thresholds {
    pub fn new(e_psi: f64, k_psi: f64, c_opt: f64, d: usize, source: impl Into<String>) -> crate::Result<Self> {
        if !(e_psi > 0.0 && k_psi > 0.0 && c_opt > 0.0 && e_psi.is_finite() && k_psi.is_finite()) {
            return Err(crate::Error::Domain(format!(
                "thresholds must be positive (E_psi={e_psi}, K_psi={k_psi}, C_opt={c_opt})"
            )));
        }
        Ok(Self {
            e_psi,
            k_psi,
            c_opt,
            d,
            source: source.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    BlowUpRegime,
    ScatterRegime,
    AboveThreshold,
}

/// Threshold dichotomy for initial data with energy `e0` and kinetic energy `k0`.
pub fn classify_values(e0: f64, k0: f64, thresholds: &Thresholds) -> Classification {
    if e0 < 0.0 {
        return Classification::BlowUpRegime;
    }
    if e0 < thresholds.e_psi {
        if k0 > thresholds.k_psi {
            return Classification::BlowUpRegime;
        }
        if k0 < thresholds.k_psi {
            return Classification::ScatterRegime;
        }
    }
    Classification::AboveThreshold
}

pub fn classify<T: Real>(u0: &SolutionState<T>, thresholds: &Thresholds) -> Classification {
    classify_values(
        energy(u0).to_f64_lossy(),
        kinetic(u0).to_f64_lossy(),
        thresholds,
    )
}

/// Nodewise `Re Σ_k f_k(u) ∂_r ū_k − ∂_r Re F(u)`, both derivatives by the
/// same centred differences; vanishes to `O(h²)` for smooth fields.
pub fn gradient_identity_defect<T: Real>(state: &SolutionState<T>) -> Vec<T> {
    let grid = state.space().grid();
    let model = state.model();
    let fields = state.fields();
    let l = fields.len();
    let n = grid.n();
    let h2 = grid.spacing() * T::lit(2.0);
    let at = |i: usize| -> Vec<C<T>> { (0..l).map(|k| fields[k][i]).collect() };
    let mut out = Vec::with_capacity(n.saturating_sub(2));
    let mut f = vec![C::new(T::zero(), T::zero()); l];
    for i in 1..n.saturating_sub(1) {
        let z = at(i);
        model.forcing(&z, &mut f);
        let mut lhs = T::zero();
        for k in 0..l {
            let du = (fields[k][i + 1] - fields[k][i - 1]) / h2;
            lhs += (f[k] * du.conj()).re;
        }
        let df = (model.potential(&at(i + 1)).re - model.potential(&at(i - 1)).re) / h2;
        out.push(lhs - df);
    }
    out
}

/// `true` when every field value is finite.
pub fn fields_finite<T: Real>(fields: &[Vec<C<T>>]) -> bool {
    fields.iter().all(|f| f.iter().all(|&c| cfinite(c)))
}
