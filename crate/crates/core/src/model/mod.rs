//! Coupled nonlinearities `(F, f_1, …, f_l)` and their structural audit.
//!
//! A model couples the physical parameters of the system (dimension,
//! component count, the coefficients `α_k`, `γ_k`) with a black-box
//! evaluator for the potential `F: ℂˡ → ℂ` and the forcing terms
//! `f_k: ℂˡ → ℂ`.  Everything downstream (propagation, ground states,
//! diagnostics) talks to the evaluator only through [`NonlinearityModel`].

mod builtin;
mod hypotheses;
mod wirtinger;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use builtin::{CoupledQuartic, FnModel, Free, PowerLaw};
pub use hypotheses::{check_hypotheses, EntryStatus, HypothesisEntry, HypothesisReport};
pub use wirtinger::{default_step, wirtinger_fd};

use crate::error::{domain, Result};
use crate::scalar::{cfinite, Real, C};

/// Smallest and largest admissible dimension.
pub const MIN_DIM: usize = 5;
pub const MAX_DIM: usize = 16;

/// Returns `(8/(d−4), 2d/(d−4), 2(d+4)/(d−4))`: the Lipschitz exponent of
/// `∂f`, the homogeneity degree of `F` and the scattering-size exponent.
pub fn critical_exponents<T: Real>(d: usize) -> Result<(T, T, T)> {
    if !(MIN_DIM..=MAX_DIM).contains(&d) {
        return Err(domain(format!(
            "dimension d={d} outside the admissible range [{MIN_DIM}, {MAX_DIM}]"
        )));
    }
    let dd = T::from_usize_lossy(d);
    let four = T::lit(4.0);
    let den = dd - four;
    Ok((
        T::lit(8.0) / den,
        T::lit(2.0) * dd / den,
        T::lit(2.0) * (dd + four) / den,
    ))
}

/// Physical parameters of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    d: usize,
    alpha: Vec<T>,
    gamma: Vec<T>,
    p_crit: T,
    deg: T,
    s_exp: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(d: usize, alpha: Vec<T>, gamma: Vec<T>) -> Result<Self> {
        let (p_crit, deg, s_exp) = critical_exponents::<T>(d)?;
        if alpha.is_empty() {
            return Err(domain("at least one component is required"));
        }
        if alpha.len() != gamma.len() {
            return Err(domain(format!(
                "alpha has {} entries but gamma has {}",
                alpha.len(),
                gamma.len()
            )));
        }
        for (k, (&a, &g)) in alpha.iter().zip(&gamma).enumerate() {
            if !(a.finite() && a > T::zero()) {
                return Err(domain(format!("alpha[{k}] = {a} must be positive")));
            }
            if !(g.finite() && g > T::zero()) {
                return Err(domain(format!("gamma[{k}] = {g} must be positive")));
            }
        }
        Ok(Self {
            d,
            alpha,
            gamma,
            p_crit,
            deg,
            s_exp,
        })
    }

    /// Unit coefficients `α_k = γ_k = 1`.
    pub fn unit(d: usize, l: usize) -> Result<Self> {
        Self::new(d, vec![T::one(); l], vec![T::one(); l])
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn l(&self) -> usize {
        self.alpha.len()
    }
    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }
    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }
    /// `8/(d−4)`.
    pub fn p_crit(&self) -> T {
        self.p_crit
    }
    /// `2d/(d−4)`, the homogeneity degree of `F`.
    pub fn deg(&self) -> T {
        self.deg
    }
    /// `2(d+4)/(d−4)`.
    pub fn s_exp(&self) -> T {
        self.s_exp
    }
    /// `(d+4)/(d−4)`, the growth exponent of `f`.
    pub fn growth_exp(&self) -> T {
        self.deg - T::one()
    }
    /// `d` as a scalar.
    pub fn dim(&self) -> T {
        T::from_usize_lossy(self.d)
    }
}

/// Black-box evaluator for a coupled nonlinearity.
///
/// Implementations must be pure; the hypothesis checker calls them from
/// many threads at once.
pub trait Nonlinearity<T: Real>: Send + Sync {
    fn name(&self) -> String;

    fn components(&self) -> usize;

    /// `F(z)`.
    fn potential(&self, z: &[C<T>]) -> C<T>;

    /// Writes `(f_1(z), …, f_l(z))` into `out`.
    fn forcing(&self, z: &[C<T>], out: &mut [C<T>]);

    /// For modulus-preserving nonlinearities `f_k(z) = g_k(|z_1|,…,|z_l|) z_k`
    /// with `g_k` real, writes the gains and returns `true`.
    fn gains(&self, _moduli: &[T], _out: &mut [T]) -> bool {
        false
    }
}

/// A nonlinearity bound to the parameters it is meant to be used with.
#[derive(Clone)]
pub struct NonlinearityModel<T: Real> {
    params: ModelParams<T>,
    kernel: Arc<dyn Nonlinearity<T>>,
    sigma: Vec<T>,
    modulus_preserving: bool,
}

impl<T: Real> fmt::Debug for NonlinearityModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearityModel")
            .field("name", &self.kernel.name())
            .field("params", &self.params)
            .field("sigma", &self.sigma)
            .field("modulus_preserving", &self.modulus_preserving)
            .finish()
    }
}

impl<T: Real> NonlinearityModel<T> {
    /// Binds `kernel` to `params`. The gauge exponents default to `α_k/γ_k`.
    pub fn new(params: ModelParams<T>, kernel: Arc<dyn Nonlinearity<T>>) -> Result<Self> {
        if kernel.components() != params.l() {
            return Err(domain(format!(
                "nonlinearity '{}' has {} components but parameters describe {}",
                kernel.name(),
                kernel.components(),
                params.l()
            )));
        }
        let sigma = params
            .alpha()
            .iter()
            .zip(params.gamma())
            .map(|(&a, &g)| a / g)
            .collect();
        let l = params.l();
        let mut probe = vec![T::zero(); l];
        let modulus_preserving = kernel.gains(&vec![T::one(); l], &mut probe);
        Ok(Self {
            params,
            kernel,
            sigma,
            modulus_preserving,
        })
    }

    /// Decoupled critical power `F = (d−4)/(2d) Σ |z_k|^{2d/(d−4)}`.
    pub fn decoupled(params: ModelParams<T>) -> Result<Self> {
        let kernel = PowerLaw::new(params.l(), params.deg());
        Self::new(params, Arc::new(kernel))
    }

    /// The linear system, `F ≡ 0`.
    pub fn free(params: ModelParams<T>) -> Result<Self> {
        let l = params.l();
        Self::new(params, Arc::new(Free::new(l)))
    }

    /// Symmetric two-component quartic coupling, only critical at `d = 8`.
    pub fn coupled(params: ModelParams<T>, beta: T) -> Result<Self> {
        if params.d() != 8 {
            return Err(domain(format!(
                "the quartic coupled model is energy-critical only at d=8 (got d={})",
                params.d()
            )));
        }
        if params.l() != 2 {
            return Err(domain("the quartic coupled model has exactly two components"));
        }
        if !(beta.finite() && beta >= T::zero()) {
            return Err(domain(format!("coupling beta = {beta} must be non-negative")));
        }
        Self::new(params, Arc::new(CoupledQuartic::new(beta)))
    }

    /// `F = (1/q) Σ |z_k|^q` for an arbitrary exponent `q`; critical only when
    /// `q = 2d/(d−4)`.
    pub fn power(params: ModelParams<T>, q: T) -> Result<Self> {
        if !(q.finite() && q > T::lit(2.0)) {
            return Err(domain(format!("power-law exponent q = {q} must exceed 2")));
        }
        let kernel = PowerLaw::new(params.l(), q);
        Self::new(params, Arc::new(kernel))
    }

    /// Selects a built-in model by name.
    ///
    /// * `decoupled`, `free`: no extra parameters.
    /// * `coupled`: requires `beta`.
    /// * `power`: requires `exponent`.
    pub fn by_name(name: &str, params: ModelParams<T>, extra: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| {
            extra
                .get(key)
                .copied()
                .ok_or_else(|| domain(format!("model '{name}' requires parameter '{key}'")))
        };
        let allow = |keys: &[&str]| -> Result<()> {
            for k in extra.keys() {
                if !keys.contains(&k.as_str()) {
                    return Err(domain(format!("model '{name}' does not take parameter '{k}'")));
                }
            }
            Ok(())
        };
        match name {
            "decoupled" => {
                allow(&[])?;
                Self::decoupled(params)
            }
            "free" => {
                allow(&[])?;
                Self::free(params)
            }
            "coupled" => {
                allow(&["beta"])?;
                Self::coupled(params, T::lit(get("beta")?))
            }
            "power" => {
                allow(&["exponent"])?;
                Self::power(params, T::lit(get("exponent")?))
            }
            other => Err(domain(format!("unknown model '{other}'"))),
        }
    }

    /// Overrides the gauge exponents `σ_k`.
    pub fn with_sigma(mut self, sigma: Vec<T>) -> Result<Self> {
        if sigma.len() != self.params.l() {
            return Err(domain("sigma must have one entry per component"));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Forces the generic (non phase-only) nonlinear substep.
    pub fn without_modulus_shortcut(mut self) -> Self {
        self.modulus_preserving = false;
        self
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }
    pub fn name(&self) -> String {
        self.kernel.name()
    }
    pub fn l(&self) -> usize {
        self.params.l()
    }
    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }
    pub fn modulus_preserving(&self) -> bool {
        self.modulus_preserving
    }
    pub fn kernel(&self) -> &Arc<dyn Nonlinearity<T>> {
        &self.kernel
    }

    fn check_input(&self, z: &[C<T>]) -> Result<()> {
        if z.len() != self.l() {
            return Err(domain(format!(
                "expected {} components, got {}",
                self.l(),
                z.len()
            )));
        }
        if let Some(k) = z.iter().position(|&c| !cfinite(c)) {
            return Err(domain(format!("non-finite input in component {k}")));
        }
        Ok(())
    }

    /// `F(z)` with input validation.
    pub fn eval_potential(&self, z: &[C<T>]) -> Result<C<T>> {
        self.check_input(z)?;
        Ok(self.kernel.potential(z))
    }

    /// `(f_1(z), …, f_l(z))` with input validation.
    pub fn eval_forcing(&self, z: &[C<T>]) -> Result<Vec<C<T>>> {
        self.check_input(z)?;
        let mut out = vec![C::new(T::zero(), T::zero()); self.l()];
        self.kernel.forcing(z, &mut out);
        Ok(out)
    }

    /// Unchecked `F(z)` for the hot loops.
    #[inline]
    pub fn potential(&self, z: &[C<T>]) -> C<T> {
        self.kernel.potential(z)
    }

    /// Unchecked forcing for the hot loops.
    #[inline]
    pub fn forcing(&self, z: &[C<T>], out: &mut [C<T>]) {
        self.kernel.forcing(z, out)
    }

    #[inline]
    pub fn gains(&self, moduli: &[T], out: &mut [T]) -> bool {
        self.modulus_preserving && self.kernel.gains(moduli, out)
    }
}
