//! Time stepping by Strang splitting.
//!
//! The linear part `iα_k ∂_t u_k + γ_k Δ²u_k = 0` is solved exactly in the
//! eigenbasis of the discrete bilaplacian; the nonlinear part
//! `iα_k ∂_t u_k = f_k(u)` is solved pointwise, exactly when the model only
//! rotates phases and by one classical Runge–Kutta step otherwise.

mod evolve;

use std::sync::Arc;

pub use evolve::{detect_blowup, evolve, evolve_with_hook, EvolveOptions, Resume, Termination, Trajectory, TrajectoryRecord};

use crate::error::{domain, Error, Result};
use crate::grid::Discretization;
use crate::model::NonlinearityModel;
use crate::scalar::{cabs, cfinite, cis, Real, C};

/// The evolving profiles `u_k(t, r_i)`.
#[derive(Debug, Clone)]
pub struct SolutionState<T: Real> {
    t: T,
    fields: Vec<Vec<C<T>>>,
    space: Arc<Discretization<T>>,
    model: Arc<NonlinearityModel<T>>,
}

impl<T: Real> SolutionState<T> {
    pub fn new(
        t: T,
        fields: Vec<Vec<C<T>>>,
        space: Arc<Discretization<T>>,
        model: Arc<NonlinearityModel<T>>,
    ) -> Result<Self> {
        let n = space.grid().n();
        if model.params().d() != space.grid().d() {
            return Err(domain(format!(
                "model is posed in d={} but the grid has d={}",
                model.params().d(),
                space.grid().d()
            )));
        }
        if fields.len() != model.l() {
            return Err(domain(format!(
                "model has {} components, got {} profiles",
                model.l(),
                fields.len()
            )));
        }
        for (k, f) in fields.iter().enumerate() {
            if f.len() != n {
                return Err(domain(format!("profile {k} has {} samples, grid has {n}", f.len())));
            }
            if let Some(i) = f.iter().position(|&c| !cfinite(c)) {
                return Err(domain(format!("profile {k} is not finite at node {i}")));
            }
        }
        if !t.finite() {
            return Err(domain("time must be finite"));
        }
        Ok(Self {
            t,
            fields,
            space,
            model,
        })
    }

    /// Profiles given as functions of `r`, one per component.
    pub fn from_fn(
        t: T,
        profiles: &[&dyn Fn(T) -> C<T>],
        space: Arc<Discretization<T>>,
        model: Arc<NonlinearityModel<T>>,
    ) -> Result<Self> {
        let fields = profiles.iter().map(|p| space.grid().sample_complex(p)).collect();
        Self::new(t, fields, space, model)
    }

    pub fn zero(space: Arc<Discretization<T>>, model: Arc<NonlinearityModel<T>>) -> Result<Self> {
        let fields = vec![vec![C::new(T::zero(), T::zero()); space.grid().n()]; model.l()];
        Self::new(T::zero(), fields, space, model)
    }

    pub fn t(&self) -> T {
        self.t
    }
    pub fn fields(&self) -> &[Vec<C<T>>] {
        &self.fields
    }
    pub fn component(&self, k: usize) -> &[C<T>] {
        &self.fields[k]
    }
    pub fn space(&self) -> &Arc<Discretization<T>> {
        &self.space
    }
    pub fn model(&self) -> &Arc<NonlinearityModel<T>> {
        &self.model
    }

    /// Same grid, model and time with new profiles.
    pub fn with_fields(&self, fields: Vec<Vec<C<T>>>) -> Result<Self> {
        Self::new(self.t, fields, Arc::clone(&self.space), Arc::clone(&self.model))
    }

    pub fn with_time(mut self, t: T) -> Self {
        self.t = t;
        self
    }

    /// Every profile multiplied by `a`.
    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        for f in &mut out.fields {
            for v in f.iter_mut() {
                *v = *v * a;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(|f| f.iter().all(|&c| cfinite(c)))
    }

    pub(crate) fn apply_linear(&mut self, dt: T) -> Result<()> {
        let spectral = self.space.bilaplacian().spectral().ok_or_else(|| {
            Error::State("linear flow needs a factorised bilaplacian".into())
        })?;
        if dt == T::zero() {
            return Ok(());
        }
        let params = self.model.params();
        let mut coeffs = spectral.analyse(&self.fields);
        for k in 0..self.fields.len() {
            let rate = dt * params.gamma()[k] / params.alpha()[k];
            for (j, &mu) in spectral.eigenvalues().iter().enumerate() {
                let c = C::new(coeffs[(j, 2 * k)], coeffs[(j, 2 * k + 1)]) * cis(rate * mu);
                coeffs[(j, 2 * k)] = c.re;
                coeffs[(j, 2 * k + 1)] = c.im;
            }
        }
        spectral.synthesise(&coeffs, &mut self.fields);
        Ok(())
    }

    pub(crate) fn apply_nonlinear(&mut self, dt: T) -> Result<()> {
        let model = Arc::clone(&self.model);
        let l = model.l();
        let n = self.space.grid().n();
        let alpha = model.params().alpha().to_vec();
        let mut z = vec![C::new(T::zero(), T::zero()); l];
        if model.modulus_preserving() {
            let mut moduli = vec![T::zero(); l];
            let mut gains = vec![T::zero(); l];
            for i in 0..n {
                for k in 0..l {
                    moduli[k] = cabs(self.fields[k][i]);
                }
                model.gains(&moduli, &mut gains);
                for k in 0..l {
                    let v = self.fields[k][i] * cis(-dt * gains[k] / alpha[k]);
                    if !cfinite(v) {
                        return Err(Error::NonFinite(format!(
                            "component {k} at node {i}, t={}",
                            self.t
                        )));
                    }
                    self.fields[k][i] = v;
                }
            }
            return Ok(());
        }
        // y' = −i f(y)/α, one RK4 step per node.
        let minus_i = C::new(T::zero(), -T::one());
        let rhs = |y: &[C<T>], out: &mut [C<T>]| {
            model.forcing(y, out);
            for (o, &a) in out.iter_mut().zip(&alpha) {
                *o = *o * minus_i / a;
            }
        };
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        let (mut k1, mut k2, mut k3, mut k4) = (z.clone(), z.clone(), z.clone(), z.clone());
        let mut tmp = z.clone();
        for i in 0..n {
            for k in 0..l {
                z[k] = self.fields[k][i];
            }
            rhs(&z, &mut k1);
            for k in 0..l {
                tmp[k] = z[k] + k1[k] * (dt * half);
            }
            rhs(&tmp, &mut k2);
            for k in 0..l {
                tmp[k] = z[k] + k2[k] * (dt * half);
            }
            rhs(&tmp, &mut k3);
            for k in 0..l {
                tmp[k] = z[k] + k3[k] * dt;
            }
            rhs(&tmp, &mut k4);
            for k in 0..l {
                let v = z[k] + (k1[k] + (k2[k] + k3[k]) * T::lit(2.0) + k4[k]) * (dt * sixth);
                if !cfinite(v) {
                    return Err(Error::NonFinite(format!(
                        "component {k} at node {i}, t={}",
                        self.t
                    )));
                }
                self.fields[k][i] = v;
            }
        }
        Ok(())
    }

    pub(crate) fn advance(&mut self, dt: T) -> Result<()> {
        let half = dt * T::lit(0.5);
        self.apply_linear(half)?;
        self.apply_nonlinear(dt)?;
        self.apply_linear(half)?;
        self.t += dt;
        Ok(())
    }
}

/// `u_k ↦ Q e^{i dt (γ_k/α_k) Λ²} Q* u_k`.
pub fn linear_flow<T: Real>(state: &SolutionState<T>, dt: T) -> Result<SolutionState<T>> {
    let mut out = state.clone();
    out.apply_linear(dt)?;
    out.t += dt;
    Ok(out)
}

/// Solves `iα_k ∂_t u_k = f_k(u)` nodewise over `dt`.
pub fn nonlinear_substep<T: Real>(state: &SolutionState<T>, dt: T) -> Result<SolutionState<T>> {
    let mut out = state.clone();
    out.apply_nonlinear(dt)?;
    out.t += dt;
    Ok(out)
}

/// Half a linear step, a full nonlinear step, half a linear step.
pub fn strang_step<T: Real>(state: &SolutionState<T>, dt: T) -> Result<SolutionState<T>> {
    let mut out = state.clone();
    out.advance(dt)?;
    Ok(out)
}
