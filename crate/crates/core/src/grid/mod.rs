//! Radial discretisation of ℝ^d.
//!
//! Nodes sit at cell centres `r_i = (i + ½) h`, `h = r_max / n`, so no node
//! touches the singular point `r = 0`.  Weights are the midpoint rule against
//! `ω r^{d−1}` with a corrected last cell, so constants integrate exactly and
//! decaying integrands converge fast.  The flux-form Laplacian built from the
//! same weights is self-adjoint in the weighted inner product.

mod operator;

use std::sync::Arc;

pub use operator::{bilaplacian, diagonalize, radial_laplacian, LinearOperator, Spectral, Stencil, Tridiagonal};

use crate::error::{domain, Result};
use crate::model::{MAX_DIM, MIN_DIM};
use crate::scalar::{Real, C};

/// Smallest supported node count.
pub const MIN_NODES: usize = 16;

/// Surface measure `ω_{d−1} = 2 π^{d/2} / Γ(d/2)` of the unit sphere in ℝ^d.
pub fn sphere_area<T: Real>(d: usize) -> T {
    // Γ(d/2) by the half-integer recursion.
    let pi = T::PI();
    let mut gamma = if d % 2 == 0 { T::one() } else { pi.sqrt() };
    let mut x = if d % 2 == 0 { T::one() } else { T::lit(0.5) };
    let target = T::lit(d as f64 / 2.0);
    while x < target {
        gamma *= x;
        x += T::one();
    }
    T::lit(2.0) * pi.powf(T::lit(d as f64 / 2.0)) / gamma
}

/// Volume of the `d`-ball of radius `r`.
pub fn ball_volume<T: Real>(d: usize, r: T) -> T {
    sphere_area::<T>(d) * r.powi(d as i32) / T::from_usize_lossy(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T> {
    d: usize,
    n: usize,
    r_max: T,
    h: T,
    nodes: Vec<T>,
    weights: Vec<T>,
    /// Flux coefficients at the cell edges `e_j = j h`, `j = 0..=n`;
    /// approximately `ω_{d−1} e_j^{d−1}`.
    edge_area: Vec<T>,
}

/// Builds the half-offset grid with `n` shells on `[0, r_max]`.
pub fn build_grid<T: Real>(d: usize, n: usize, r_max: T) -> Result<RadialGrid<T>> {
    if !(MIN_DIM..=MAX_DIM).contains(&d) {
        return Err(domain(format!("dimension d={d} outside [{MIN_DIM}, {MAX_DIM}]")));
    }
    if n < MIN_NODES {
        return Err(domain(format!("need at least {MIN_NODES} nodes, got {n}")));
    }
    if !(r_max.finite() && r_max > T::zero()) {
        return Err(domain(format!("r_max must be positive, got {r_max}")));
    }
    let h = r_max / T::from_usize_lossy(n);
    let omega = sphere_area::<T>(d);
    let dd = T::from_usize_lossy(d);
    let half = T::lit(0.5);
    let nodes: Vec<T> = (0..n).map(|i| (T::from_usize_lossy(i) + half) * h).collect();
    let mut weights: Vec<T> = nodes
        .iter()
        .map(|&r| omega * r.powi(d as i32 - 1) * h)
        .collect();
    // Midpoint weights are accurate to high order for integrands that vanish
    // smoothly near r_max; the last cell absorbs the endpoint defect so that
    // constants integrate exactly.
    let interior: T = weights[..n - 1].iter().fold(T::zero(), |a, &w| a + w);
    weights[n - 1] = ball_volume(d, r_max) - interior;
    // Edge coefficients chosen so that the flux-form Laplacian maps r² to 2d.
    let mut edge_area = Vec::with_capacity(n + 1);
    edge_area.push(T::zero());
    let mut cumulative = T::zero();
    for (j, &w) in weights[..n - 1].iter().enumerate() {
        cumulative += w;
        edge_area.push(dd * cumulative / (T::from_usize_lossy(j + 1) * h));
    }
    edge_area.push(omega * r_max.powi(d as i32 - 1));
    Ok(RadialGrid {
        d,
        n,
        r_max,
        h,
        nodes,
        weights,
        edge_area,
    })
}

impl<T: Real> RadialGrid<T> {
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn r_max(&self) -> T {
        self.r_max
    }
    pub fn spacing(&self) -> T {
        self.h
    }
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }
    pub fn weights(&self) -> &[T] {
        &self.weights
    }
    /// `ρ = ((r_max + h/2)/(r_max − h/2))^{4−d}`, the ratio of the ghost value
    /// beyond the last node to the last node value.
    pub fn outer_ghost_ratio(&self) -> T {
        let half = self.h / T::lit(2.0);
        let e = T::lit(4.0) - T::from_usize_lossy(self.d);
        ((self.r_max + half) / (self.r_max - half)).powf(e)
    }

    pub(crate) fn edge_area(&self) -> &[T] {
        &self.edge_area
    }

    /// Degree of polynomials in `r` the quadrature integrates exactly.
    pub fn quadrature_order(&self) -> usize {
        0
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(domain(format!("expected {} samples, got {len}", self.n)));
        }
        Ok(())
    }

    /// `Σ_i w_i g(r_i)`, approximating `∫_{|x|<r_max} g(|x|) dx`.
    pub fn integrate(&self, g: &[T]) -> Result<T> {
        self.check_len(g.len())?;
        Ok(self.integrate_unchecked(g))
    }

    pub fn integrate_complex(&self, g: &[C<T>]) -> Result<C<T>> {
        self.check_len(g.len())?;
        Ok(self
            .weights
            .iter()
            .zip(g)
            .fold(C::new(T::zero(), T::zero()), |acc, (&w, &v)| acc + v * w))
    }

    pub(crate) fn integrate_unchecked(&self, g: &[T]) -> T {
        self.weights
            .iter()
            .zip(g)
            .fold(T::zero(), |acc, (&w, &v)| acc + w * v)
    }

    /// Integrates `g(r_i)` over nodes in `[r_lo, r_hi)`.
    pub fn integrate_shell(&self, g: &[T], r_lo: T, r_hi: T) -> T {
        self.weights
            .iter()
            .zip(&self.nodes)
            .zip(g)
            .filter(|((_, &r), _)| r >= r_lo && r < r_hi)
            .fold(T::zero(), |acc, ((&w, _), &v)| acc + w * v)
    }

    /// Weighted inner product `Σ w_i f_i conj(g_i)`.
    pub fn inner(&self, f: &[C<T>], g: &[C<T>]) -> C<T> {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .fold(C::new(T::zero(), T::zero()), |acc, (&w, (&a, &b))| {
                acc + a * b.conj() * w
            })
    }

    pub fn inner_real(&self, f: &[T], g: &[T]) -> T {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .fold(T::zero(), |acc, (&w, (&a, &b))| acc + w * a * b)
    }

    /// `Σ w_i |f_i|²`.
    pub fn norm_sq(&self, f: &[C<T>]) -> T {
        self.weights
            .iter()
            .zip(f)
            .fold(T::zero(), |acc, (&w, v)| acc + w * v.norm_sqr())
    }

    /// Samples `g` at the nodes.
    pub fn sample(&self, g: impl Fn(T) -> T) -> Vec<T> {
        self.nodes.iter().map(|&r| g(r)).collect()
    }

    pub fn sample_complex(&self, g: impl Fn(T) -> C<T>) -> Vec<C<T>> {
        self.nodes.iter().map(|&r| g(r)).collect()
    }
}

/// A grid together with its Laplacian and bilaplacian.
///
/// Built with [`Discretization::new`] both operators carry a spectral
/// factorisation; [`Discretization::unfactorised`] skips the eigensolve for
/// callers that only need applications and solves.
#[derive(Debug, Clone)]
pub struct Discretization<T: Real> {
    grid: Arc<RadialGrid<T>>,
    laplacian: LinearOperator<T>,
    bilaplacian: LinearOperator<T>,
}

impl<T: Real> Discretization<T> {
    pub fn new(grid: RadialGrid<T>) -> Result<Self> {
        let grid = Arc::new(grid);
        let laplacian = diagonalize(&radial_laplacian(&grid))?;
        let bilaplacian = laplacian.clone().squared();
        Ok(Self {
            grid,
            laplacian,
            bilaplacian,
        })
    }

    pub fn unfactorised(grid: RadialGrid<T>) -> Self {
        let grid = Arc::new(grid);
        let laplacian = radial_laplacian(&grid);
        let bilaplacian = laplacian.clone().squared();
        Self {
            grid,
            laplacian,
            bilaplacian,
        }
    }

    pub fn build(d: usize, n: usize, r_max: T) -> Result<Self> {
        Self::new(build_grid(d, n, r_max)?)
    }

    pub fn grid(&self) -> &RadialGrid<T> {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn laplacian(&self) -> &LinearOperator<T> {
        &self.laplacian
    }

    pub fn bilaplacian(&self) -> &LinearOperator<T> {
        &self.bilaplacian
    }

    pub fn is_factorised(&self) -> bool {
        self.bilaplacian.spectral().is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas_match_closed_forms() {
        assert_relative_eq!(sphere_area::<f64>(5), 8.0 * PI * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area::<f64>(8), PI.powi(4) / 3.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area::<f64>(6), PI.powi(3), max_relative = 1e-14);
    }

    #[test]
    fn volume_of_unit_balls() {
        let g5 = build_grid::<f64>(5, 512, 1.0).unwrap();
        let one = vec![1.0; 512];
        assert_relative_eq!(g5.integrate(&one).unwrap(), 8.0 * PI * PI / 15.0, max_relative = 1e-12);
        let g8 = build_grid::<f64>(8, 512, 1.0).unwrap();
        assert_relative_eq!(g8.integrate(&one).unwrap(), PI.powi(4) / 24.0, max_relative = 1e-12);
        for d in MIN_DIM..=MAX_DIM {
            let g = build_grid::<f64>(d, 64, 3.0).unwrap();
            let v = g.integrate(&vec![1.0; 64]).unwrap();
            assert_relative_eq!(v, ball_volume(d, 3.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_over_r5() {
        let g = build_grid::<f64>(5, 512, 10.0).unwrap();
        let v = g.integrate(&g.sample(|r| (-r * r).exp())).unwrap();
        assert_relative_eq!(v, PI.powf(2.5), max_relative = 1e-9);
    }

    #[test]
    fn r_squared_on_unit_ball() {
        let g = build_grid::<f64>(5, 512, 1.0).unwrap();
        let v = g.integrate(&g.sample(|r| r * r)).unwrap();
        assert_relative_eq!(v, 8.0 * PI * PI / 21.0, max_relative = 1e-5);
    }

    #[test]
    fn monomials_converge_at_second_order() {
        for m in 1..=4 {
            let err = |n: usize| {
                let g = build_grid::<f64>(8, n, 1.0).unwrap();
                let exact = sphere_area::<f64>(8) / (8.0 + m as f64);
                (g.integrate(&g.sample(|r| r.powi(m))).unwrap() - exact).abs() / exact
            };
            let order = (err(128) / err(256)).log2();
            assert!(order > 1.9, "m={m} order {order}");
        }
    }

    #[test]
    fn integration_is_linear() {
        let g = build_grid::<f64>(6, 100, 2.0).unwrap();
        let a = g.sample(|r| r.sin());
        let b = g.sample(|r| (-r).exp());
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 3.0 * x + y).collect();
        let lhs = g.integrate(&combo).unwrap();
        let rhs = 3.0 * g.integrate(&a).unwrap() + g.integrate(&b).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
    }

    #[test]
    fn rejects_invalid_arguments() {
        assert!(build_grid::<f64>(4, 64, 1.0).is_err());
        assert!(build_grid::<f64>(17, 64, 1.0).is_err());
        assert!(build_grid::<f64>(5, 8, 1.0).is_err());
        assert!(build_grid::<f64>(5, 64, 0.0).is_err());
        assert!(build_grid::<f64>(5, 64, f64::NAN).is_err());
        let g = build_grid::<f64>(5, 64, 1.0).unwrap();
        assert!(g.integrate(&[1.0; 10]).is_err());
    }

    #[test]
    fn grid_invariants() {
        let g = build_grid::<f64>(9, 300, 7.5).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes()[0] > 0.0 && *g.nodes().last().unwrap() < 7.5);
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn single_precision_grid() {
        let g = build_grid::<f32>(5, 256, 1.0).unwrap();
        let v = g.integrate(&vec![1.0f32; 256]).unwrap();
        assert!((v - ball_volume::<f32>(5, 1.0)).abs() / v < 1e-5);
    }
}
