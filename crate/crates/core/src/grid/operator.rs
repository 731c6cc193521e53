use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::RadialGrid;
use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Row `i` reads `lower[i] f_{i−1} + diag[i] f_i + upper[i] f_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    fn apply_real(&self, f: &[T], out: &mut [T]) {
        let n = f.len();
        for i in 0..n {
            let mut acc = self.diag[i] * f[i];
            if i > 0 {
                acc += self.lower[i] * f[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * f[i + 1];
            }
            out[i] = acc;
        }
    }

    fn apply_complex(&self, f: &[C<T>], out: &mut [C<T>]) {
        let n = f.len();
        for i in 0..n {
            let mut acc = f[i] * self.diag[i];
            if i > 0 {
                acc += f[i - 1] * self.lower[i];
            }
            if i + 1 < n {
                acc += f[i + 1] * self.upper[i];
            }
            out[i] = acc;
        }
    }

    /// Thomas algorithm; the Laplacian rows are diagonally dominant.
    fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let n = rhs.len();
        let mut c = vec![T::zero(); n];
        let mut x = vec![T::zero(); n];
        let mut denom = self.diag[0];
        if denom == T::zero() {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        c[0] = self.upper[0] / denom;
        x[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            if denom == T::zero() || !denom.finite() {
                return Err(Error::Numerical(format!("zero pivot at row {i}")));
            }
            c[i] = if i + 1 < n { self.upper[i] / denom } else { T::zero() };
            x[i] = (rhs[i] - self.lower[i] * x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c[i] * next;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub enum Stencil<T: Real> {
    Tridiagonal(Tridiagonal<T>),
    /// The operator applied twice.
    Square(Arc<LinearOperator<T>>),
}

/// Eigen-decomposition of a self-adjoint operator in the weighted inner
/// product: `A = Q Λ Q*` with `Q = W^{-1/2} V` and `V` orthonormal.
#[derive(Debug, Clone)]
pub struct Spectral<T: Real> {
    eigenvalues: Vec<T>,
    basis: DMatrix<T>,
    sqrt_w: Vec<T>,
    inv_sqrt_w: Vec<T>,
}

impl<T: Real> Spectral<T> {
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Orthonormal basis of the symmetrised operator `W^{1/2} A W^{-1/2}`.
    pub fn symmetric_basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// Eigenvector `j` as a nodal function, unit norm in the weighted inner product.
    pub fn eigenvector(&self, j: usize) -> Vec<T> {
        self.basis
            .column(j)
            .iter()
            .zip(&self.inv_sqrt_w)
            .map(|(&v, &s)| v * s)
            .collect()
    }

    /// Maps complex nodal fields to spectral coefficients.
    ///
    /// Column `2k` / `2k+1` of the result holds the real / imaginary part of
    /// the coefficients of field `k`.
    pub fn analyse(&self, fields: &[Vec<C<T>>]) -> DMatrix<T> {
        let n = self.len();
        let mut x = DMatrix::<T>::zeros(n, 2 * fields.len());
        for (k, f) in fields.iter().enumerate() {
            for i in 0..n {
                let s = self.sqrt_w[i];
                x[(i, 2 * k)] = f[i].re * s;
                x[(i, 2 * k + 1)] = f[i].im * s;
            }
        }
        self.basis.tr_mul(&x)
    }

    /// Inverse of [`Spectral::analyse`].
    pub fn synthesise(&self, coeffs: &DMatrix<T>, fields: &mut [Vec<C<T>>]) {
        let x = &self.basis * coeffs;
        for (k, f) in fields.iter_mut().enumerate() {
            for (i, v) in f.iter_mut().enumerate() {
                let s = self.inv_sqrt_w[i];
                *v = C::new(x[(i, 2 * k)] * s, x[(i, 2 * k + 1)] * s);
            }
        }
    }

    /// `‖Vᵀ V − I‖_max`.
    pub fn orthonormality_defect(&self) -> T {
        let n = self.len();
        let g = self.basis.tr_mul(&self.basis) - DMatrix::<T>::identity(n, n);
        g.iter().fold(T::zero(), |a, &b| a.max(b.magnitude()))
    }
}

/// A radial operator on a fixed grid, self-adjoint in the weighted inner
/// product `⟨f, g⟩ = Σ w_i f_i conj(g_i)`.
#[derive(Debug, Clone)]
pub struct LinearOperator<T: Real> {
    grid: Arc<RadialGrid<T>>,
    stencil: Stencil<T>,
    spectral: Option<Arc<Spectral<T>>>,
}

/// Flux-form discrete radial Laplacian `f″ + ((d−1)/r) f′`.
///
/// Row `i` is `[A_{i+1}(f_{i+1} − f_i) − A_i (f_i − f_{i−1})] / (h w_i)` with
/// `A_j` the sphere area at radius `j h`.  `A_0 = 0` encodes regularity at the
/// origin.  The ghost value `f_n = ρ f_{n−1}` continues the field with the
/// `r^{4−d}` decay of the explicit ground state (see
/// [`RadialGrid::outer_ghost_ratio`]), so slowly decaying tails are not forced
/// to vanish at `r_max`.
pub fn radial_laplacian<T: Real>(grid: &Arc<RadialGrid<T>>) -> LinearOperator<T> {
    let n = grid.n();
    let h = grid.spacing();
    let w = grid.weights();
    let a = grid.edge_area();
    let rho = grid.outer_ghost_ratio();
    let mut lower = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    for i in 0..n {
        let inner = a[i];
        let outer = if i + 1 < n { a[i + 1] } else { a[n] * (T::one() - rho) };
        let scale = T::one() / (h * w[i]);
        lower[i] = if i > 0 { inner * scale } else { T::zero() };
        upper[i] = if i + 1 < n { a[i + 1] * scale } else { T::zero() };
        diag[i] = -(inner + outer) * scale;
    }
    LinearOperator {
        grid: Arc::clone(grid),
        stencil: Stencil::Tridiagonal(Tridiagonal { lower, diag, upper }),
        spectral: None,
    }
}

/// `Δ²` as the exact square of [`radial_laplacian`].
pub fn bilaplacian<T: Real>(grid: &Arc<RadialGrid<T>>) -> LinearOperator<T> {
    radial_laplacian(grid).squared()
}

/// Attaches a spectral factorisation.
///
/// Composite operators reuse the factorisation of their base (the eigenvalues
/// are squared and kept in the base's order); leaf operators are symmetrised
/// and handed to a dense symmetric eigensolver.
pub fn diagonalize<T: Real>(op: &LinearOperator<T>) -> Result<LinearOperator<T>> {
    if op.spectral.is_some() {
        return Ok(op.clone());
    }
    let spectral = match &op.stencil {
        Stencil::Tridiagonal(_) => op.dense_spectral()?,
        Stencil::Square(base) => {
            let base = diagonalize(base)?;
            let bs = base.spectral().expect("factorised above");
            Spectral {
                eigenvalues: bs.eigenvalues.iter().map(|&l| l * l).collect(),
                basis: bs.basis.clone(),
                sqrt_w: bs.sqrt_w.clone(),
                inv_sqrt_w: bs.inv_sqrt_w.clone(),
            }
        }
    };
    Ok(LinearOperator {
        grid: Arc::clone(&op.grid),
        stencil: op.stencil.clone(),
        spectral: Some(Arc::new(spectral)),
    })
}

impl<T: Real> LinearOperator<T> {
    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn stencil(&self) -> &Stencil<T> {
        &self.stencil
    }

    pub fn spectral(&self) -> Option<&Spectral<T>> {
        self.spectral.as_deref()
    }

    pub fn spectral_arc(&self) -> Option<Arc<Spectral<T>>> {
        self.spectral.clone()
    }

    /// `self ∘ self`, sharing any factorisation already attached.
    pub fn squared(self) -> LinearOperator<T> {
        let grid = Arc::clone(&self.grid);
        let spectral = self.spectral.as_ref().map(|s| {
            Arc::new(Spectral {
                eigenvalues: s.eigenvalues.iter().map(|&l| l * l).collect(),
                basis: s.basis.clone(),
                sqrt_w: s.sqrt_w.clone(),
                inv_sqrt_w: s.inv_sqrt_w.clone(),
            })
        });
        LinearOperator {
            grid,
            stencil: Stencil::Square(Arc::new(self)),
            spectral,
        }
    }

    pub fn apply_real_into(&self, f: &[T], out: &mut [T]) {
        match &self.stencil {
            Stencil::Tridiagonal(t) => t.apply_real(f, out),
            Stencil::Square(base) => {
                let mut tmp = vec![T::zero(); f.len()];
                base.apply_real_into(f, &mut tmp);
                base.apply_real_into(&tmp, out);
            }
        }
    }

    pub fn apply_real(&self, f: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); f.len()];
        self.apply_real_into(f, &mut out);
        out
    }

    pub fn apply_complex_into(&self, f: &[C<T>], out: &mut [C<T>]) {
        match &self.stencil {
            Stencil::Tridiagonal(t) => t.apply_complex(f, out),
            Stencil::Square(base) => {
                let mut tmp = vec![C::new(T::zero(), T::zero()); f.len()];
                base.apply_complex_into(f, &mut tmp);
                base.apply_complex_into(&tmp, out);
            }
        }
    }

    pub fn apply_complex(&self, f: &[C<T>]) -> Vec<C<T>> {
        let mut out = vec![C::new(T::zero(), T::zero()); f.len()];
        self.apply_complex_into(f, &mut out);
        out
    }

    /// Solves `A x = rhs`.
    pub fn solve_real(&self, rhs: &[T]) -> Result<Vec<T>> {
        match &self.stencil {
            Stencil::Tridiagonal(t) => t.solve(rhs),
            Stencil::Square(base) => base.solve_real(&base.solve_real(rhs)?),
        }
    }

    /// Dense matrix in the nodal basis (not symmetric in the Euclidean sense).
    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.grid.n();
        match &self.stencil {
            Stencil::Tridiagonal(t) => {
                let mut m = DMatrix::<T>::zeros(n, n);
                for i in 0..n {
                    m[(i, i)] = t.diag[i];
                    if i > 0 {
                        m[(i, i - 1)] = t.lower[i];
                    }
                    if i + 1 < n {
                        m[(i, i + 1)] = t.upper[i];
                    }
                }
                m
            }
            Stencil::Square(base) => {
                let b = base.to_dense();
                &b * &b
            }
        }
    }

    /// `W^{1/2} A W^{-1/2}`, symmetric iff `A` is self-adjoint in the weighted product.
    pub fn symmetrised_dense(&self) -> DMatrix<T> {
        let w = self.grid.weights();
        let mut m = self.to_dense();
        let n = self.grid.n();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= (w[i] / w[j]).sqrt();
            }
        }
        m
    }

    /// `‖B − Bᵀ‖_F / ‖B‖_F` for the symmetrised matrix `B`.
    pub fn self_adjointness_residual(&self) -> T {
        let b = self.symmetrised_dense();
        let diff = &b - b.transpose();
        diff.norm() / b.norm()
    }

    /// `‖B − V Λ Vᵀ‖_F / ‖B‖_F`, or `None` without a factorisation.
    pub fn reconstruction_residual(&self) -> Option<T> {
        let s = self.spectral()?;
        let b = self.symmetrised_dense();
        let mut vl = s.basis.clone();
        for (j, &l) in s.eigenvalues.iter().enumerate() {
            vl.column_mut(j).scale_mut(l);
        }
        let rec = vl * s.basis.transpose();
        Some((&b - rec).norm() / b.norm())
    }

    fn dense_spectral(&self) -> Result<Spectral<T>> {
        let b = self.symmetrised_dense();
        let sym = (&b + b.transpose()) * T::lit(0.5);
        spectral_from_symmetric(sym, self.grid.weights())
    }

    /// Factorises the symmetrised dense matrix directly, ignoring any
    /// composition structure. This is the independent route used to cross-check
    /// [`diagonalize`].
    pub fn diagonalize_dense(&self) -> Result<Spectral<T>> {
        self.dense_spectral()
    }
}

fn spectral_from_symmetric<T: Real>(sym: DMatrix<T>, weights: &[T]) -> Result<Spectral<T>> {
    let n = sym.nrows();
    if sym.iter().any(|v| !v.finite()) {
        return Err(Error::Numerical("operator matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(sym, T::eps(), 0).ok_or_else(|| {
        Error::Numerical(format!("symmetric eigensolver did not converge (n={n})"))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<T> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut basis = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }
    // One Newton–Schulz sweep towards the nearest orthogonal matrix.
    let gram = basis.tr_mul(&basis);
    let correction = DMatrix::<T>::identity(n, n) * T::lit(1.5) - gram * T::lit(0.5);
    let basis = &basis * correction;
    if basis.iter().any(|v| !v.finite()) {
        return Err(Error::Numerical("eigenvectors contain non-finite entries".into()));
    }
    let sqrt_w: Vec<T> = weights.iter().map(|&w| w.sqrt()).collect();
    let inv_sqrt_w = sqrt_w.iter().map(|&s| T::one() / s).collect();
    Ok(Spectral {
        eigenvalues,
        basis,
        sqrt_w,
        inv_sqrt_w,
    })
}
