use crate::error::{domain, Result};
use crate::scalar::{cabs, Real, C};

/// Default finite-difference step `10⁻⁵ (1 + |z|)`.
pub fn default_step<T: Real>(z: &[C<T>]) -> T {
    let norm = z
        .iter()
        .map(|c| c.norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        .sqrt();
    T::lit(1e-5) * (T::one() + norm)
}

/// Central-difference Wirtinger derivatives `(∂F/∂z_m, ∂F/∂z̄_m)` at `z`.
///
/// With `z_m = x_m + i y_m`, `∂/∂z_m = (∂_x − i∂_y)/2` and
/// `∂/∂z̄_m = (∂_x + i∂_y)/2`; both partials are central differences, so
/// the error is `O(h²)`.
pub fn wirtinger_fd<T, F>(f: F, z: &[C<T>], m: usize, h: T) -> Result<(C<T>, C<T>)>
where
    T: Real,
    F: Fn(&[C<T>]) -> C<T>,
{
    if !(h.finite() && h > T::zero()) {
        return Err(domain(format!("finite-difference step must be positive, got {h}")));
    }
    if m >= z.len() {
        return Err(domain(format!("component index {m} out of range for l={}", z.len())));
    }
    let mut probe = z.to_vec();
    let base = z[m];
    let mut eval = |shift: C<T>| {
        probe[m] = base + shift;
        f(&probe)
    };
    let zero = T::zero();
    let two_h = h + h;
    let dx = (eval(C::new(h, zero)) - eval(C::new(-h, zero))) / two_h;
    let dy = (eval(C::new(zero, h)) - eval(C::new(zero, -h))) / two_h;
    let i = C::new(zero, T::one());
    let half = T::lit(0.5);
    let dz = (dx - i * dy) * half;
    let dzbar = (dx + i * dy) * half;
    if !(cabs(dz).finite() && cabs(dzbar).finite()) {
        return Err(crate::Error::Numerical(format!(
            "non-finite Wirtinger derivative in component {m}"
        )));
    }
    Ok((dz, dzbar))
}
