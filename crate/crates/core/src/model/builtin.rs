use std::sync::Arc;

use super::Nonlinearity;
use crate::scalar::{Real, C};

/// `F(z) = (1/q) Σ_k |z_k|^q`, `f_k(z) = |z_k|^{q−2} z_k`.
///
/// With `q = 2d/(d−4)` this is the decoupled critical power, whose
/// normalisation `(d−4)/(2d) = 1/q`.
#[derive(Debug, Clone)]
pub struct PowerLaw<T> {
    l: usize,
    q: T,
}

impl<T: Real> PowerLaw<T> {
    pub fn new(l: usize, q: T) -> Self {
        Self { l, q }
    }

    #[inline]
    fn gain(&self, modulus_sq: T) -> T {
        if modulus_sq == T::zero() {
            T::zero()
        } else {
            modulus_sq.powf((self.q - T::lit(2.0)) / T::lit(2.0))
        }
    }
}

impl<T: Real> Nonlinearity<T> for PowerLaw<T> {
    fn name(&self) -> String {
        format!("power(q={})", self.q)
    }

    fn components(&self) -> usize {
        self.l
    }

    fn potential(&self, z: &[C<T>]) -> C<T> {
        let sum = z
            .iter()
            .map(|c| {
                let m2 = c.norm_sqr();
                m2 * self.gain(m2)
            })
            .fold(T::zero(), |a, b| a + b);
        C::new(sum / self.q, T::zero())
    }

    fn forcing(&self, z: &[C<T>], out: &mut [C<T>]) {
        for (o, c) in out.iter_mut().zip(z) {
            *o = c * self.gain(c.norm_sqr());
        }
    }

    fn gains(&self, moduli: &[T], out: &mut [T]) -> bool {
        for (o, &m) in out.iter_mut().zip(moduli) {
            *o = self.gain(m * m);
        }
        true
    }
}

/// `F ≡ 0`: the linear system.
#[derive(Debug, Clone)]
pub struct Free {
    l: usize,
}

impl Free {
    pub fn new(l: usize) -> Self {
        Self { l }
    }
}

impl<T: Real> Nonlinearity<T> for Free {
    fn name(&self) -> String {
        "free".to_string()
    }

    fn components(&self) -> usize {
        self.l
    }

    fn potential(&self, _z: &[C<T>]) -> C<T> {
        C::new(T::zero(), T::zero())
    }

    fn forcing(&self, _z: &[C<T>], out: &mut [C<T>]) {
        out.fill(C::new(T::zero(), T::zero()));
    }

    fn gains(&self, _moduli: &[T], out: &mut [T]) -> bool {
        out.fill(T::zero());
        true
    }
}

/// `F = (|z₁|⁴ + |z₂|⁴)/4 + (β/2)|z₁|²|z₂|²`.
#[derive(Debug, Clone)]
pub struct CoupledQuartic<T> {
    beta: T,
}

impl<T: Real> CoupledQuartic<T> {
    pub fn new(beta: T) -> Self {
        Self { beta }
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

impl<T: Real> Nonlinearity<T> for CoupledQuartic<T> {
    fn name(&self) -> String {
        format!("coupled(beta={})", self.beta)
    }

    fn components(&self) -> usize {
        2
    }

    fn potential(&self, z: &[C<T>]) -> C<T> {
        let a = z[0].norm_sqr();
        let b = z[1].norm_sqr();
        let quarter = T::lit(0.25);
        C::new(quarter * (a * a + b * b) + T::lit(0.5) * self.beta * a * b, T::zero())
    }

    fn forcing(&self, z: &[C<T>], out: &mut [C<T>]) {
        let a = z[0].norm_sqr();
        let b = z[1].norm_sqr();
        out[0] = z[0] * (a + self.beta * b);
        out[1] = z[1] * (b + self.beta * a);
    }

    fn gains(&self, moduli: &[T], out: &mut [T]) -> bool {
        let a = moduli[0] * moduli[0];
        let b = moduli[1] * moduli[1];
        out[0] = a + self.beta * b;
        out[1] = b + self.beta * a;
        true
    }
}

type PotentialFn<T> = dyn Fn(&[C<T>]) -> C<T> + Send + Sync;
type ForcingFn<T> = dyn Fn(&[C<T>], &mut [C<T>]) + Send + Sync;

/// User-supplied evaluators wrapped as a [`Nonlinearity`].
#[derive(Clone)]
pub struct FnModel<T> {
    name: String,
    l: usize,
    potential: Arc<PotentialFn<T>>,
    forcing: Arc<ForcingFn<T>>,
}

impl<T: Real> FnModel<T> {
    pub fn new(
        name: impl Into<String>,
        l: usize,
        potential: impl Fn(&[C<T>]) -> C<T> + Send + Sync + 'static,
        forcing: impl Fn(&[C<T>], &mut [C<T>]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            l,
            potential: Arc::new(potential),
            forcing: Arc::new(forcing),
        }
    }
}

impl<T: Real> Nonlinearity<T> for FnModel<T> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn components(&self) -> usize {
        self.l
    }

    fn potential(&self, z: &[C<T>]) -> C<T> {
        (self.potential)(z)
    }

    fn forcing(&self, z: &[C<T>], out: &mut [C<T>]) {
        (self.forcing)(z, out)
    }
}
