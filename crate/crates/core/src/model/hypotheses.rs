//! Sampled audit of the structural hypotheses on `(F, f)`.
//!
//! Every hypothesis is turned into a pointwise residual that vanishes when the
//! hypothesis holds; residuals are normalised by the natural growth of the
//! quantity involved so that a single tolerance applies across scales.

use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_step, wirtinger_fd, NonlinearityModel};
use crate::error::{domain, Result};
use crate::scalar::{cabs, cfinite, cis, Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Pass,
    Fail,
    Skipped,
}

/// Outcome for one hypothesis or derived identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub status: EntryStatus,
    /// Worst normalised residual over the sample set.
    pub residual: f64,
    /// Sample attaining the worst residual.
    #[serde(with = "crate::literal::complex_vec")]
    pub witness: Vec<Complex<f64>>,
    /// Auxiliary sampled parameter at the witness (`λ` or `θ`), if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    /// Sampled constant for bound-type hypotheses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub model: String,
    pub d: usize,
    pub l: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.status != EntryStatus::Fail)
    }

    pub fn entry(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Names of the report entries, in report order.
pub const ENTRY_NAMES: [&str; 11] = [
    "H1",
    "H2",
    "H3",
    "H4",
    "H5",
    "H6",
    "H7",
    "growth_bound",
    "gauge_covariance",
    "real_part_identity",
    "gauge_imaginary_identity",
];

const SAMPLED: usize = ENTRY_NAMES.len() - 1;
const FIXED_LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

struct Sample<T> {
    z: Vec<C<T>>,
    zp: Vec<C<T>>,
    theta: T,
    lambda: T,
    lambda_fixed: T,
    real: Vec<T>,
    cone: Vec<T>,
}

/// Per-sample outcome of one sampled entry.
#[derive(Clone, Copy)]
struct Cell {
    residual: f64,
    parameter: Option<f64>,
    statistic: Option<f64>,
    failed: bool,
}

impl Cell {
    fn ok(residual: f64) -> Self {
        Self {
            residual,
            parameter: None,
            statistic: None,
            failed: !residual.is_finite(),
        }
    }
    fn with_param(mut self, p: f64) -> Self {
        self.parameter = Some(p);
        self
    }
    fn with_stat(mut self, s: f64) -> Self {
        self.statistic = Some(s);
        self.failed |= !s.is_finite();
        self
    }
    fn broken() -> Self {
        Self {
            residual: f64::INFINITY,
            parameter: None,
            statistic: None,
            failed: true,
        }
    }
}

fn draw_point<T: Real>(rng: &mut ChaCha8Rng, l: usize) -> Vec<C<T>> {
    (0..l)
        .map(|_| {
            let r: f64 = 1.5 * rng.gen::<f64>();
            let phase: f64 = std::f64::consts::TAU * rng.gen::<f64>();
            C::new(T::lit(r * phase.cos()), T::lit(r * phase.sin()))
        })
        .collect()
}

fn draw_samples<T: Real>(l: usize, count: usize, seed: u64) -> Vec<Sample<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut z = draw_point::<T>(&mut rng, l);
            // Exercise the coordinate axes and faces of ℂˡ.
            if l > 1 && i % 17 == 3 {
                z[i % l] = C::new(T::zero(), T::zero());
            }
            let zp = draw_point::<T>(&mut rng, l);
            let theta = T::lit(std::f64::consts::TAU * (rng.gen::<f64>() - 0.5) * 2.0);
            let lambda = T::lit((rng.gen::<f64>() * 2.0 - 1.0) * std::f64::consts::LN_10).exp();
            let real = (0..l)
                .map(|_| T::lit(3.0 * (rng.gen::<f64>() - 0.5)))
                .collect();
            let cone = (0..l).map(|_| T::lit(1.5 * rng.gen::<f64>())).collect();
            Sample {
                z,
                zp,
                theta,
                lambda,
                lambda_fixed: T::lit(FIXED_LAMBDAS[i % FIXED_LAMBDAS.len()]),
                real,
                cone,
            }
        })
        .collect()
}

fn relative_step<T: Real>(z: &[C<T>]) -> T {
    let norm = z.iter().map(|c| c.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
    if norm > T::zero() {
        T::lit(1e-4) * norm
    } else {
        default_step(z)
    }
}

fn to_f64_vec<T: Real>(z: &[C<T>]) -> Vec<Complex<f64>> {
    z.iter()
        .map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy()))
        .collect()
}

fn real_point<T: Real>(y: &[T]) -> Vec<C<T>> {
    y.iter().map(|&v| C::new(v, T::zero())).collect()
}

struct Evaluator<'a, T: Real> {
    model: &'a NonlinearityModel<T>,
    deg: T,
    p_lip: T,
    growth: T,
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn f(&self, z: &[C<T>]) -> Vec<C<T>> {
        let mut out = vec![C::new(T::zero(), T::zero()); z.len()];
        self.model.forcing(z, &mut out);
        out
    }

    fn potential(&self, z: &[C<T>]) -> C<T> {
        self.model.potential(z)
    }

    fn norm1(z: &[C<T>]) -> T {
        z.iter().map(|&c| cabs(c)).fold(T::zero(), |a, b| a + b)
    }

    /// Normalisation for quantities homogeneous of degree `deg`.
    fn scale_potential(&self, z: &[C<T>]) -> T {
        Self::norm1(z).max(T::one()).powf(self.deg)
    }

    /// Normalisation for quantities homogeneous of degree `deg − 1`.
    fn scale_forcing(&self, z: &[C<T>]) -> T {
        Self::norm1(z).max(T::one()).powf(self.deg - T::one())
    }

    /// Sampled H2 quotient at the pair `(z, z')`.
    fn lipschitz_quotient(&self, z: &[C<T>], zp: &[C<T>]) -> Result<T> {
        let l = z.len();
        // Steps proportional to |z| make the quotient exactly dilation
        // covariant, so the drift measures the model rather than the stencil.
        let hz = relative_step(z);
        let hzp = relative_step(zp);
        let rhs = z
            .iter()
            .zip(zp)
            .map(|(&a, &b)| cabs(a - b).powf(self.p_lip))
            .fold(T::zero(), |a, b| a + b);
        let mut worst = T::zero();
        for k in 0..l {
            let fk = |v: &[C<T>]| self.f(v)[k];
            for m in 0..l {
                let (dz, dzb) = wirtinger_fd(fk, z, m, hz)?;
                let (dzp, dzbp) = wirtinger_fd(fk, zp, m, hzp)?;
                let lhs = cabs(dz - dzp) + cabs(dzb - dzbp);
                if lhs > T::zero() {
                    worst = worst.max(lhs / rhs);
                }
            }
        }
        Ok(worst)
    }

    fn growth_quotient(&self, z: &[C<T>]) -> T {
        let den = z
            .iter()
            .map(|&c| cabs(c).powf(self.growth))
            .fold(T::zero(), |a, b| a + b);
        let num = self
            .f(z)
            .iter()
            .map(|&c| cabs(c))
            .fold(T::zero(), |a, b| a.max(b));
        if den == T::zero() {
            T::zero()
        } else {
            num / den
        }
    }

    fn relative_change(a: T, b: T) -> T {
        let s = a.magnitude().max(b.magnitude());
        if s == T::zero() {
            T::zero()
        } else {
            (a - b).magnitude() / s
        }
    }

    /// Runs every sampled check at `s`; a failure in one check only marks that entry.
    fn evaluate(&self, s: &Sample<T>) -> [Cell; SAMPLED] {
        let guard = |check: &dyn Fn() -> Result<Cell>| {
            catch_unwind(AssertUnwindSafe(check))
                .ok()
                .and_then(|r| r.ok())
                .unwrap_or_else(Cell::broken)
        };
        [
            guard(&|| self.check_h2(s)),
            guard(&|| self.check_h3(s)),
            guard(&|| self.check_h4(s)),
            guard(&|| self.check_h5(s)),
            guard(&|| self.check_h6(s)),
            guard(&|| self.check_h7(s)),
            guard(&|| self.check_growth(s)),
            guard(&|| self.check_covariance(s)),
            guard(&|| self.check_identities(s).map(|(re, _)| re)),
            guard(&|| self.check_identities(s).map(|(_, im)| im)),
        ]
    }

    fn forcing_at(&self, z: &[C<T>]) -> Result<Vec<C<T>>> {
        let fz = self.f(z);
        if fz.iter().all(|&c| cfinite(c)) {
            Ok(fz)
        } else {
            Err(crate::Error::Numerical("evaluator returned non-finite value".into()))
        }
    }

    fn potential_at(&self, z: &[C<T>]) -> Result<C<T>> {
        let p = self.potential(z);
        if cfinite(p) {
            Ok(p)
        } else {
            Err(crate::Error::Numerical("evaluator returned non-finite value".into()))
        }
    }

    /// The sampled constant must be finite and homogeneous of degree zero.
    fn check_h2(&self, s: &Sample<T>) -> Result<Cell> {
        let two = T::lit(2.0);
        let q = self.lipschitz_quotient(&s.z, &s.zp)?;
        let z2: Vec<C<T>> = s.z.iter().map(|&c| c * two).collect();
        let zp2: Vec<C<T>> = s.zp.iter().map(|&c| c * two).collect();
        let q2 = self.lipschitz_quotient(&z2, &zp2)?;
        Ok(Cell::ok(Self::relative_change(q, q2).to_f64_lossy()).with_stat(q.to_f64_lossy()))
    }

    /// `f_k = ∂F/∂z̄_k + conj(∂F/∂z_k)`.
    fn check_h3(&self, s: &Sample<T>) -> Result<Cell> {
        let z = &s.z;
        let fz = self.forcing_at(z)?;
        self.potential_at(z)?;
        let sf = self.scale_forcing(z);
        let h = default_step(z);
        let mut worst = T::zero();
        for k in 0..z.len() {
            let (dz, dzb) = wirtinger_fd(|v: &[C<T>]| self.potential(v), z, k, h)?;
            worst = worst.max(cabs(fz[k] - (dzb + dz.conj())) / sf);
        }
        Ok(Cell::ok(worst.to_f64_lossy()))
    }

    /// Gauge invariance of `Re F`.
    fn check_h4(&self, s: &Sample<T>) -> Result<Cell> {
        let z = &s.z;
        let pot = self.potential_at(z)?;
        let rotated: Vec<C<T>> = z
            .iter()
            .zip(self.model.sigma())
            .map(|(&c, &sig)| c * cis(sig * s.theta))
            .collect();
        let r = (self.potential_at(&rotated)?.re - pot.re).magnitude() / self.scale_potential(z);
        Ok(Cell::ok(r.to_f64_lossy()).with_param(s.theta.to_f64_lossy()))
    }

    /// Homogeneity at a fixed and a random dilation.
    fn check_h5(&self, s: &Sample<T>) -> Result<Cell> {
        let z = &s.z;
        let pot = self.potential_at(z)?;
        let homog = |lam: T| -> Result<T> {
            let scaled: Vec<C<T>> = z.iter().map(|&c| c * lam).collect();
            let lhs = self.potential_at(&scaled)?;
            let rhs = pot * lam.powf(self.deg);
            let den = (lam * Self::norm1(z)).powf(self.deg);
            Ok(if den == T::zero() {
                cabs(lhs - rhs)
            } else {
                cabs(lhs - rhs) / den
            })
        };
        let (r_fixed, r_rand) = (homog(s.lambda_fixed)?, homog(s.lambda)?);
        Ok(if r_fixed >= r_rand {
            Cell::ok(r_fixed.to_f64_lossy()).with_param(s.lambda_fixed.to_f64_lossy())
        } else {
            Cell::ok(r_rand.to_f64_lossy()).with_param(s.lambda.to_f64_lossy())
        })
    }

    /// Pointwise form `|Re F(z)| ≤ F(|z_1|, …, |z_l|)`.
    fn check_h6(&self, s: &Sample<T>) -> Result<Cell> {
        let z = &s.z;
        let pot = self.potential_at(z)?;
        let moduli: Vec<C<T>> = z.iter().map(|&c| C::new(cabs(c), T::zero())).collect();
        let f_mod = self.potential_at(&moduli)?;
        let r = ((pot.re.magnitude() - f_mod.re).max(T::zero()) + f_mod.im.magnitude())
            / self.scale_potential(z);
        Ok(Cell::ok(r.to_f64_lossy()))
    }

    /// `F` real on ℝˡ and `f_k ≥ 0` on the closed positive cone.
    fn check_h7(&self, s: &Sample<T>) -> Result<Cell> {
        let y = real_point(&s.real);
        let real = self.potential_at(&y)?.im.magnitude() / self.scale_potential(&y);
        let cone = real_point(&s.cone);
        let sc = self.scale_forcing(&cone);
        let positive = self
            .forcing_at(&cone)?
            .iter()
            .map(|c| ((-c.re).max(T::zero()) + c.im.magnitude()) / sc)
            .fold(T::zero(), |a, b| a.max(b));
        Ok(Cell::ok(real.max(positive).to_f64_lossy()))
    }

    /// `|f(z)| ≲ Σ |z_m|^{(d+4)/(d−4)}`: finite and dilation invariant.
    fn check_growth(&self, s: &Sample<T>) -> Result<Cell> {
        let two = T::lit(2.0);
        self.forcing_at(&s.z)?;
        let z2: Vec<C<T>> = s.z.iter().map(|&c| c * two).collect();
        self.forcing_at(&z2)?;
        let g = self.growth_quotient(&s.z);
        let g2 = self.growth_quotient(&z2);
        Ok(Cell::ok(Self::relative_change(g, g2).to_f64_lossy()).with_stat(g.to_f64_lossy()))
    }

    /// `f_k(e^{iσθ/2} z) = e^{iσ_kθ/2} f_k(z)`.
    fn check_covariance(&self, s: &Sample<T>) -> Result<Cell> {
        let z = &s.z;
        let fz = self.forcing_at(z)?;
        let sigma = self.model.sigma();
        let half = T::lit(0.5);
        let rotated: Vec<C<T>> = z
            .iter()
            .zip(sigma)
            .map(|(&c, &sig)| c * cis(sig * s.theta * half))
            .collect();
        let f_rot = self.forcing_at(&rotated)?;
        let sf = self.scale_forcing(z);
        let mut worst = T::zero();
        for k in 0..z.len() {
            let expected = fz[k] * cis(sigma[k] * s.theta * half);
            worst = worst.max(cabs(f_rot[k] - expected) / sf);
        }
        Ok(Cell::ok(worst.to_f64_lossy()).with_param(s.theta.to_f64_lossy()))
    }

    /// `Re Σ f_k z̄_k = (2d/(d−4)) Re F` and `Im Σ (α_k/γ_k) f_k z̄_k = 0`.
    fn check_identities(&self, s: &Sample<T>) -> Result<(Cell, Cell)> {
        let z = &s.z;
        let params = self.model.params();
        let fz = self.forcing_at(z)?;
        let pot = self.potential_at(z)?;
        let sp = self.scale_potential(z);
        let mut pairing = C::new(T::zero(), T::zero());
        let mut weighted = C::new(T::zero(), T::zero());
        for k in 0..z.len() {
            let term = fz[k] * z[k].conj();
            pairing += term;
            weighted += term * (params.alpha()[k] / params.gamma()[k]);
        }
        let re_id = (pairing.re - self.deg * pot.re).magnitude() / sp;
        let im_id = weighted.im.magnitude() / sp;
        Ok((Cell::ok(re_id.to_f64_lossy()), Cell::ok(im_id.to_f64_lossy())))
    }
}

/// Audits H1–H7 and the derived identities on `sample_count` seeded samples.
///
/// An entry passes only when its worst residual over every sample is at most
/// `tol`. Evaluators that panic or return non-finite values fail every
/// sampled entry at the offending sample.
pub fn check_hypotheses<T: Real>(
    model: &NonlinearityModel<T>,
    sample_count: usize,
    tol: f64,
    seed: u64,
) -> Result<HypothesisReport> {
    if sample_count == 0 {
        return Err(domain("sample_count must be at least 1"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let params = model.params();
    let l = params.l();
    let eval = Evaluator {
        model,
        deg: params.deg(),
        p_lip: params.p_crit(),
        growth: params.growth_exp(),
    };

    let zero = vec![C::new(T::zero(), T::zero()); l];
    let h1 = match catch_unwind(AssertUnwindSafe(|| eval.f(&zero))) {
        Ok(f0) => {
            let r = f0.iter().map(|&c| cabs(c)).fold(T::zero(), |a, b| a.max(b));
            let r = if f0.iter().all(|&c| cfinite(c)) {
                r.to_f64_lossy()
            } else {
                f64::INFINITY
            };
            Cell::ok(r)
        }
        Err(_) => Cell::broken(),
    };

    let samples = draw_samples::<T>(l, sample_count, seed);
    let cells: Vec<[Cell; SAMPLED]> = samples
        .par_iter()
        .map(|s| eval.evaluate(s))
        .collect();

    let mut entries = Vec::with_capacity(ENTRY_NAMES.len());
    entries.push(finish_entry("H1", h1, 0, &zero, tol, None, "exact evaluation at z = 0"));
    for (j, name) in ENTRY_NAMES.iter().enumerate().skip(1) {
        let col = j - 1;
        // Earliest sample wins ties so that reports are deterministic.
        let (mut worst_i, mut worst) = (0usize, cells[0][col]);
        let mut stat = cells[0][col].statistic;
        for (i, row) in cells.iter().enumerate() {
            let c = row[col];
            if let (Some(a), Some(b)) = (stat, c.statistic) {
                stat = Some(if b.is_nan() || b > a { b } else { a });
            }
            let worse = (c.failed && !worst.failed)
                || (c.failed == worst.failed && c.residual > worst.residual);
            if worse {
                worst_i = i;
                worst = c;
            }
        }
        worst.statistic = stat;
        let note = match *name {
            "H2" => Some("sampled constant over independent pairs; residual is its dilation drift"),
            "H6" => Some("pointwise sufficient condition |Re F(z)| <= F(|z|)"),
            "growth_bound" => Some("sampled constant in |f(z)| <= C sum |z_m|^((d+4)/(d-4))"),
            _ => None,
        };
        let witness: Vec<C<T>> = match *name {
            "H7" => real_point(&samples[worst_i].real),
            _ => samples[worst_i].z.clone(),
        };
        entries.push(finish_entry(name, worst, worst_i, &witness, tol, note, ""));
    }

    Ok(HypothesisReport {
        model: model.name(),
        d: params.d(),
        l,
        samples: sample_count,
        tolerance: tol,
        seed,
        entries,
    })
}

fn finish_entry<T: Real>(
    name: &str,
    cell: Cell,
    _index: usize,
    witness: &[C<T>],
    tol: f64,
    note: Option<&str>,
    fallback_note: &str,
) -> HypothesisEntry {
    let pass = !cell.failed && cell.residual.is_finite() && cell.residual <= tol;
    let note = note
        .map(str::to_string)
        .or_else(|| (!fallback_note.is_empty()).then(|| fallback_note.to_string()));
    let note = if cell.failed {
        Some("evaluator failed or returned a non-finite value".to_string())
    } else {
        note
    };
    HypothesisEntry {
        name: name.to_string(),
        status: if pass { EntryStatus::Pass } else { EntryStatus::Fail },
        residual: cell.residual,
        witness: to_f64_vec(witness),
        parameter: cell.parameter,
        statistic: cell.statistic,
        note,
    }
}
