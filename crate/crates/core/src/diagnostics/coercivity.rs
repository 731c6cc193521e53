use serde::{Deserialize, Serialize};

use super::{DiagnosticsRecord, Thresholds};
use crate::error::{domain, Result};
use crate::scalar::Real;

/// Smaller root of `2E₀ − r + 2 C_opt r^{d/(d−4)}` on `[0, K_psi]`.
///
/// Any state with energy `E₀` whose kinetic energy starts below this root
/// keeps it below for all time, since `E ≥ K/2 − C_opt K^{d/(d−4)}`.
/// Returns `None` unless `0 ≤ E₀ < E_psi`.
pub fn trapping_root(e0: f64, thresholds: &Thresholds) -> Option<f64> {
    if !(e0 >= 0.0 && e0 < thresholds.e_psi) {
        return None;
    }
    let q = thresholds.d as f64 / (thresholds.d as f64 - 4.0);
    let g = |r: f64| 2.0 * e0 - r + 2.0 * thresholds.c_opt * r.powf(q);
    let (mut lo, mut hi) = (0.0, thresholds.k_psi);
    if g(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Constants of the trapping estimates, computed from the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityConstants {
    pub e0: f64,
    pub k0: f64,
    /// `E₀ = (1 − δ) E_psi`.
    pub delta: f64,
    /// `K(t) ≤ (1 − δ̃₁) K_psi` for all `t`.
    pub delta_tilde: f64,
    /// `δ′ = 1 − (1 − δ̃₁)^{2/(d−4)}`.
    pub delta_prime: f64,
    pub d: usize,
}

impl CoercivityConstants {
    /// Requires sub-threshold data: `0 ≤ E₀ < E_psi` and `K₀ < K_psi`.
    pub fn from_data(e0: f64, k0: f64, thresholds: &Thresholds) -> Result<Self> {
        if !(k0 < thresholds.k_psi) {
            return Err(domain(format!(
                "coercivity needs K(u0) < K_psi (K0={k0}, K_psi={})",
                thresholds.k_psi
            )));
        }
        let root = trapping_root(e0, thresholds).ok_or_else(|| {
            domain(format!(
                "coercivity needs 0 <= E(u0) < E_psi (E0={e0}, E_psi={})",
                thresholds.e_psi
            ))
        })?;
        let trapped = root / thresholds.k_psi;
        let d = thresholds.d as f64;
        Ok(Self {
            e0,
            k0,
            delta: 1.0 - e0 / thresholds.e_psi,
            delta_tilde: 1.0 - trapped,
            delta_prime: 1.0 - trapped.powf(2.0 / (d - 4.0)),
            d: thresholds.d,
        })
    }

    /// Floor `δ′ K(u₀)` for `K − (2d/(d−4)) P`.
    pub fn coercivity_floor(&self) -> f64 {
        self.delta_prime * self.k0
    }

    /// Bounds on `E/K` from the trapping argument.
    pub fn energy_ratio_bounds(&self, thresholds: &Thresholds) -> (f64, f64) {
        let d = self.d as f64;
        let lower = 2.0 / d * (1.0 + (d - 2.0) / d * self.delta_prime);
        let upper = 1.0
            + 2.0 * thresholds.c_opt * ((1.0 - self.delta_tilde) * thresholds.k_psi).powf(4.0 / (d - 4.0));
        (lower, upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub t: f64,
    /// `K(u(t)) < K_psi`.
    pub trapped: bool,
    /// `1 − K/K_psi`.
    pub margin: f64,
    /// `K − (2d/(d−4)) P`.
    pub coercivity: f64,
    /// `δ′ K(u₀)`.
    pub floor: f64,
    pub coercive: bool,
    /// `E/K` and its bounds.
    pub energy_ratio: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    pub comparable: bool,
}

pub fn coercivity_margins<T: Real>(
    record: &DiagnosticsRecord<T>,
    thresholds: &Thresholds,
    constants: &CoercivityConstants,
) -> CoercivityReport {
    let k = record.kinetic.to_f64_lossy();
    let e = record.energy.to_f64_lossy();
    let coercivity = record.coercivity.to_f64_lossy();
    let floor = constants.coercivity_floor();
    let ratio = if k > 0.0 { e / k } else { f64::NAN };
    let (lo, hi) = constants.energy_ratio_bounds(thresholds);
    CoercivityReport {
        t: record.t.to_f64_lossy(),
        trapped: k < thresholds.k_psi,
        margin: 1.0 - k / thresholds.k_psi,
        coercivity,
        floor,
        coercive: coercivity >= floor,
        energy_ratio: ratio,
        ratio_lower: lo,
        ratio_upper: hi,
        comparable: ratio >= lo && ratio <= hi,
    }
}
