//! Refractive-index models, the quasi-phase-matching grating and the
//! backward phase-mismatch bookkeeping.
//!
//! In the backward geometry a forward pump photon (polarized along y, i.e. H)
//! generates a forward signal (y / H) and a backward idler (z / V). The
//! counterpropagating idler wavevector enters the mismatch with opposite
//! sign, so
//!
//! Δk = k_p − k_s + k_i − 2πm/Λ,
//!
//! with k = 2πn(λ)/λ per wave and the m-th reciprocal vector of the poling
//! period Λ compensating the large residual. The sign convention for the
//! backward idler follows standard backward-wave parametric theory.
//!
//! Coefficient sets are named fixtures: a flat toy model with closed-form
//! roots, and a published bulk-KTP Sellmeier set for realism. The effective
//! modal indices of a real waveguide are device data and ship as config.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Refractive index as a function of vacuum wavelength.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexFn {
    /// Wavelength-independent index.
    Constant { n: f64 },
    /// Two-pole Sellmeier form with λ in µm:
    /// n² = a + b1/(λ² − c1) + b2/(λ² − c2).
    Sellmeier {
        a: f64,
        b1: f64,
        c1: f64,
        b2: f64,
        c2: f64,
    },
}

impl IndexFn {
    /// Index at vacuum wavelength `lambda_m` (meters).
    pub fn n(&self, lambda_m: f64) -> f64 {
        match self {
            IndexFn::Constant { n } => *n,
            IndexFn::Sellmeier { a, b1, c1, b2, c2 } => {
                let l2 = (lambda_m * 1e6).powi(2);
                (a + b1 / (l2 - c1) + b2 / (l2 - c2)).sqrt()
            }
        }
    }
}

/// Per-polarization index functions for the crystal y (H) and z (V) axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionModel {
    pub name: String,
    pub n_y: IndexFn,
    pub n_z: IndexFn,
    /// Validity window in meters.
    pub valid_min_m: f64,
    pub valid_max_m: f64,
}

impl DispersionModel {
    /// Flat toy model, n_y = n_z = n. With n = 1.8, Λ = 1.3 µm and m = 3 the
    /// degeneracy root is exactly nΛ/m = 780 nm.
    pub fn flat(n: f64) -> Self {
        DispersionModel {
            name: "flat".into(),
            n_y: IndexFn::Constant { n },
            n_z: IndexFn::Constant { n },
            valid_min_m: 0.2e-6,
            valid_max_m: 5e-6,
        }
    }

    /// Bulk-KTP Sellmeier coefficients (Kato & Takaoka 2002, λ in µm).
    pub fn ktp() -> Self {
        DispersionModel {
            name: "ktp".into(),
            n_y: IndexFn::Sellmeier {
                a: 3.45018,
                b1: 0.04341,
                c1: 0.04597,
                b2: 16.98825,
                c2: 39.43799,
            },
            n_z: IndexFn::Sellmeier {
                a: 4.59423,
                b1: 0.06206,
                c1: 0.04763,
                b2: 110.80672,
                c2: 86.12171,
            },
            valid_min_m: 0.4e-6,
            valid_max_m: 3.5e-6,
        }
    }

    /// Built-in fixture by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "flat" => Ok(Self::flat(1.8)),
            "ktp" => Ok(Self::ktp()),
            other => Err(Error::Config(format!(
                "unknown dispersion set '{other}' (built-ins: flat, ktp)"
            ))),
        }
    }

    pub fn check_wavelength(&self, lambda_m: f64) -> Result<()> {
        if lambda_m < self.valid_min_m || lambda_m > self.valid_max_m {
            return Err(Error::Data(format!(
                "wavelength {:.1} nm outside dispersion validity window [{:.0}, {:.0}] nm",
                lambda_m * 1e9,
                self.valid_min_m * 1e9,
                self.valid_max_m * 1e9
            )));
        }
        Ok(())
    }
}

/// Periodically poled grating: period Λ, QPM order m, interaction length L.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpmGrating {
    /// Poling period Λ, meters.
    pub period_m: f64,
    /// QPM order m (the experiment uses the third order of a 1.3 µm period).
    pub order: u32,
    /// Interaction length L, meters.
    pub length_m: f64,
}

impl QpmGrating {
    pub fn new(period_m: f64, order: u32, length_m: f64) -> Result<Self> {
        if period_m <= 0.0 || length_m <= 0.0 || order == 0 {
            return Err(Error::Config(format!(
                "invalid grating: period {period_m} m, order {order}, length {length_m} m"
            )));
        }
        Ok(QpmGrating {
            period_m,
            order,
            length_m,
        })
    }

    /// Reciprocal vector G_m = 2πm/Λ, rad/m.
    pub fn reciprocal(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.order as f64 / self.period_m
    }
}

/// Idler wavelength from energy conservation, 1/λ_i = 1/λ_p − 1/λ_s.
pub fn idler_wavelength(lambda_p: f64, lambda_s: f64) -> Result<f64> {
    if lambda_s <= lambda_p {
        return Err(Error::Data(format!(
            "no idler solution: signal {:.2} nm not longer than pump {:.2} nm",
            lambda_s * 1e9,
            lambda_p * 1e9
        )));
    }
    Ok(1.0 / (1.0 / lambda_p - 1.0 / lambda_s))
}

/// Backward phase mismatch Δk = k_p − k_s + k_i − 2πm/Λ in rad/m, with the
/// type-II assignment n_y for pump and signal, n_z for the backward idler.
pub fn backward_mismatch(
    disp: &DispersionModel,
    grating: &QpmGrating,
    lambda_p: f64,
    lambda_s: f64,
) -> Result<f64> {
    let lambda_i = idler_wavelength(lambda_p, lambda_s)?;
    disp.check_wavelength(lambda_p)?;
    disp.check_wavelength(lambda_s)?;
    disp.check_wavelength(lambda_i)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let k_p = two_pi * disp.n_y.n(lambda_p) / lambda_p;
    let k_s = two_pi * disp.n_y.n(lambda_s) / lambda_s;
    let k_i = two_pi * disp.n_z.n(lambda_i) / lambda_i;
    Ok(k_p - k_s + k_i - grating.reciprocal())
}

/// Mismatch at frequency degeneracy, Δk(λ_p, 2λ_p).
pub fn degenerate_mismatch(
    disp: &DispersionModel,
    grating: &QpmGrating,
    lambda_p: f64,
) -> Result<f64> {
    backward_mismatch(disp, grating, lambda_p, 2.0 * lambda_p)
}

/// Pump wavelength where the degenerate process is phase matched,
/// Δk(λ_p, 2λ_p) = 0, found by bracketed bisection to 1e-15 m.
pub fn solve_degeneracy(disp: &DispersionModel, grating: &QpmGrating) -> Result<f64> {
    let lo = disp.valid_min_m.max(0.3e-6);
    let hi = (disp.valid_max_m / 2.0).min(1.5e-6);
    if lo >= hi {
        return Err(Error::Numerical("empty degeneracy search window".into()));
    }
    // Scan for a sign change, then bisect.
    let n_scan = 800;
    let f = |lp: f64| degenerate_mismatch(disp, grating, lp);
    let mut prev = None;
    for i in 0..=n_scan {
        let lp = lo + (hi - lo) * i as f64 / n_scan as f64;
        let v = match f(lp) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if let Some((lp0, v0)) = prev {
            if v0 * v <= 0.0 {
                return bisect(&f, lp0, v0, lp, v);
            }
        }
        prev = Some((lp, v));
    }
    Err(Error::Numerical(
        "no sign change of Δk found in the degeneracy search window".into(),
    ))
}

fn bisect<F>(f: &F, mut a: f64, mut fa: f64, mut b: f64, _fb: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        // Stop at machine precision: the midpoint stops moving.
        if mid == a || mid == b {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn grating() -> QpmGrating {
        QpmGrating::new(1.3e-6, 3, 10e-3).unwrap()
    }

    #[test]
    fn flat_dispersion_closed_form() {
        // n_y = n_z = n: Δk = 2πn(1/λp − 1/λs + 1/λi) − 2πm/Λ.
        let disp = DispersionModel::flat(1.8);
        let g = grating();
        let two_pi = 2.0 * std::f64::consts::PI;
        for (lp, ls) in [(0.78e-6, 1.56e-6), (0.76e-6, 1.5e-6), (0.80e-6, 1.7e-6)] {
            let li = idler_wavelength(lp, ls).unwrap();
            let expect = two_pi * 1.8 * (1.0 / lp - 1.0 / ls + 1.0 / li) - g.reciprocal();
            let got = backward_mismatch(&disp, &g, lp, ls).unwrap();
            assert_relative_eq!(got, expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn flat_degeneracy_root_closed_form() {
        // Root at λp = nΛ/m = 1.8 · 1.3 µm / 3 = 780 nm exactly.
        let disp = DispersionModel::flat(1.8);
        let g = grating();
        let root = solve_degeneracy(&disp, &g).unwrap();
        assert_relative_eq!(root, 1.8 * 1.3e-6 / 3.0, epsilon = 1e-12);
        assert!(degenerate_mismatch(&disp, &g, root).unwrap().abs() < 1e-6);
    }

    #[test]
    fn degenerate_wavelength_relation() {
        // 776.74 nm pump ↔ 1553.48 nm degenerate pair, exactly 2×.
        let lp = 776.74e-9;
        let li = idler_wavelength(lp, 2.0 * lp).unwrap();
        assert_abs_diff_eq!(li, 1553.48e-9, epsilon = 1e-18);
    }

    #[test]
    fn ktp_degeneracy_near_measured_point() {
        // Bulk coefficients cannot hit the waveguide's effective 776.74 nm
        // exactly; a small-nm neighborhood is the expectation.
        let disp = DispersionModel::ktp();
        let g = grating();
        let root = solve_degeneracy(&disp, &g).unwrap();
        assert!(
            (root - 776.74e-9).abs() < 15e-9,
            "root {:.2} nm too far from 776.74 nm",
            root * 1e9
        );
        assert!(degenerate_mismatch(&disp, &g, root).unwrap().abs() < 1e-6);
    }

    #[test]
    fn period_perturbation_shifts_root_monotonically() {
        let disp = DispersionModel::ktp();
        let g0 = grating();
        let g1 = QpmGrating::new(1.3e-6 * 1.001, 3, 10e-3).unwrap();
        let g2 = QpmGrating::new(1.3e-6 * 1.002, 3, 10e-3).unwrap();
        let r0 = solve_degeneracy(&disp, &g0).unwrap();
        let r1 = solve_degeneracy(&disp, &g1).unwrap();
        let r2 = solve_degeneracy(&disp, &g2).unwrap();
        assert!((r1 - r0) * (r2 - r1) > 0.0, "shift not monotone");
        assert!(r1 != r0);
    }

    #[test]
    fn rejects_signal_shorter_than_pump() {
        let disp = DispersionModel::flat(1.8);
        assert!(backward_mismatch(&disp, &grating(), 0.78e-6, 0.7e-6).is_err());
    }

    #[test]
    fn rejects_out_of_window() {
        let disp = DispersionModel::ktp();
        assert!(backward_mismatch(&disp, &grating(), 0.1e-6, 1.5e-6).is_err());
    }

    #[test]
    fn sellmeier_sanity() {
        // KTP near 1064 nm: n_y ≈ 1.745, n_z ≈ 1.830.
        let disp = DispersionModel::ktp();
        assert!((disp.n_y.n(1.064e-6) - 1.745).abs() < 0.01);
        assert!((disp.n_z.n(1.064e-6) - 1.830).abs() < 0.01);
        // Smoothness: finite central differences stay bounded.
        let h = 1e-10;
        for l in [0.8e-6, 1.2e-6, 1.6e-6] {
            let d = (disp.n_y.n(l + h) - disp.n_y.n(l - h)) / (2.0 * h);
            assert!(d.is_finite() && d.abs() < 1e6);
        }
    }
}
