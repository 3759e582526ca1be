//! CHSH Bell-test computation: correlation coefficients from the four joint
//! counts of a setting pair, the S value with its standard deviation, the
//! quantum prediction, and a full simulated Bell experiment.
//!
//! The analyzer settings are the CHSH-optimal set a = σ_z, a′ = σ_x on one
//! arm and b, b′ = (σ_x ± σ_z)/√2 on the other; the operator combinations
//! are normalized to unit Bloch vectors since unnormalized sums are not
//! valid measurement directions.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::counts::{simulate_counts, CountsRecord, Setting};
use crate::polarization::{analyzer_ket, overlap, C64, Jones, PolState};
use crate::quantum::{kron2, NoiseModel, Rho};
use crate::{Error, Result};

/// Analyzer direction as a real unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PauliSetting {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PauliSetting {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!(
                "analyzer direction ({x}, {y}, {z}) is not a unit vector"
            )));
        }
        Ok(PauliSetting { x, y, z })
    }

    pub fn negated(self) -> Self {
        PauliSetting {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// a·σ as a 2×2 operator in the {H, V} basis.
    pub fn operator(&self) -> Jones {
        Matrix2::new(
            C64::new(self.z, 0.0),
            C64::new(self.x, -self.y),
            C64::new(self.x, self.y),
            C64::new(-self.z, 0.0),
        )
    }

    /// The +1 eigenstate of a·σ.
    pub fn plus_eigenstate(&self) -> PolState {
        // (I + a·σ)/2 is the rank-1 projector onto it.
        let p = (Matrix2::identity() + self.operator()) * C64::new(0.5, 0.0);
        // Extract the dominant column and normalize.
        let c0 = nalgebra::Vector2::new(p[(0, 0)], p[(1, 0)]);
        let c1 = nalgebra::Vector2::new(p[(0, 1)], p[(1, 1)]);
        let v = if c0.norm() >= c1.norm() { c0 } else { c1 };
        v / C64::new(v.norm(), 0.0)
    }

    /// Analyzer waveplate angles `(qwp, hwp)` realizing the +outcome port.
    ///
    /// The fixture table covers the directions a Bell test needs: vectors in
    /// the x–z plane are linear polarizations (QWP at 0, HWP at
    /// atan2(x, z)/4); the ±y poles are the circular ports.
    pub fn analyzer_angles(&self) -> Result<(f64, f64)> {
        use std::f64::consts::FRAC_PI_4;
        if self.y.abs() < 1e-9 {
            Ok((0.0, self.x.atan2(self.z) / 4.0))
        } else if (self.y.abs() - 1.0).abs() < 1e-9 {
            // σ_y eigenstates are the circular polarizations; +y is |L⟩ in
            // this convention, analyzed with the QWP at −45° (the HWP at 0°
            // in the stack flips handedness, see `Label::analyzer_angles`).
            Ok((if self.y > 0.0 { -FRAC_PI_4 } else { FRAC_PI_4 }, 0.0))
        } else {
            Err(Error::Data(
                "analyzer mapping table covers x–z plane and ±y directions only".into(),
            ))
        }
    }
}

/// The four setting pairs of the Bell test, in the order
/// (a,b), (a,b′), (a′,b), (a′,b′).
pub fn methods_settings() -> [(PauliSetting, PauliSetting); 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = PauliSetting::new(0.0, 0.0, 1.0).unwrap();
    let ap = PauliSetting::new(1.0, 0.0, 0.0).unwrap();
    let b = PauliSetting::new(s, 0.0, s).unwrap();
    let bp = PauliSetting::new(s, 0.0, -s).unwrap();
    [(a, b), (a, bp), (ap, b), (ap, bp)]
}

/// Correlation coefficient from the four joint counts of one setting pair:
/// E = (C₊₊ − C₊₋ − C₋₊ + C₋₋)/ΣC, with its standard deviation from
/// first-order Poisson propagation.
pub fn correlation_e(
    counts_pp: u64,
    counts_pm: u64,
    counts_mp: u64,
    counts_mm: u64,
) -> Result<(f64, f64)> {
    let (pp, pm, mp, mm) = (
        counts_pp as f64,
        counts_pm as f64,
        counts_mp as f64,
        counts_mm as f64,
    );
    let total = pp + pm + mp + mm;
    if total <= 0.0 {
        return Err(Error::Data("zero total counts in correlation".into()));
    }
    let e = (pp - pm - mp + mm) / total;
    // ∂E/∂C±: (±1 − E)/total; variance of each C is the count itself.
    let var = ((1.0 - e).powi(2) * (pp + mm) + (1.0 + e).powi(2) * (pm + mp)) / total.powi(2);
    Ok((e, var.sqrt()))
}

/// CHSH result: the four correlation coefficients, S, its standard
/// deviation and the number of standard deviations of violation.
#[derive(Debug, Clone, Serialize)]
pub struct ChshResult {
    /// E values in the order (a,b), (a,b′), (a′,b), (a′,b′).
    pub e_values: [f64; 4],
    pub e_stds: [f64; 4],
    pub s: f64,
    pub std_s: f64,
    /// (|S| − 2)/std_S when std_S > 0.
    pub sigma_violation: f64,
}

/// S = |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)| with quadrature error.
pub fn chsh_s(pairs: [(f64, f64); 4]) -> ChshResult {
    let e = [pairs[0].0, pairs[1].0, pairs[2].0, pairs[3].0];
    let std = [pairs[0].1, pairs[1].1, pairs[2].1, pairs[3].1];
    let s = (e[0] - e[1] + e[2] + e[3]).abs();
    let std_s = std.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sigma_violation = if std_s > 0.0 { (s - 2.0) / std_s } else { f64::NAN };
    ChshResult {
        e_values: e,
        e_stds: std,
        s,
        std_s,
        sigma_violation,
    }
}

/// Quantum prediction E = Tr(ρ (a·σ ⊗ b·σ)) for analyzer directions a on
/// the R arm and b on the L arm.
pub fn predict_e(rho: &Rho, a: &PauliSetting, b: &PauliSetting) -> f64 {
    (rho * kron2(&a.operator(), &b.operator())).trace().re
}

/// Predicted S for the fixed Bell-test settings.
pub fn predict_s(rho: &Rho) -> f64 {
    let sets = methods_settings();
    let e: Vec<f64> = sets.iter().map(|(a, b)| predict_e(rho, a, b)).collect();
    (e[0] - e[1] + e[2] + e[3]).abs()
}

/// Simulate the full 16-measurement Bell experiment: four joint counts for
/// each of the four setting pairs, then E values and S.
pub fn run_bell_experiment(
    rho: &Rho,
    pair_rate_hz: f64,
    duration_s: f64,
    window_s: f64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<(ChshResult, Vec<CountsRecord>)> {
    let records = simulate_bell_counts(rho, pair_rate_hz, duration_s, window_s, noise, seed)?;
    let result = bell_from_records(&records)?;
    Ok((result, records))
}

/// The 16 measurement settings of the Bell test in record order: setting
/// pairs × sign combinations (++, +−, −+, −−).
pub fn bell_measurement_settings() -> Result<Vec<Setting>> {
    let mut out = Vec::with_capacity(16);
    for (a, b) in methods_settings() {
        for (sa, sb) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let va = if sa > 0 { a } else { a.negated() };
            let vb = if sb > 0 { b } else { b.negated() };
            let (qr, hr) = va.analyzer_angles()?;
            let (ql, hl) = vb.analyzer_angles()?;
            out.push(Setting {
                qwp_r: qr,
                hwp_r: hr,
                qwp_l: ql,
                hwp_l: hl,
            });
        }
    }
    Ok(out)
}

/// Simulate the 16 joint counts, one RNG stream per measurement.
pub fn simulate_bell_counts(
    rho: &Rho,
    pair_rate_hz: f64,
    duration_s: f64,
    window_s: f64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<CountsRecord>> {
    let settings = bell_measurement_settings()?;
    let mut records = Vec::with_capacity(16);
    for (i, setting) in settings.iter().enumerate() {
        records.push(simulate_counts(
            rho,
            setting,
            pair_rate_hz,
            duration_s,
            window_s,
            noise,
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64),
        )?);
    }
    Ok(records)
}

/// Analyze a 16-record Bell counts file. Records are identified by their
/// analyzer angles, so reordered files are accepted.
pub fn bell_from_records(records: &[CountsRecord]) -> Result<ChshResult> {
    if records.len() != 16 {
        return Err(Error::Data(format!(
            "a Bell test needs exactly 16 records, got {}",
            records.len()
        )));
    }
    let expected = bell_measurement_settings()?;
    let mut slots: Vec<Option<u64>> = vec![None; 16];
    for rec in records {
        let s = rec.setting();
        let kr = analyzer_ket(s.qwp_r, s.hwp_r);
        let kl = analyzer_ket(s.qwp_l, s.hwp_l);
        let mut matched = None;
        for (i, exp) in expected.iter().enumerate() {
            if slots[i].is_some() {
                continue;
            }
            let er = analyzer_ket(exp.qwp_r, exp.hwp_r);
            let el = analyzer_ket(exp.qwp_l, exp.hwp_l);
            if overlap(&kr, &er) > 1.0 - 1e-6 && overlap(&kl, &el) > 1.0 - 1e-6 {
                matched = Some(i);
                break;
            }
        }
        match matched {
            Some(i) => slots[i] = Some(rec.coincidences),
            None => {
                return Err(Error::Data(format!(
                    "record at angles ({}, {}, {}, {}) matches no Bell setting",
                    rec.qwp_r, rec.hwp_r, rec.qwp_l, rec.hwp_l
                )))
            }
        }
    }
    let counts: Vec<u64> = slots.into_iter().map(|s| s.unwrap()).collect();
    let mut pairs = [(0.0, 0.0); 4];
    for p in 0..4 {
        pairs[p] = correlation_e(
            counts[4 * p],
            counts[4 * p + 1],
            counts[4 * p + 2],
            counts[4 * p + 3],
        )?;
    }
    Ok(chsh_s(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{pure_density, singlet, werner_state};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::Matrix4;

    #[test]
    fn correlation_arithmetic() {
        let (e, _) = correlation_e(25, 75, 75, 25).unwrap();
        assert_abs_diff_eq!(e, -0.5, epsilon = 1e-12);
        let (e, _) = correlation_e(1000, 0, 0, 1000).unwrap();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-12);
        assert!(correlation_e(0, 0, 0, 0).is_err());
    }

    #[test]
    fn correlation_scale_invariant() {
        let (e1, _) = correlation_e(25, 75, 75, 25).unwrap();
        let (e2, _) = correlation_e(2500, 7500, 7500, 2500).unwrap();
        assert_abs_diff_eq!(e1, e2, epsilon = 1e-15);
    }

    #[test]
    fn correlation_std_matches_monte_carlo() {
        // First-order propagation vs a 10⁴-sample Monte-Carlo.
        use rand::SeedableRng;
        let (mu_pp, mu_pm, mu_mp, mu_mm) = (400.0, 100.0, 100.0, 400.0);
        let (_, std_analytic) =
            correlation_e(mu_pp as u64, mu_pm as u64, mu_mp as u64, mu_mm as u64).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut es = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            let c = [mu_pp, mu_pm, mu_mp, mu_mm]
                .map(|m| crate::counts::sample_poisson(m, &mut rng));
            if let Ok((e, _)) = correlation_e(c[0], c[1], c[2], c[3]) {
                es.push(e);
            }
        }
        let n = es.len() as f64;
        let mean = es.iter().sum::<f64>() / n;
        let var = es.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert_relative_eq!(var.sqrt(), std_analytic, max_relative = 0.10);
    }

    #[test]
    fn chsh_s_arithmetic() {
        // {−0.68, 0.68, −0.68, −0.68} → S = 2.72.
        let r = chsh_s([(-0.68, 0.0), (0.68, 0.0), (-0.68, 0.0), (-0.68, 0.0)]);
        assert_abs_diff_eq!(r.s, 2.72, epsilon = 1e-12);

        // S = 2.720 ± 0.039 violates by 18.46σ.
        let r = chsh_s([(2.720, 0.039), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert_abs_diff_eq!(r.s, 2.720, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sigma_violation, 18.4615, epsilon = 1e-3);
    }

    #[test]
    fn singlet_prediction_is_minus_dot_product() {
        let rho = pure_density(&singlet());
        for k in 0..20 {
            let t1 = 0.37 * k as f64;
            let t2 = 0.59 * k as f64 + 0.21;
            let a = PauliSetting::new(t1.sin(), 0.0, t1.cos()).unwrap();
            let b = PauliSetting::new(t2.sin(), 0.0, t2.cos()).unwrap();
            let dot = a.x * b.x + a.y * b.y + a.z * b.z;
            assert_abs_diff_eq!(predict_e(&rho, &a, &b), -dot, epsilon = 1e-10);
        }
    }

    #[test]
    fn maximally_mixed_no_correlation() {
        let rho = Matrix4::identity() * crate::polarization::C64::new(0.25, 0.0);
        let sets = methods_settings();
        for (a, b) in &sets {
            assert_abs_diff_eq!(predict_e(&rho, a, b), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn singlet_reaches_tsirelson() {
        let rho = pure_density(&singlet());
        assert_abs_diff_eq!(predict_s(&rho), 2.0 * std::f64::consts::SQRT_2, epsilon = 1e-9);
    }

    #[test]
    fn werner_s_closed_form() {
        // E = −V·(a·b) for the Werner state, so S = 2√2·V; V = 0.9617 puts
        // S at 2.720.
        let v = 0.9617;
        let rho = werner_state(&singlet(), v).unwrap();
        assert_relative_eq!(predict_s(&rho), 2.0 * std::f64::consts::SQRT_2 * v, epsilon = 1e-10);
        assert_abs_diff_eq!(predict_s(&rho), 2.720, epsilon = 1e-3);
    }

    #[test]
    fn simulated_ideal_singlet_near_tsirelson() {
        let rho = pure_density(&singlet());
        let noise = NoiseModel::ideal();
        // 10⁶ expected counts per setting pair.
        let (res, _) = run_bell_experiment(&rho, 4e6, 1.0, 1e-9, &noise, 42).unwrap();
        assert!(
            (res.s - 2.0 * std::f64::consts::SQRT_2).abs() < 0.01,
            "S = {}",
            res.s
        );
        assert!(res.sigma_violation > 100.0);
    }

    #[test]
    fn simulated_mixed_state_no_violation() {
        let rho = Matrix4::identity() * crate::polarization::C64::new(0.25, 0.0);
        let noise = NoiseModel::ideal();
        let (res, _) = run_bell_experiment(&rho, 4e4, 1.0, 1e-9, &noise, 5).unwrap();
        assert!(res.s < 0.2, "S = {}", res.s);
        assert!(res.sigma_violation < 0.0);
    }

    #[test]
    fn bell_records_reordered_and_wrong_count() {
        let rho = pure_density(&singlet());
        let noise = NoiseModel::ideal();
        let recs = simulate_bell_counts(&rho, 4e4, 1.0, 1e-9, &noise, 9).unwrap();
        let direct = bell_from_records(&recs).unwrap();
        let mut rev = recs.clone();
        rev.reverse();
        let again = bell_from_records(&rev).unwrap();
        assert_abs_diff_eq!(direct.s, again.s, epsilon = 1e-12);
        assert!(bell_from_records(&recs[..15]).is_err());
    }

    #[test]
    fn analyzer_angle_mapping_projects_plus_eigenstate() {
        for (a, b) in methods_settings() {
            for v in [a, b, a.negated(), b.negated()] {
                let (q, h) = v.analyzer_angles().unwrap();
                let k = analyzer_ket(q, h);
                let plus = v.plus_eigenstate();
                assert!(
                    overlap(&k, &plus) > 1.0 - 1e-10,
                    "mapping wrong for ({}, {}, {})",
                    v.x,
                    v.y,
                    v.z
                );
            }
        }
    }

    #[test]
    fn pauli_setting_rejects_non_unit() {
        assert!(PauliSetting::new(1.0, 0.0, 1.0).is_err());
        assert!(PauliSetting::new(0.5, 0.0, 0.5).is_err());
    }
}
