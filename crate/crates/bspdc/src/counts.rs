//! Synthetic coincidence-count generation and fringe analysis: Poissonian
//! statistics, accidentals, detector efficiency, sinusoidal fringe fits and
//! spectral brightness.
//!
//! Counts files are one JSON object per line with analyzer angles in
//! degrees:
//!
//! ```text
//! {"qwp_r": 0.0, "hwp_r": 0.0, "qwp_l": 0.0, "hwp_l": 22.5,
//!  "coincidences": 512, "singles_r": 90000, "singles_l": 88000,
//!  "duration_s": 15.0, "window_s": 1e-9}
//! ```
//!
//! All analysis operations ingest this format, so real experimental data
//! can replace synthetic data.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::polarization::{projector_from_angles, Jones, Label};
use crate::quantum::{joint_probability, marginal_l, marginal_r, NoiseModel, Rho};
use crate::{Error, Result};

/// One projective measurement setting: analyzer angles per arm, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub qwp_r: f64,
    pub hwp_r: f64,
    pub qwp_l: f64,
    pub hwp_l: f64,
}

impl Setting {
    pub fn from_labels(r: Label, l: Label) -> Self {
        let (qr, hr) = r.analyzer_angles();
        let (ql, hl) = l.analyzer_angles();
        Setting {
            qwp_r: qr,
            hwp_r: hr,
            qwp_l: ql,
            hwp_l: hl,
        }
    }

    pub fn projector_r(&self) -> Result<Jones> {
        projector_from_angles(self.qwp_r, self.hwp_r)
    }

    pub fn projector_l(&self) -> Result<Jones> {
        projector_from_angles(self.qwp_l, self.hwp_l)
    }
}

/// One measurement record: the ingestion unit for all analysis. Angles are
/// degrees to match the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsRecord {
    pub qwp_r: f64,
    pub hwp_r: f64,
    pub qwp_l: f64,
    pub hwp_l: f64,
    pub coincidences: u64,
    pub singles_r: u64,
    pub singles_l: u64,
    pub duration_s: f64,
    pub window_s: f64,
}

impl CountsRecord {
    pub fn setting(&self) -> Setting {
        Setting {
            qwp_r: self.qwp_r.to_radians(),
            hwp_r: self.hwp_r.to_radians(),
            qwp_l: self.qwp_l.to_radians(),
            hwp_l: self.hwp_l.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_s <= 0.0 || self.window_s <= 0.0 {
            return Err(Error::Data(format!(
                "duration {} s and window {} s must be positive",
                self.duration_s, self.window_s
            )));
        }
        Ok(())
    }
}

/// Deterministic Poisson sample; μ = 0 yields 0.
pub fn sample_poisson<R: Rng>(mu: f64, rng: &mut R) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mu).expect("positive mean");
    rng.sample(dist) as u64
}

/// Expected coincidences for a setting before Poisson sampling:
/// μ = rate·duration·η_R·η_L·p + accidental_rate·duration.
pub fn expected_coincidences(
    rho: &Rho,
    setting: &Setting,
    pair_rate_hz: f64,
    duration_s: f64,
    noise: &NoiseModel,
) -> Result<f64> {
    let eff = noise.apply_mix(rho);
    let p = joint_probability(&eff, &setting.projector_r()?, &setting.projector_l()?)?;
    Ok(pair_rate_hz * duration_s * noise.efficiency_r * noise.efficiency_l * p
        + noise.accidental_rate_hz * duration_s)
}

/// Simulate one record. Deterministic for a fixed seed; concurrent settings
/// should use distinct RNG streams (see [`fringe_scan`]).
pub fn simulate_counts(
    rho: &Rho,
    setting: &Setting,
    pair_rate_hz: f64,
    duration_s: f64,
    window_s: f64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CountsRecord> {
    if pair_rate_hz <= 0.0 || duration_s <= 0.0 || window_s <= 0.0 {
        return Err(Error::Config(
            "rate, duration and window must be positive".into(),
        ));
    }
    noise.validate()?;
    let eff = noise.apply_mix(rho);
    let mu_c = expected_coincidences(rho, setting, pair_rate_hz, duration_s, noise)?;
    let mu_r = pair_rate_hz * duration_s * noise.efficiency_r * marginal_r(&eff, &setting.projector_r()?)
        + noise.dark_rate_hz * duration_s;
    let mu_l = pair_rate_hz * duration_s * noise.efficiency_l * marginal_l(&eff, &setting.projector_l()?)
        + noise.dark_rate_hz * duration_s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(CountsRecord {
        qwp_r: setting.qwp_r.to_degrees(),
        hwp_r: setting.hwp_r.to_degrees(),
        qwp_l: setting.qwp_l.to_degrees(),
        hwp_l: setting.hwp_l.to_degrees(),
        coincidences: sample_poisson(mu_c, &mut rng),
        singles_r: sample_poisson(mu_r, &mut rng),
        singles_l: sample_poisson(mu_l, &mut rng),
        duration_s,
        window_s,
    })
}

/// Polarization-correlation fringe: the R arm fixed to one of {H, V, D, A},
/// the L-arm HWP scanned. One record per grid angle, each drawn from its own
/// RNG stream of the master seed so records are independent and the scan is
/// deterministic.
#[allow(clippy::too_many_arguments)]
pub fn fringe_scan(
    rho: &Rho,
    fixed_r: Label,
    hwp_l_grid: &[f64],
    pair_rate_hz: f64,
    duration_s: f64,
    window_s: f64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<CountsRecord>> {
    if hwp_l_grid.is_empty() {
        return Err(Error::Data("empty fringe angle grid".into()));
    }
    if matches!(fixed_r, Label::R | Label::L) {
        return Err(Error::Data(
            "fringe scans fix the R arm to a linear basis: H, V, D or A".into(),
        ));
    }
    let (qr, hr) = fixed_r.analyzer_angles();
    let mut out = Vec::with_capacity(hwp_l_grid.len());
    for (i, &theta) in hwp_l_grid.iter().enumerate() {
        let setting = Setting {
            qwp_r: qr,
            hwp_r: hr,
            qwp_l: 0.0,
            hwp_l: theta,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let eff = noise.apply_mix(rho);
        let mu_c = expected_coincidences(rho, &setting, pair_rate_hz, duration_s, noise)?;
        let mu_r = pair_rate_hz * duration_s * noise.efficiency_r
            * marginal_r(&eff, &setting.projector_r()?)
            + noise.dark_rate_hz * duration_s;
        let mu_l = pair_rate_hz * duration_s * noise.efficiency_l
            * marginal_l(&eff, &setting.projector_l()?)
            + noise.dark_rate_hz * duration_s;
        out.push(CountsRecord {
            qwp_r: setting.qwp_r.to_degrees(),
            hwp_r: setting.hwp_r.to_degrees(),
            qwp_l: setting.qwp_l.to_degrees(),
            hwp_l: setting.hwp_l.to_degrees(),
            coincidences: sample_poisson(mu_c, &mut rng),
            singles_r: sample_poisson(mu_r, &mut rng),
            singles_l: sample_poisson(mu_l, &mut rng),
            duration_s,
            window_s,
        });
    }
    Ok(out)
}

/// Sinusoidal fringe fit C(θ) = offset + amplitude·cos(4θ − phase).
///
/// HWP fringes are 4θ-periodic in the plate angle; the period is fixed, not
/// fitted, which removes the fit degeneracy at low visibility.
#[derive(Debug, Clone, Serialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Phase in radians of the 4θ argument.
    pub phase: f64,
    /// Visibility amplitude/offset, clamped to [0, 1].
    pub visibility: f64,
    /// 1σ error of the visibility from the fit covariance under Poisson
    /// weights.
    pub visibility_err: f64,
}

/// Weighted least-squares fringe fit over (HWP angle in radians, counts).
pub fn fit_fringe(records: &[CountsRecord]) -> Result<FringeFit> {
    if records.len() < 5 {
        return Err(Error::Data(format!(
            "fringe fit needs ≥ 5 points, got {}",
            records.len()
        )));
    }
    let theta: Vec<f64> = records.iter().map(|r| r.hwp_l.to_radians()).collect();
    let span = theta.iter().cloned().fold(f64::MIN, f64::max)
        - theta.iter().cloned().fold(f64::MAX, f64::min);
    if span < std::f64::consts::FRAC_PI_4 {
        return Err(Error::Data(
            "fringe fit needs the scan to span at least half a period (45° of HWP angle)".into(),
        ));
    }
    // Basis {1, cos4θ, sin4θ}; weights 1/max(c, 1) (Poisson variance).
    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for (t, r) in theta.iter().zip(records) {
        let row = Vector3::new(1.0, (4.0 * t).cos(), (4.0 * t).sin());
        let w = 1.0 / (r.coincidences.max(1) as f64);
        xtx += row * row.transpose() * w;
        xty += row * (r.coincidences as f64) * w;
    }
    let cov = xtx
        .try_inverse()
        .ok_or_else(|| Error::Numerical("underdetermined fringe fit".into()))?;
    let beta = cov * xty;
    let (offset, a, b) = (beta[0], beta[1], beta[2]);
    let amplitude = (a * a + b * b).sqrt();
    if offset <= 0.0 {
        return Err(Error::Numerical("fringe fit produced non-positive offset".into()));
    }
    let visibility = (amplitude / offset).clamp(0.0, 1.0);
    // First-order propagation of V = √(a²+b²)/offset through the covariance.
    let g = if amplitude > 0.0 {
        Vector3::new(
            -amplitude / (offset * offset),
            a / (amplitude * offset),
            b / (amplitude * offset),
        )
    } else {
        Vector3::new(0.0, 1.0 / offset, 1.0 / offset)
    };
    let var = (g.transpose() * cov * g)[(0, 0)].max(0.0);
    Ok(FringeFit {
        offset,
        amplitude,
        phase: b.atan2(a),
        visibility,
        visibility_err: var.sqrt(),
    })
}

/// Spectral brightness B = pair_rate / (bandwidth · pump_power) in
/// pairs/(GHz·mW·s).
pub fn spectral_brightness(pair_rate_hz: f64, bandwidth_ghz: f64, pump_power_mw: f64) -> Result<f64> {
    if pair_rate_hz <= 0.0 {
        return Err(Error::Data("pair rate must be positive".into()));
    }
    if bandwidth_ghz <= 0.0 || pump_power_mw <= 0.0 {
        return Err(Error::Data(
            "bandwidth and pump power must be positive".into(),
        ));
    }
    Ok(pair_rate_hz / (bandwidth_ghz * pump_power_mw))
}

/// Accidental-subtracted coincidences. The estimate uses the singles-product
/// formula acc = s_R·s_L·window/duration; the result is floored at zero with
/// a flag when flooring occurred.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrectedCounts {
    pub accidentals: f64,
    pub corrected: f64,
    pub floored: bool,
}

pub fn subtract_accidentals(record: &CountsRecord) -> Result<CorrectedCounts> {
    record.validate()?;
    let acc = record.singles_r as f64 * record.singles_l as f64 * record.window_s
        / record.duration_s;
    let raw = record.coincidences as f64;
    let corrected = (raw - acc).max(0.0);
    Ok(CorrectedCounts {
        accidentals: acc,
        corrected,
        floored: raw < acc,
    })
}

/// Write records as one JSON object per line.
pub fn write_counts(path: &Path, records: &[CountsRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::Data(format!("serialize counts record: {e}")))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Read a counts file; malformed lines are reported with their line number.
pub fn read_counts(path: &Path) -> Result<Vec<CountsRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CountsRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Data(format!("{}:{}: malformed counts line: {e}", path.display(), i + 1))
        })?;
        rec.validate()
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
