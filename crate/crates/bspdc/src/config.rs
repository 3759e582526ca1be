//! Run configuration: a sectioned TOML file with explicit unit suffixes in
//! every key name. Unknown keys are rejected so silent typos cannot change
//! physics. The built-in default reproduces the reference source:
//! a 10 mm KTP crystal with a 1.3 µm third-order backward grating pumped
//! at the 776.74 nm degeneracy point.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispersion::{DispersionModel, QpmGrating};
use crate::quantum::{eq1_state, pure_density, werner_state, NoiseModel, Rho};
use crate::spectrum::{FilterShape, FilterSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dispersion: DispersionSection,
    #[serde(default)]
    pub grating: GratingSection,
    #[serde(default)]
    pub pump: PumpSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub filter: Option<FilterSection>,
    #[serde(default)]
    pub scan: ScanSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    /// Named coefficient set: "ktp" or "flat".
    pub set: String,
}

impl Default for DispersionSection {
    fn default() -> Self {
        DispersionSection { set: "ktp".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingSection {
    pub period_um: f64,
    pub order: u32,
    pub length_mm: f64,
}

impl Default for GratingSection {
    fn default() -> Self {
        GratingSection {
            period_um: 1.3,
            order: 3,
            length_mm: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    /// Pump wavelength in nm. When absent, the degeneracy point of the
    /// configured grating is solved for and used.
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    /// Relative phase φ of the entangled state (|HV⟩ + e^{iφ}|VH⟩)/√2.
    pub phase_rad: f64,
    /// Werner mixing parameter V; 1 is the pure state.
    pub mix: f64,
}

impl Default for StateSection {
    fn default() -> Self {
        StateSection {
            phase_rad: std::f64::consts::PI,
            mix: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub pair_rate_hz: f64,
    pub duration_s: f64,
    pub window_ns: f64,
    pub efficiency_r: f64,
    pub efficiency_l: f64,
    pub accidental_rate_hz: f64,
    pub dark_rate_hz: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            pair_rate_hz: 2000.0,
            duration_s: 15.0,
            window_ns: 1.0,
            efficiency_r: 1.0,
            efficiency_l: 1.0,
            accidental_rate_hz: 0.0,
            dark_rate_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub fwhm_pm: f64,
    /// "lorentzian" or "airy".
    pub shape: String,
    /// Free spectral range in pm; required for the airy shape.
    pub fsr_pm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Analyzer-angle grid for fringe scans.
    pub fringe_points: usize,
    /// Delay grid for the HOM trace.
    pub hom_points: usize,
    pub hom_span_ps: f64,
    /// Expected coincidences per complete measurement basis in synthetic
    /// tomography runs.
    pub tomo_counts_per_basis: f64,
    /// Frequency-grid size for spectra.
    pub spectrum_points: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            fringe_points: 19,
            hom_points: 201,
            hom_span_ps: 400.0,
            tomo_counts_per_basis: 10_000.0,
            spectrum_points: 2001,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dispersion: DispersionSection::default(),
            grating: GratingSection::default(),
            pump: PumpSection::default(),
            state: StateSection::default(),
            rates: RatesSection::default(),
            filter: None,
            scan: ScanSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dispersion_model()?;
        self.grating()?;
        if !(0.0..=1.0).contains(&self.state.mix) {
            return Err(Error::Config(format!(
                "state.mix must lie in [0, 1], got {}",
                self.state.mix
            )));
        }
        if !self.state.phase_rad.is_finite() {
            return Err(Error::Config("state.phase_rad must be finite".into()));
        }
        let r = &self.rates;
        for (name, v) in [
            ("rates.pair_rate_hz", r.pair_rate_hz),
            ("rates.duration_s", r.duration_s),
            ("rates.window_ns", r.window_ns),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("rates.efficiency_r", r.efficiency_r),
            ("rates.efficiency_l", r.efficiency_l),
        ] {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("rates.accidental_rate_hz", r.accidental_rate_hz),
            ("rates.dark_rate_hz", r.dark_rate_hz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        if let Some(f) = &self.filter {
            self.filter_spec_at(1550e-9)?;
            if !(f.fwhm_pm.is_finite() && f.fwhm_pm > 0.0) {
                return Err(Error::Config("filter.fwhm_pm must be positive".into()));
            }
        }
        let s = &self.scan;
        if s.fringe_points < 5 {
            return Err(Error::Config("scan.fringe_points must be ≥ 5".into()));
        }
        if s.hom_points < 3 || s.hom_points % 2 == 0 {
            return Err(Error::Config("scan.hom_points must be odd and ≥ 3".into()));
        }
        if s.spectrum_points < 3 || s.spectrum_points % 2 == 0 {
            return Err(Error::Config("scan.spectrum_points must be odd and ≥ 3".into()));
        }
        if !(s.hom_span_ps.is_finite() && s.hom_span_ps > 0.0) {
            return Err(Error::Config("scan.hom_span_ps must be positive".into()));
        }
        if !(s.tomo_counts_per_basis.is_finite() && s.tomo_counts_per_basis > 0.0) {
            return Err(Error::Config(
                "scan.tomo_counts_per_basis must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn dispersion_model(&self) -> Result<DispersionModel> {
        DispersionModel::builtin(&self.dispersion.set)
    }

    pub fn grating(&self) -> Result<QpmGrating> {
        QpmGrating::new(
            self.grating.period_um * 1e-6,
            self.grating.order,
            self.grating.length_mm * 1e-3,
        )
    }

    /// Pump wavelength in meters: configured value, or the solved
    /// degeneracy point of the grating.
    pub fn pump_wavelength_m(&self) -> Result<f64> {
        match self.pump.wavelength_nm {
            Some(nm) => {
                if !(nm.is_finite() && nm > 0.0) {
                    return Err(Error::Config(format!(
                        "pump.wavelength_nm must be positive, got {nm}"
                    )));
                }
                Ok(nm * 1e-9)
            }
            None => {
                let model = self.dispersion_model()?;
                let grating = self.grating()?;
                crate::dispersion::solve_degeneracy(&model, &grating)
            }
        }
    }

    /// The configured two-qubit state (Werner-mixed phase state).
    pub fn target_rho(&self) -> Result<Rho> {
        let psi = eq1_state(self.state.phase_rad);
        if (self.state.mix - 1.0).abs() < 1e-15 {
            Ok(pure_density(&psi))
        } else {
            werner_state(&psi, self.state.mix)
        }
    }

    /// Detection-chain noise model. The unitary-mix part of the state is in
    /// [`RunConfig::target_rho`], so `visibility_mix` stays at 1 here.
    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            visibility_mix: 1.0,
            accidental_rate_hz: self.rates.accidental_rate_hz,
            efficiency_r: self.rates.efficiency_r,
            efficiency_l: self.rates.efficiency_l,
            dark_rate_hz: self.rates.dark_rate_hz,
        }
    }

    pub fn window_s(&self) -> f64 {
        self.rates.window_ns * 1e-9
    }

    /// Spectral filter centered on the given wavelength, if configured.
    pub fn filter_spec_at(&self, center_m: f64) -> Result<Option<FilterSpec>> {
        let Some(f) = &self.filter else { return Ok(None) };
        let shape = match f.shape.as_str() {
            "lorentzian" => FilterShape::Lorentzian,
            "airy" => FilterShape::Airy,
            other => {
                return Err(Error::Config(format!(
                    "unknown filter shape {other:?}; use \"lorentzian\" or \"airy\""
                )))
            }
        };
        Ok(Some(FilterSpec {
            center_m,
            fwhm_m: f.fwhm_pm * 1e-12,
            shape,
            fsr_m: f.fsr_pm.map(|v| v * 1e-12),
        }))
    }

    /// Short stable hash of the effective configuration, stamped into
    /// output files so results can be traced to their settings.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        let mut s = String::with_capacity(16);
        for b in &digest[..8] {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}
