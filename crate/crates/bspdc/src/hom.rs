//! Hong-Ou-Mandel interference: coincidence probability versus relative
//! delay from a biphoton spectral amplitude, triangle-fit width extraction
//! and visibility with accidental subtraction.
//!
//! For a degenerate CW-pumped pair the signal and idler detunings are
//! anti-correlated (Ω, −Ω), which puts a factor 2 into the delay kernel:
//!
//! P(τ) = ½ [1 − κ · Re ∫ φ(Ω) φ*(−Ω) e^{−2iΩτ} dΩ / ∫ |φ(Ω)|² dΩ],
//!
//! with κ the indistinguishability. For a real symmetric sinc amplitude the
//! dip is exactly the triangle ½(1 − κ·(1 − |τ|/γ)₊) with base-to-base
//! width 2γ.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::counts::sample_poisson;
use crate::spectrum::SpectralAmplitude;
use crate::{Error, Result};

/// A computed (or synthesized) HOM trace.
#[derive(Debug, Clone, Serialize)]
pub struct HomTrace {
    /// Relative delay grid, seconds.
    pub delay_s: Vec<f64>,
    /// Normalized coincidence probability per delay; 0.5 far outside the dip.
    pub probability: Vec<f64>,
    /// Optional counts-scale trace (Poisson-sampled).
    pub counts: Option<Vec<u64>>,
}

/// Least-squares triangle fit of a HOM dip.
#[derive(Debug, Clone, Serialize)]
pub struct TriangleFit {
    /// Base-to-base width of the triangle, seconds.
    pub base_width_s: f64,
    /// Fringe visibility (P_out − P_min)/P_out.
    pub visibility: f64,
    /// Fitted baseline level.
    pub baseline: f64,
    /// Fitted dip center, seconds.
    pub center_s: f64,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
}

/// Coincidence probability trace for a biphoton spectral amplitude.
pub fn hom_trace(
    spec: &SpectralAmplitude,
    delay_grid_s: &[f64],
    indistinguishability: f64,
) -> Result<HomTrace> {
    if delay_grid_s.is_empty() {
        return Err(Error::Data("empty delay grid".into()));
    }
    if !(0.0..=1.0).contains(&indistinguishability) {
        return Err(Error::Data(format!(
            "indistinguishability {indistinguishability} outside [0, 1]"
        )));
    }
    let n = spec.amp.len();
    let sym = spec.detuning_rad_s[0] + spec.detuning_rad_s[n - 1];
    if sym.abs() > spec.step_rad_s * 1e-6 {
        return Err(Error::Data("spectral grid is not symmetric about zero".into()));
    }
    let denom: f64 = spec.amp.iter().map(|a| a.norm_sqr()).sum();
    if denom <= 0.0 {
        return Err(Error::Data("zero-energy spectrum".into()));
    }
    // φ(Ω_j) φ*(−Ω_j): the mirror sample is at index n−1−j on the
    // symmetric grid.
    let mut probability = Vec::with_capacity(delay_grid_s.len());
    for &tau in delay_grid_s {
        let mut overlap = 0.0;
        for j in 0..n {
            let prod = spec.amp[j] * spec.amp[n - 1 - j].conj();
            let phase = -2.0 * spec.detuning_rad_s[j] * tau;
            overlap += (prod * num_complex::Complex::from_polar(1.0, phase)).re;
        }
        probability.push(0.5 * (1.0 - indistinguishability * overlap / denom));
    }
    Ok(HomTrace {
        delay_s: delay_grid_s.to_vec(),
        probability,
        counts: None,
    })
}

/// Attach a Poisson-sampled counts column: μ(τ) = baseline·P(τ)/0.5, so the
/// far-from-dip level equals `baseline_counts`.
pub fn counts_trace(trace: &HomTrace, baseline_counts: f64, seed: u64) -> Result<HomTrace> {
    if baseline_counts < 0.0 {
        return Err(Error::Data("baseline counts must be ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = trace
        .probability
        .iter()
        .map(|p| sample_poisson(baseline_counts * p / 0.5, &mut rng))
        .collect();
    Ok(HomTrace {
        counts: Some(counts),
        ..trace.clone()
    })
}

fn triangle(u: f64) -> f64 {
    (1.0 - u.abs()).max(0.0)
}

/// Residual of the best linear fit P ≈ base − a·tri((τ−τ0)/h) for fixed
/// (τ0, h); returns (sse, base, a).
fn linear_fit(tau: &[f64], p: &[f64], tau0: f64, h: f64) -> (f64, f64, f64) {
    let n = tau.len() as f64;
    let (mut st, mut stt, mut sp, mut spt) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in tau.iter().zip(p) {
        let x = triangle((t - tau0) / h);
        st += x;
        stt += x * x;
        sp += y;
        spt += y * x;
    }
    let det = n * stt - st * st;
    if det.abs() < 1e-30 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    // P = base − a·x
    let a = -(n * spt - st * sp) / det;
    let base = (sp + a * st) / n;
    let mut sse = 0.0;
    for (&t, &y) in tau.iter().zip(p) {
        let model = base - a * triangle((t - tau0) / h);
        sse += (y - model) * (y - model);
    }
    (sse, base, a)
}

/// Least-squares fit of a symmetric truncated-triangle dip. Returns the
/// base-to-base width 2h and visibility (P_out − P_min)/P_out.
pub fn fit_triangle(trace: &HomTrace) -> Result<TriangleFit> {
    let tau = &trace.delay_s;
    let p = &trace.probability;
    if tau.len() < 7 {
        return Err(Error::Data("triangle fit needs at least 7 points".into()));
    }
    let span = tau.last().unwrap() - tau.first().unwrap();
    if span <= 0.0 {
        return Err(Error::Data("delay grid must be increasing".into()));
    }
    let min_idx = p
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;

    // Coarse-to-fine grid search over (center, half-width) with the linear
    // parameters solved exactly at each node.
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0, 0.0); // sse, tau0, h, base, a
    let mut t0_center = tau[min_idx];
    let mut t0_range = span * 0.25;
    let mut h_center = span * 0.25;
    let mut h_range = span * 0.249;
    for _level in 0..5 {
        for i in 0..41 {
            let tau0 = t0_center - t0_range + 2.0 * t0_range * i as f64 / 40.0;
            for j in 0..41 {
                let h = (h_center - h_range + 2.0 * h_range * j as f64 / 40.0).max(span * 1e-4);
                let (sse, base, a) = linear_fit(tau, p, tau0, h);
                if sse < best.0 {
                    best = (sse, tau0, h, base, a);
                }
            }
        }
        t0_center = best.1;
        h_center = best.2;
        t0_range /= 12.0;
        h_range /= 12.0;
    }
    let (sse, tau0, h, base, a) = best;
    if !sse.is_finite() || base <= 0.0 {
        return Err(Error::Numerical("triangle fit did not converge".into()));
    }
    Ok(TriangleFit {
        base_width_s: 2.0 * h,
        visibility: (a / base).clamp(0.0, 1.0),
        baseline: base,
        center_s: tau0,
        rms_residual: (sse / tau.len() as f64).sqrt(),
    })
}

/// Raw and accidental-corrected dip visibility from counts levels:
/// raw = (out − min)/out, corrected = (out − min)/(out − acc).
pub fn visibility_with_accidentals(
    raw_min: f64,
    raw_out: f64,
    accidental_level: f64,
) -> Result<(f64, f64)> {
    if !(raw_out > raw_min && raw_min >= 0.0) {
        return Err(Error::Data(format!(
            "need raw_out > raw_min ≥ 0, got out={raw_out}, min={raw_min}"
        )));
    }
    if accidental_level > raw_min || accidental_level < 0.0 {
        return Err(Error::Data(format!(
            "accidental level {accidental_level} outside [0, raw_min={raw_min}]"
        )));
    }
    let raw = (raw_out - raw_min) / raw_out;
    let corrected = ((raw_out - accidental_level) - (raw_min - accidental_level))
        / (raw_out - accidental_level);
    Ok((raw, corrected))
}

/// Closed-form dip for a pure sinc amplitude sinc(γΩ): the analytic Fourier
/// transform of sinc² is a triangle of base 2γ. Test oracle, exported for
/// the acceptance suite.
pub fn sinc_dip_closed_form(tau: f64, gamma: f64, kappa: f64) -> f64 {
    0.5 * (1.0 - kappa * triangle(tau / gamma))
}
