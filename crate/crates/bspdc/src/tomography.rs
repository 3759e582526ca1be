//! Two-qubit state reconstruction from 16 projective coincidence
//! measurements: linear inversion, physicality-constrained maximum-likelihood
//! estimation over a Cholesky-style parameterization, and Monte-Carlo
//! (Poissonian) error bars.
//!
//! The maximum-likelihood step maximizes the exact Poisson log-likelihood
//! Σ_ν [n_ν ln μ_ν − μ_ν] with μ_ν = Tr(T T† Π_ν), where T is lower
//! triangular with 16 real parameters. The overall normalization rides on
//! the scale of T, so ρ = T T†/Tr(T T†) is physical by construction and the
//! argmax is invariant under uniform scaling of all counts.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix4, SMatrix, SVector};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::counts::{sample_poisson, CountsRecord, Setting};
use crate::polarization::{Label, C64};
use crate::quantum::{fidelity, kron2, Ket4, NoiseModel, Rho};
use crate::{Error, Result};

/// The four per-arm projection states used by the tomography, as listed for
/// the experiment: H, V, D, R.
pub const ARM_LABELS: [Label; 4] = [Label::H, Label::V, Label::D, Label::R];

/// Ordered list of the 16 product projectors. The order is R-arm outer,
/// L-arm inner over [H, V, D, R].
#[derive(Debug, Clone)]
pub struct TomographySettings {
    pub labels: Vec<(Label, Label)>,
    pub projectors: Vec<Matrix4<C64>>,
}

impl TomographySettings {
    /// The default 16-setting list. The arm-label set is configurable via
    /// [`TomographySettings::from_labels`] since overcomplete sets exist.
    pub fn standard() -> Self {
        Self::from_labels(&ARM_LABELS, &ARM_LABELS).expect("standard settings are independent")
    }

    pub fn from_labels(r_labels: &[Label], l_labels: &[Label]) -> Result<Self> {
        let mut labels = Vec::new();
        let mut projectors = Vec::new();
        for &r in r_labels {
            for &l in l_labels {
                labels.push((r, l));
                projectors.push(kron2(
                    &crate::polarization::projector(r),
                    &crate::polarization::projector(l),
                ));
            }
        }
        let s = TomographySettings { labels, projectors };
        if s.labels.len() == 16 && s.gram_rank() < 16 {
            return Err(Error::Config(
                "tomography settings are not linearly independent".into(),
            ));
        }
        Ok(s)
    }

    /// Rank of the Gram matrix of the vectorized projectors.
    pub fn gram_rank(&self) -> usize {
        let n = self.projectors.len();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] = (self.projectors[i].adjoint() * self.projectors[j]).trace().re;
            }
        }
        gram.svd(false, false)
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-9)
            .count()
    }

    /// Measurement settings (analyzer angles) in the fixture convention.
    pub fn measurement_settings(&self) -> Vec<Setting> {
        self.labels
            .iter()
            .map(|&(r, l)| Setting::from_labels(r, l))
            .collect()
    }
}

/// Match counts records to settings by the analyzer states they project,
/// tolerant to reordered input files. Errors if a setting is missing or
/// matched twice.
pub fn align_counts(settings: &TomographySettings, records: &[CountsRecord]) -> Result<Vec<u64>> {
    if records.len() != settings.labels.len() {
        return Err(Error::Data(format!(
            "expected {} counts records, got {}",
            settings.labels.len(),
            records.len()
        )));
    }
    let mut out = vec![None; settings.labels.len()];
    for rec in records {
        let s = rec.setting();
        let kr = crate::polarization::analyzer_ket(s.qwp_r, s.hwp_r);
        let kl = crate::polarization::analyzer_ket(s.qwp_l, s.hwp_l);
        let mut matched = None;
        for (i, &(lr, ll)) in settings.labels.iter().enumerate() {
            let o = crate::polarization::overlap(&kr, &lr.ket())
                * crate::polarization::overlap(&kl, &ll.ket());
            if o > 1.0 - 1e-6 {
                matched = Some(i);
                break;
            }
        }
        let i = matched.ok_or_else(|| {
            Error::Data(format!(
                "counts record at angles ({}, {}, {}, {}) matches no tomography setting",
                rec.qwp_r, rec.hwp_r, rec.qwp_l, rec.hwp_l
            ))
        })?;
        if out[i].is_some() {
            return Err(Error::Data(format!(
                "duplicate counts record for setting {:?}",
                settings.labels[i]
            )));
        }
        out[i] = Some(rec.coincidences);
    }
    Ok(out.into_iter().map(|o| o.unwrap()).collect())
}

/// Probabilities Tr(ρ Π_ν) for every setting.
pub fn expected_probs(rho: &Rho, settings: &TomographySettings) -> Vec<f64> {
    settings
        .projectors
        .iter()
        .map(|p| (rho * p).trace().re)
        .collect()
}

/// Linear reconstruction: solves n_ν/N = Tr(ρ Π_ν) for a Hermitian
/// unit-trace ρ. The result may have negative eigenvalues under noise;
/// that is the reason the MLE step exists. N is estimated from the complete
/// H/V product subset.
pub fn linear_inversion(counts: &[u64], settings: &TomographySettings) -> Result<Rho> {
    if counts.len() != 16 || settings.projectors.len() != 16 {
        return Err(Error::Data("linear inversion needs exactly 16 settings".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Data("all-zero counts".into()));
    }
    let n_est = normalization_estimate(counts, settings)?;

    let basis = hermitian_basis();
    let mut m = DMatrix::<f64>::zeros(16, 16);
    let mut rhs = DVector::<f64>::zeros(16);
    for (nu, proj) in settings.projectors.iter().enumerate() {
        for (k, b) in basis.iter().enumerate() {
            m[(nu, k)] = (b * proj).trace().re;
        }
        rhs[nu] = counts[nu] as f64 / n_est;
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular tomography measurement map".into()))?;
    let mut rho = Matrix4::<C64>::zeros();
    for (k, b) in basis.iter().enumerate() {
        rho += b * C64::new(sol[k], 0.0);
    }
    // Hermitianize against rounding and rescale to exact unit trace.
    let rho = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let tr = rho.trace().re;
    if tr.abs() < 1e-12 {
        return Err(Error::Numerical("zero-trace linear inversion".into()));
    }
    Ok(rho / C64::new(tr, 0.0))
}

/// Estimated counts normalization from the H/V complete product subset.
fn normalization_estimate(counts: &[u64], settings: &TomographySettings) -> Result<f64> {
    let mut n = 0.0;
    let mut found = 0;
    for (i, &(r, l)) in settings.labels.iter().enumerate() {
        if matches!(r, Label::H | Label::V) && matches!(l, Label::H | Label::V) {
            n += counts[i] as f64;
            found += 1;
        }
    }
    if found != 4 || n <= 0.0 {
        return Err(Error::Data(
            "settings lack a complete H/V product subset with nonzero counts".into(),
        ));
    }
    Ok(n)
}

/// 16 Hermitian basis matrices: diagonal units, symmetric and antisymmetric
/// off-diagonal pairs.
fn hermitian_basis() -> Vec<Matrix4<C64>> {
    let mut basis = Vec::with_capacity(16);
    for i in 0..4 {
        let mut b = Matrix4::<C64>::zeros();
        b[(i, i)] = C64::new(1.0, 0.0);
        basis.push(b);
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut b = Matrix4::<C64>::zeros();
            b[(i, j)] = C64::new(1.0, 0.0);
            b[(j, i)] = C64::new(1.0, 0.0);
            basis.push(b);
            let mut b = Matrix4::<C64>::zeros();
            b[(i, j)] = C64::new(0.0, 1.0);
            b[(j, i)] = C64::new(0.0, -1.0);
            basis.push(b);
        }
    }
    basis
}

const N_PARAMS: usize = 16;
type Params = SVector<f64, N_PARAMS>;

/// Lower-triangular index layout: 4 real diagonal entries, then (re, im)
/// pairs for (1,0), (2,0), (2,1), (3,0), (3,1), (3,2).
const OFF_DIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn params_to_t(p: &Params) -> Matrix4<C64> {
    let mut t = Matrix4::<C64>::zeros();
    for i in 0..4 {
        t[(i, i)] = C64::new(p[i], 0.0);
    }
    for (k, &(i, j)) in OFF_DIAG.iter().enumerate() {
        t[(i, j)] = C64::new(p[4 + 2 * k], p[5 + 2 * k]);
    }
    t
}

fn t_to_params(t: &Matrix4<C64>) -> Params {
    let mut p = Params::zeros();
    for i in 0..4 {
        p[i] = t[(i, i)].re;
    }
    for (k, &(i, j)) in OFF_DIAG.iter().enumerate() {
        p[4 + 2 * k] = t[(i, j)].re;
        p[5 + 2 * k] = t[(i, j)].im;
    }
    p
}

const MU_FLOOR: f64 = 1e-12;

/// Negative Poisson log-likelihood and its analytic gradient.
fn neg_log_likelihood(
    p: &Params,
    counts: &[u64],
    projectors: &[Matrix4<C64>],
) -> (f64, Params) {
    let t = params_to_t(p);
    let a = t * t.adjoint();
    let mut f = 0.0;
    let mut grad = Params::zeros();
    for (nu, proj) in projectors.iter().enumerate() {
        let mu = (a * proj).trace().re.max(MU_FLOOR);
        let n = counts[nu] as f64;
        f -= n * mu.ln() - mu;
        // dμ/dt_k = 2 Re Tr(T† Π D_k); D is a unit matrix (or i× one).
        let m = t.adjoint() * proj; // dμ for D = E_ij is 2 Re m[(j, i)]... see below
        let w = n / mu - 1.0;
        // For A = T T†: dμ = 2 Re Tr(D T† Π) = 2 Re (T† Π)_{ji} for D = E_ij.
        let tp = m; // T† Π
        for i in 0..4 {
            grad[i] -= w * 2.0 * tp[(i, i)].re;
        }
        for (k, &(i, j)) in OFF_DIAG.iter().enumerate() {
            grad[4 + 2 * k] -= w * 2.0 * tp[(j, i)].re;
            grad[5 + 2 * k] -= w * (-2.0) * tp[(j, i)].im;
        }
    }
    (f, grad)
}

/// Result of a maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub rho: Rho,
    /// Fidelity to the requested target, when one was given.
    pub fidelity_to_target: Option<f64>,
    /// 1σ error of the fidelity, filled by [`poisson_error_bars`].
    pub fidelity_std: Option<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mc_samples: usize,
}

/// Initial parameters from the eigenvalue-projected linear-inversion
/// estimate, scaled to the observed total counts.
fn initial_params(counts: &[u64], settings: &TomographySettings) -> Result<Params> {
    let rho_lin = linear_inversion(counts, settings)?;
    let eig = rho_lin.symmetric_eigen();
    let floor = 1e-6;
    let mut rho0 = Matrix4::<C64>::zeros();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        rho0 += v * v.adjoint() * C64::new(ev.max(floor), 0.0);
    }
    let tr = rho0.trace().re;
    let rho0 = rho0 / C64::new(tr, 0.0);
    let probs = expected_probs(&rho0, settings);
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let psum: f64 = probs.iter().sum();
    let scale = if psum > 0.0 { total / psum } else { total };
    let a0 = rho0 * C64::new(scale, 0.0);
    let chol = Cholesky::new(a0)
        .ok_or_else(|| Error::Numerical("initial state not positive definite".into()))?;
    Ok(t_to_params(&chol.l()))
}

/// Maximum-likelihood reconstruction. BFGS with analytic gradients over the
/// 16 triangular parameters; converges when the gradient sup-norm drops
/// below 1e-8 or the parameter step below 1e-12. Non-convergence after the
/// iteration cap returns the best-so-far state with `converged = false`.
pub fn mle_reconstruct(
    counts: &[u64],
    settings: &TomographySettings,
    target: Option<&Ket4>,
) -> Result<TomographyResult> {
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Data("all-zero counts".into()));
    }
    let mut p = initial_params(counts, settings)?;
    let projectors = &settings.projectors;
    let (mut f, mut g) = neg_log_likelihood(&p, counts, projectors);
    let mut h_inv = SMatrix::<f64, N_PARAMS, N_PARAMS>::identity();
    // Scale the initial inverse Hessian to the likelihood curvature so the
    // first steps are sane for any counts magnitude.
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    h_inv *= 1.0 / total.max(1.0);

    let max_iter = 2000;
    let grad_tol = 1e-8;
    let step_tol = 1e-12;
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh_hessian = false;
    for iter in 0..max_iter {
        iterations = iter + 1;
        if g.amax() < grad_tol {
            converged = true;
            break;
        }
        let mut dir = -(h_inv * g);
        if dir.dot(&g) >= 0.0 {
            // Bad curvature estimate; reset to scaled steepest descent.
            h_inv = SMatrix::identity() * (1.0 / total.max(1.0));
            fresh_hessian = true;
            dir = -(h_inv * g);
        }
        // Backtracking Armijo line search.
        let mut alpha = 1.0;
        let slope = g.dot(&dir);
        let mut accepted = false;
        let (mut f_new, mut g_new, mut p_new) = (f, g, p);
        for _ in 0..60 {
            let cand = p + dir * alpha;
            let (fc, gc) = neg_log_likelihood(&cand, counts, projectors);
            if fc <= f + 1e-4 * alpha * slope {
                f_new = fc;
                g_new = gc;
                p_new = cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if !fresh_hessian {
                // A stale curvature estimate can block the line search;
                // retry once from scaled steepest descent before stopping.
                h_inv = SMatrix::identity() * (1.0 / total.max(1.0));
                fresh_hessian = true;
                continue;
            }
            // No descent step representable even for steepest descent:
            // treat as a vanishing step.
            converged = true;
            break;
        }
        fresh_hessian = false;
        let s = p_new - p;
        let y = g_new - g;
        if s.amax() < step_tol {
            p = p_new;
            f = f_new;
            converged = true;
            break;
        }
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho_b = 1.0 / sy;
            let id = SMatrix::<f64, N_PARAMS, N_PARAMS>::identity();
            let left = id - (s * y.transpose()) * rho_b;
            let right = id - (y * s.transpose()) * rho_b;
            h_inv = left * h_inv * right + (s * s.transpose()) * rho_b;
        }
        p = p_new;
        f = f_new;
        g = g_new;
    }

    let t = params_to_t(&p);
    let a = t * t.adjoint();
    let tr = a.trace().re;
    if tr <= 0.0 {
        return Err(Error::Numerical("degenerate MLE state".into()));
    }
    let rho = a / C64::new(tr, 0.0);
    let fidelity_to_target = match target {
        Some(t) => Some(fidelity(&rho, t)?),
        None => None,
    };
    Ok(TomographyResult {
        rho,
        fidelity_to_target,
        fidelity_std: None,
        log_likelihood: -f,
        iterations,
        converged,
        mc_samples: 0,
    })
}

/// Element-wise standard deviations of a set of density matrices, split
/// into real and imaginary parts.
#[derive(Debug, Clone, Serialize)]
pub struct RhoStd {
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

/// Bootstrap statistics of the fidelity to the target state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FidelityErrorBars {
    /// Sample standard deviation over the resamples.
    pub std: f64,
    /// Mean fidelity over the resamples; its offset from the point estimate
    /// measures the estimator bias.
    pub bootstrap_mean: f64,
}

impl FidelityErrorBars {
    /// Parametric-bootstrap bias correction: F_corr = 2·F̂ − mean(F_boot).
    /// The resamples are one more sampling level away from the truth than
    /// the point estimate, so their mean overshoots the bias in the same
    /// direction the estimate itself is biased.
    pub fn bias_corrected(&self, point_estimate: f64) -> f64 {
        (2.0 * point_estimate - self.bootstrap_mean).clamp(0.0, 1.0)
    }
}

/// Poissonian error estimation by smoothed parametric bootstrap: fit the
/// MLE state once, resample every n_ν from Poisson of its expected counts,
/// rerun the MLE, and report the sample standard deviation of the fidelity
/// and of each ρ element. Resampling from the fitted state rather than from
/// the raw counts avoids doubling the shot noise already present in the
/// observed record. Deterministic for a fixed seed; resamples run
/// concurrently on per-index RNG streams.
pub fn poisson_error_bars(
    counts: &[u64],
    settings: &TomographySettings,
    target: &Ket4,
    resamples: usize,
    seed: u64,
) -> Result<(FidelityErrorBars, RhoStd)> {
    if resamples < 50 {
        return Err(Error::Config(format!(
            "need at least 50 resamples, got {resamples}"
        )));
    }
    let point = mle_reconstruct(counts, settings, Some(target))?;
    let probs = expected_probs(&point.rho, settings);
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let psum: f64 = probs.iter().sum();
    if psum <= 0.0 {
        return Err(Error::Numerical("degenerate fitted state".into()));
    }
    let mus: Vec<f64> = probs.iter().map(|p| p * total / psum).collect();
    let outcomes: Vec<Result<(f64, Rho)>> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let resampled: Vec<u64> = mus
                .iter()
                .map(|&mu| sample_poisson(mu, &mut rng))
                .collect();
            let res = mle_reconstruct(&resampled, settings, Some(target))?;
            if !res.converged {
                return Err(Error::Numerical("resample MLE did not converge".into()));
            }
            Ok((res.fidelity_to_target.unwrap(), res.rho))
        })
        .collect();

    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures * 10 > resamples {
        return Err(Error::Numerical(format!(
            "{failures}/{resamples} Monte-Carlo resamples failed"
        )));
    }
    let ok: Vec<&(f64, Rho)> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let n = ok.len() as f64;
    let mean_f = ok.iter().map(|(f, _)| f).sum::<f64>() / n;
    let var_f = ok.iter().map(|(f, _)| (f - mean_f).powi(2)).sum::<f64>() / (n - 1.0);

    let mut std = RhoStd {
        re: [[0.0; 4]; 4],
        im: [[0.0; 4]; 4],
    };
    for i in 0..4 {
        for j in 0..4 {
            let mean_re = ok.iter().map(|(_, r)| r[(i, j)].re).sum::<f64>() / n;
            let mean_im = ok.iter().map(|(_, r)| r[(i, j)].im).sum::<f64>() / n;
            let var_re =
                ok.iter().map(|(_, r)| (r[(i, j)].re - mean_re).powi(2)).sum::<f64>() / (n - 1.0);
            let var_im =
                ok.iter().map(|(_, r)| (r[(i, j)].im - mean_im).powi(2)).sum::<f64>() / (n - 1.0);
            std.re[i][j] = var_re.sqrt();
            std.im[i][j] = var_im.sqrt();
        }
    }
    Ok((
        FidelityErrorBars {
            std: var_f.sqrt(),
            bootstrap_mean: mean_f,
        },
        std,
    ))
}

/// Simulate the 16 tomography records for a state. `counts_per_basis` is
/// the expected total over a complete product basis (rate·duration·η²).
pub fn simulate_tomography_counts(
    rho: &Rho,
    settings: &TomographySettings,
    counts_per_basis: f64,
    noise: &NoiseModel,
    window_s: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<CountsRecord>> {
    if counts_per_basis <= 0.0 {
        return Err(Error::Config("counts_per_basis must be positive".into()));
    }
    let rate = counts_per_basis / (duration_s * noise.efficiency_r * noise.efficiency_l);
    let mut out = Vec::with_capacity(settings.labels.len());
    for (i, setting) in settings.measurement_settings().iter().enumerate() {
        out.push(crate::counts::simulate_counts(
            rho,
            setting,
            rate,
            duration_s,
            window_s,
            noise,
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64),
        )?);
    }
    Ok(out)
}

/// JSON view of a density matrix: 4×4 array of [re, im] pairs plus the
/// basis documentation string.
pub fn rho_to_json(rho: &Rho) -> serde_json::Value {
    let entries: Vec<Vec<[f64; 2]>> = (0..4)
        .map(|i| (0..4).map(|j| [rho[(i, j)].re, rho[(i, j)].im]).collect())
        .collect();
    serde_json::json!({
        "basis": "HH, HV, VH, VV (R ⊗ L)",
        "entries": entries,
    })
}
