//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use bspdc::chsh::{chsh_s, methods_settings, predict_e, predict_s, run_bell_experiment};
use bspdc::counts::{expected_coincidences, fit_fringe, fringe_scan, CountsRecord, Setting};
use bspdc::dispersion::{idler_wavelength, solve_degeneracy, DispersionModel, QpmGrating};
use bspdc::hom::{fit_triangle, hom_trace, sinc_dip_closed_form, visibility_with_accidentals};
use bspdc::polarization::{hwp_matrix, qwp_matrix, C64, Label};
use bspdc::quantum::{
    eq1_state, fidelity, is_physical, pure_density, singlet, werner_state, NoiseModel, Rho,
};
use bspdc::spectrum::{
    apply_filter, auto_half_span, bspdc_spectrum, sinc, wavelength_bw_to_freq, FilterShape,
    FilterSpec, SpectralAmplitude, SINC2_HALF_MAX_X,
};
use bspdc::tomography::{
    align_counts, expected_probs, mle_reconstruct, poisson_error_bars,
    simulate_tomography_counts, TomographySettings,
};

fn report(criterion: u32, name: &str, pass: bool) {
    println!(
        "ACCEPTANCE {criterion} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {criterion} ({name}) failed");
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn ktp_fixture() -> (DispersionModel, QpmGrating) {
    (
        DispersionModel::ktp(),
        QpmGrating::new(1.3e-6, 3, 10e-3).unwrap(),
    )
}

#[test]
fn criterion_1_chsh_analytic() {
    let start = Instant::now();
    let rho = pure_density(&singlet());
    let tsirelson = 2.0 * std::f64::consts::SQRT_2;

    let analytic_ok = (predict_s(&rho) - tsirelson).abs() < 1e-9;

    // 10⁶ counts per setting pair.
    let (res, _) =
        run_bell_experiment(&rho, 4e6, 1.0, 1e-9, &NoiseModel::ideal(), 11).unwrap();
    let simulated_ok = (res.s - tsirelson).abs() < 0.01;

    let fast_enough = start.elapsed().as_secs_f64() < 5.0;
    report(
        1,
        "chsh analytic + simulated",
        analytic_ok && simulated_ok && fast_enough,
    );
}

#[test]
fn criterion_2_paper_s_consistency() {
    let rho = werner_state(&singlet(), 0.9617).unwrap();
    let predicted_ok = (predict_s(&rho) - 2.720).abs() < 1e-3;

    // Realistic counts: ~4000 pairs per setting pair, 20 seeds; the true
    // value must lie inside ±2 std for the overwhelming majority.
    let mut contained = 0;
    let mut sum_s = 0.0;
    let n_runs = 20;
    for seed in 0..n_runs {
        let (res, _) =
            run_bell_experiment(&rho, 4e3, 1.0, 1e-9, &NoiseModel::ideal(), seed).unwrap();
        sum_s += res.s;
        if (res.s - 2.720).abs() <= 2.0 * res.std_s {
            contained += 1;
        }
    }
    let mean_ok = (sum_s / n_runs as f64 - 2.720).abs() < 0.03;
    let coverage_ok = contained >= 16;

    let sig = chsh_s([(2.720, 0.039), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]).sigma_violation;
    let sigma_ok = (sig - 18.46).abs() < 0.05;

    report(
        2,
        "werner S = 2.720, 18.46 sigma",
        predicted_ok && mean_ok && coverage_ok && sigma_ok,
    );
}

#[test]
fn criterion_3_tomography_round_trip() {
    let start = Instant::now();
    let settings = TomographySettings::standard();
    let target = singlet();

    // Exact singlet probabilities.
    let exact: Vec<u64> = expected_probs(&pure_density(&target), &settings)
        .iter()
        .map(|p| (p * 1e6).round() as u64)
        .collect();
    let res = mle_reconstruct(&exact, &settings, Some(&target)).unwrap();
    let exact_ok = res.fidelity_to_target.unwrap() >= 0.9999;

    // Werner 0.943 at 10⁴ counts per basis over 100 seeds.
    let rho = werner_state(&target, 0.943).unwrap();
    let f_true = (1.0 + 3.0 * 0.943) / 4.0;
    let mut fs = Vec::with_capacity(100);
    let mut covered = 0;
    for seed in 0..100u64 {
        let records = simulate_tomography_counts(
            &rho,
            &settings,
            1e4,
            &NoiseModel::ideal(),
            1e-9,
            1.0,
            seed,
        )
        .unwrap();
        let counts = align_counts(&settings, &records).unwrap();
        let res = mle_reconstruct(&counts, &settings, Some(&target)).unwrap();
        let f_hat = res.fidelity_to_target.unwrap();
        fs.push(f_hat);
        let (bars, _) = poisson_error_bars(&counts, &settings, &target, 100, 10_000 + seed)
            .unwrap();
        if (f_hat - f_true).abs() <= bars.std {
            covered += 1;
        }
    }
    let mean_f = fs.iter().sum::<f64>() / fs.len() as f64;
    let mean_ok = (mean_f - 0.957).abs() <= 0.01;
    let coverage_ok = (55..=80).contains(&(covered as i32));
    let fast_enough = start.elapsed().as_secs_f64() < 120.0;
    println!(
        "  info: mean F {mean_f:.5} (target 0.957±0.01), 1-sigma coverage {covered}/100 \
         (band 55–80), elapsed {:.1} s",
        start.elapsed().as_secs_f64()
    );

    report(
        3,
        "tomography fidelity + 1-sigma coverage",
        exact_ok && mean_ok && coverage_ok && fast_enough,
    );
}

#[test]
fn criterion_4_bandwidth_arithmetic() {
    let ghz = wavelength_bw_to_freq(57e-12, 1553.48e-9).unwrap() / 1e9;
    let conversion_ok = (ghz - 7.09).abs() / 7.09 < 0.005;

    let li = idler_wavelength(776.74e-9, 2.0 * 776.74e-9).unwrap();
    let degeneracy_ok = li == 1553.48e-9;

    report(4, "57 pm = 7.09 GHz, 776.74 -> 1553.48", conversion_ok && degeneracy_ok);
}

#[test]
fn criterion_5_spectral_model() {
    // Numeric FWHM of a pure sinc² profile vs the analytic half-max root.
    let gamma = 50e-12;
    let spec = SpectralAmplitude::sample(193e12, 8.0 / gamma, 16_001, |w| {
        C64::new(sinc(gamma * w), 0.0)
    })
    .unwrap();
    let fwhm = spec.fwhm_rad_s().unwrap();
    let analytic = 2.0 * SINC2_HALF_MAX_X / gamma;
    let halfmax_ok = (fwhm - analytic).abs() / analytic < 1e-3;

    // FWHM ∝ 1/L over a 4× length range.
    let (disp, _) = ktp_fixture();
    let mut widths = Vec::new();
    for length_mm in [5.0, 10.0, 20.0] {
        let g = QpmGrating::new(1.3e-6, 3, length_mm * 1e-3).unwrap();
        let root = solve_degeneracy(&disp, &g).unwrap();
        let span = auto_half_span(&disp, &g, root, 6.0).unwrap();
        widths.push(
            bspdc_spectrum(&disp, &g, root, span, 4001)
                .unwrap()
                .fwhm_rad_s()
                .unwrap(),
        );
    }
    let scaling_ok = (widths[0] / widths[2] - 4.0).abs() / 4.0 < 0.02
        && (widths[0] / widths[1] - 2.0).abs() / 2.0 < 0.02;

    // A 132 pm Lorentzian étalon changes the ~57 pm main lobe by < 15%.
    let (disp, g) = ktp_fixture();
    let root = solve_degeneracy(&disp, &g).unwrap();
    let span = auto_half_span(&disp, &g, root, 6.0).unwrap();
    let spec = bspdc_spectrum(&disp, &g, root, span, 8001).unwrap();
    let filter = FilterSpec {
        center_m: 2.0 * root,
        fwhm_m: 132e-12,
        shape: FilterShape::Lorentzian,
        fsr_m: None,
    };
    let filtered = apply_filter(&spec, &filter).unwrap();
    let w0 = spec.fwhm_m().unwrap();
    let w1 = filtered.fwhm_m().unwrap();
    let filter_ok = (w1 - w0).abs() / w0 < 0.15;

    report(
        5,
        "sinc2 FWHM oracle, 1/L scaling, FPF",
        halfmax_ok && scaling_ok && filter_ok,
    );
}

#[test]
fn criterion_6_hom() {
    // Numeric trace vs the closed-form triangle, everywhere within 1%.
    let gamma = 50e-12;
    let spec = SpectralAmplitude::sample(193e12, 200.0 / gamma, 20_001, |w| {
        C64::new(sinc(gamma * w), 0.0)
    })
    .unwrap();
    let delays = linspace(-3.0 * gamma, 3.0 * gamma, 301);
    let kappa = 0.901;
    let trace = hom_trace(&spec, &delays, kappa).unwrap();
    let max_err = trace
        .delay_s
        .iter()
        .zip(&trace.probability)
        .map(|(&t, &p)| (p - sinc_dip_closed_form(t, gamma, kappa)).abs())
        .fold(0.0, f64::max);
    let shape_ok = max_err < 0.01;

    // Raw visibility equals κ.
    let p_min = trace.probability.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw_vis = (0.5 - p_min) / 0.5;
    let raw_ok = (raw_vis - 0.901).abs() < 0.005;

    // Accidental-corrected pipeline on the counts fixture.
    let (raw, corrected) = visibility_with_accidentals(99.0, 1000.0, 72.0).unwrap();
    let fixture_ok = (raw - 0.901).abs() < 1e-3 && (corrected - 0.971).abs() < 1e-3;

    // Base width of the reference-source model, reported next to the
    // measured 155 ps (model-dependent; informational, not gated).
    let (disp, g) = ktp_fixture();
    let root = solve_degeneracy(&disp, &g).unwrap();
    let span = auto_half_span(&disp, &g, root, 6.0).unwrap();
    let model_spec = bspdc_spectrum(&disp, &g, root, span, 4001).unwrap();
    let model_delays = linspace(-300e-12, 300e-12, 601);
    let model_trace = hom_trace(&model_spec, &model_delays, 1.0).unwrap();
    let fit = fit_triangle(&model_trace).unwrap();
    println!(
        "  info: model HOM base width {:.1} ps (measured reference: 155 ps)",
        fit.base_width_s * 1e12
    );

    report(6, "HOM triangle + visibilities", shape_ok && raw_ok && fixture_ok);
}

/// Noiseless fringe records: expected coincidences on the grid, at a count
/// scale where integer rounding is negligible.
fn noiseless_fringe(rho: &Rho, basis: Label, grid: &[f64]) -> Vec<CountsRecord> {
    let noise = NoiseModel::ideal();
    let (qr, hr) = basis.analyzer_angles();
    grid.iter()
        .map(|&theta| {
            let setting = Setting {
                qwp_r: qr,
                hwp_r: hr,
                qwp_l: 0.0,
                hwp_l: theta,
            };
            let mu = expected_coincidences(rho, &setting, 1e12, 1.0, &noise).unwrap();
            CountsRecord {
                qwp_r: qr.to_degrees(),
                hwp_r: hr.to_degrees(),
                qwp_l: 0.0,
                hwp_l: theta.to_degrees(),
                coincidences: mu.round() as u64,
                singles_r: 1,
                singles_l: 1,
                duration_s: 1.0,
                window_s: 1e-9,
            }
        })
        .collect()
}

#[test]
fn criterion_7_fringes() {
    let grid = linspace(0.0, std::f64::consts::FRAC_PI_2, 19);

    // Ideal singlet: visibility 1 within 1e-6 in all four bases.
    let sing = pure_density(&singlet());
    let singlet_ok = [Label::H, Label::V, Label::D, Label::A].iter().all(|&b| {
        let fit = fit_fringe(&noiseless_fringe(&sing, b, &grid)).unwrap();
        (fit.visibility - 1.0).abs() < 1e-6
    });

    // Werner V: fitted visibility equals V within the fit error.
    let mut werner_ok = true;
    for (k, v) in [0.90, 0.95, 0.99].iter().enumerate() {
        let rho = werner_state(&singlet(), *v).unwrap();
        let records = fringe_scan(
            &rho,
            Label::D,
            &grid,
            2e4,
            1.0,
            1e-9,
            &NoiseModel::ideal(),
            31 + k as u64,
        )
        .unwrap();
        let fit = fit_fringe(&records).unwrap();
        if (fit.visibility - v).abs() > 3.0 * fit.visibility_err.max(1e-4) {
            werner_ok = false;
        }
    }

    report(7, "fringe visibilities", singlet_ok && werner_ok);
}

#[test]
fn criterion_8_physicality_properties() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);

    // 1000 random-angle waveplate unitarity checks.
    let mut unitarity_ok = true;
    for _ in 0..1000 {
        let theta = rng.gen_range(-10.0..10.0);
        for m in [hwp_matrix(theta), qwp_matrix(theta)] {
            let dev = (m.adjoint() * m - nalgebra::Matrix2::identity()).norm();
            if dev > 1e-12 {
                unitarity_ok = false;
            }
        }
    }

    // Tsirelson bound on 1000 random physical states.
    let tsirelson = 2.0 * std::f64::consts::SQRT_2;
    let sets = methods_settings();
    let mut tsirelson_ok = true;
    for _ in 0..1000 {
        let rho = random_physical_state(&mut rng);
        let e: Vec<f64> = sets.iter().map(|(a, b)| predict_e(&rho, a, b)).collect();
        let s = (e[0] - e[1] + e[2] + e[3]).abs();
        if s > tsirelson + 1e-9 {
            tsirelson_ok = false;
        }
    }

    // MLE physicality on 100 noisy reconstructions.
    let settings = TomographySettings::standard();
    let rho = werner_state(&singlet(), 0.9).unwrap();
    let mut mle_ok = true;
    for seed in 0..100u64 {
        let records = simulate_tomography_counts(
            &rho,
            &settings,
            2000.0,
            &NoiseModel::ideal(),
            1e-9,
            1.0,
            seed,
        )
        .unwrap();
        let counts = align_counts(&settings, &records).unwrap();
        let res = mle_reconstruct(&counts, &settings, None).unwrap();
        if !is_physical(&res.rho) {
            mle_ok = false;
        }
    }

    report(
        8,
        "unitarity, Tsirelson, MLE physicality",
        unitarity_ok && tsirelson_ok && mle_ok,
    );
}

/// Random physical two-qubit state from a random complex matrix G:
/// ρ = GG†/Tr(GG†).
fn random_physical_state<R: rand::Rng>(rng: &mut R) -> Rho {
    let mut g = nalgebra::Matrix4::<C64>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            g[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let a = g * g.adjoint();
    let tr = a.trace().re;
    a / C64::new(tr, 0.0)
}

#[test]
fn acceptance_sanity_cross_checks() {
    // Fidelity arithmetic used throughout the gate.
    let w = werner_state(&singlet(), 0.943).unwrap();
    assert!((fidelity(&w, &singlet()).unwrap() - 0.95725).abs() < 1e-12);
    assert!((fidelity(&w, &eq1_state(std::f64::consts::PI)).unwrap() - 0.95725).abs() < 1e-12);
}
