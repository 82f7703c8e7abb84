//! Experiment-layer checks: Legendre rate function, Monte-Carlo samplers,
//! LDP/CLT/LCLT statistics, and the aperiodicity/lattice classifiers.

use quenched_core::bv::GridFunction;
use quenched_core::limits::{
    aperiodicity_scan, birkhoff_samples, birkhoff_samples_range, clt_experiment, eta_bar,
    lattice_detect, lclt_experiment, lclt_periodic_experiment, ldp_experiment, legendre_rate,
    sample_start_points, Classification, RateFunction, SampleBatch, SamplePlan, ScanParams,
    StartLaw,
};
use quenched_core::rds::{DrivingSystem, MapFamily, PiecewiseLinearMap};
use quenched_core::rng;
use quenched_core::spectral::{
    center_observable, lambda_curve, Axis, CurveParams, LambdaCurve, Observable, ObservableKind,
};
use quenched_core::stats;
use quenched_core::Error;

const TAU: f64 = std::f64::consts::TAU;

fn doubling_family() -> MapFamily {
    MapFamily::new(vec![PiecewiseLinearMap::doubling()]).unwrap()
}

fn const_driving() -> DrivingSystem {
    DrivingSystem::bernoulli(vec![1.0], 1).unwrap()
}

fn centered_cos(family: &MapFamily, driving: &DrivingSystem, n_cells: usize) -> Observable {
    center_observable(&Observable::cosine(1), family, driving, (0, 1), n_cells, 1e-10).unwrap()
}

fn synthetic_quadratic_curve(sigma2: f64) -> LambdaCurve {
    // Lambda(theta) = sigma2/2 * theta^2 on a symmetric grid.
    let thetas: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.02).collect();
    let values: Vec<f64> = thetas.iter().map(|&t| 0.5 * sigma2 * t * t).collect();
    LambdaCurve {
        axis: Axis::Real,
        thetas,
        values,
        n_orbit: 0,
        n_burn: 0,
        n_cells: 0,
        d1_at_0: 0.0,
        d2_at_0: sigma2,
        convexity_violations: Vec::new(),
    }
}

#[test]
fn legendre_of_quadratic_is_exact() {
    // Lambda = theta^2 / 4 (Sigma^2 = 1/2): c(eps) = eps^2 exactly.
    let curve = synthetic_quadratic_curve(0.5);
    let eps = [0.0, 0.02, 0.05, 0.1, 0.15];
    let rate = legendre_rate(&curve, &eps).unwrap();
    for (&e, (&c, &t_star)) in eps.iter().zip(rate.c_values.iter().zip(&rate.theta_star)) {
        let expect = e * e;
        assert!((c - expect).abs() < 1e-10, "c({e}) = {c}, expect {expect}");
        assert!((t_star - 2.0 * e).abs() < 1e-8, "theta*({e}) = {t_star}");
    }
    assert!(rate.c_values[0].abs() < 1e-10);
    assert!(rate.theta_star[0].abs() < 1e-8);
    // Nonnegative, nondecreasing, convex along the grid.
    for w in rate.c_values.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
}

#[test]
fn legendre_rejects_nonconvex_curves() {
    let mut curve = synthetic_quadratic_curve(0.5);
    curve.values[20] = 0.05; // spike at theta = 0
    curve.convexity_violations = vec![19, 20, 21];
    assert!(matches!(
        legendre_rate(&curve, &[0.05]),
        Err(Error::NonConvexCurve { violations: 3 })
    ));
}

#[test]
fn start_points_identity_cdf_returns_uniforms() {
    let v0 = GridFunction::ones(256).unwrap();
    let pts = sample_start_points(&v0, 1000, 99).unwrap();
    for (i, &x) in pts.iter().enumerate() {
        let u = rng::uniform_at(99, rng::streams::START_POINT, i as u64);
        assert_eq!(x.to_bits(), u.to_bits(), "sample {i} must be the raw uniform");
    }
}

#[test]
fn start_points_respect_support() {
    let n = 128;
    let v0 = GridFunction::from_midpoints(n, |x| if x < 0.5 { 2.0 } else { 0.0 }).unwrap();
    let pts = sample_start_points(&v0, 5000, 7).unwrap();
    assert!(pts.iter().all(|&x| x < 0.5));
}

#[test]
fn start_points_chi_square_gof() {
    // 1e5 samples from a nonuniform density, 64 bins: the chi-square
    // statistic stays below the 1% critical value of chi2(63).
    let n = 64;
    let v0 = GridFunction::from_midpoints(n, |x| 1.0 + 0.5 * (TAU * x).sin()).unwrap();
    let count = 100_000usize;
    let pts = sample_start_points(&v0, count, 4242).unwrap();
    let mut observed = vec![0.0f64; n];
    for &x in &pts {
        observed[((x * n as f64) as usize).min(n - 1)] += 1.0;
    }
    let mut chi2 = 0.0;
    for (i, &o) in observed.iter().enumerate() {
        let p = v0.values()[i].re / n as f64;
        let e = count as f64 * p;
        chi2 += (o - e) * (o - e) / e;
    }
    // Wilson-Hilferty approximation of the chi2(63) 99th percentile.
    let nu = 63.0f64;
    let z = 2.326_347_874_040_841; // Phi^{-1}(0.99)
    let crit = nu * (1.0 - 2.0 / (9.0 * nu) + z * (2.0 / (9.0 * nu)).sqrt()).powi(3);
    assert!(chi2 < crit, "chi2 = {chi2}, critical {crit}");
}

#[test]
fn rejects_negative_densities() {
    let v0 = GridFunction::from_real(vec![1.5, -0.5, 1.0, 0.0]).unwrap();
    assert!(matches!(
        sample_start_points(&v0, 10, 1),
        Err(Error::InvalidDensity { cell: 1, .. })
    ));
}

#[test]
fn zero_observable_gives_zero_sums() {
    let fam = doubling_family();
    let drv = const_driving();
    let zero = GridFunction::from_real(vec![0.0; 64]).unwrap();
    let raw = Observable::new(ObservableKind::Table { per_symbol: vec![zero] }).unwrap();
    let obs = center_observable(&raw, &fam, &drv, (0, 1), 64, 1e-10).unwrap();
    let plan =
        SamplePlan { t0: 0, n: 50, count: 100, seed: 5, start_law: StartLaw::Lebesgue, n_cells: 64 };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    assert!(batch.sums.iter().all(|&s| s == 0.0));
}

#[test]
fn single_step_mean_within_clt_error() {
    // n = 1, start law Lebesgue: S_1 = cos(2 pi x), mean 0, variance 1/2.
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 256);
    let count = 40_000usize;
    let plan =
        SamplePlan { t0: 0, n: 1, count, seed: 11, start_law: StartLaw::Lebesgue, n_cells: 256 };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let mean = stats::mean(&batch.sums);
    let bound = 3.0 * (0.5f64).sqrt() / (count as f64).sqrt();
    assert!(mean.abs() < bound, "mean {mean} vs 3-sigma bound {bound}");
}

#[test]
fn sampler_is_chunk_invariant() {
    // Concatenating disjoint ranges reproduces the full batch bit for bit,
    // regardless of how the index space is partitioned.
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 128);
    let plan =
        SamplePlan { t0: 3, n: 64, count: 1000, seed: 77, start_law: StartLaw::Lebesgue, n_cells: 128 };
    let full = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let mut pieces = Vec::new();
    for (lo, hi) in [(0usize, 137usize), (137, 640), (640, 1000)] {
        pieces.extend(birkhoff_samples_range(&fam, &drv, &obs, &plan, lo, hi).unwrap());
    }
    assert_eq!(full.sums.len(), pieces.len());
    for (a, b) in full.sums.iter().zip(&pieces) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn disjoint_seeds_give_uncorrelated_batches() {
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 128);
    let count = 20_000usize;
    let mk = |seed| {
        birkhoff_samples(
            &fam,
            &drv,
            &obs,
            &SamplePlan { t0: 0, n: 100, count, seed, start_law: StartLaw::Lebesgue, n_cells: 128 },
        )
        .unwrap()
    };
    let a = mk(1);
    let b = mk(2);
    let corr = stats::correlation(&a.sums, &b.sums);
    assert!(corr.abs() <= 3.0 / (count as f64).sqrt(), "correlation {corr}");
}

#[test]
fn start_laws_agree_when_density_is_uniform() {
    // v0 = 1: mu_omega sampling and Lebesgue sampling are identical by
    // construction for Lebesgue-preserving families (backward path).
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 128);
    let base =
        SamplePlan { t0: 0, n: 32, count: 500, seed: 9, start_law: StartLaw::Lebesgue, n_cells: 128 };
    let a = birkhoff_samples(&fam, &drv, &obs, &base).unwrap();
    let b = birkhoff_samples(
        &fam,
        &drv,
        &obs,
        &SamplePlan { start_law: StartLaw::MuOmega, ..base },
    )
    .unwrap();
    for (x, y) in a.sums.iter().zip(&b.sums) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn clt_statistic_self_test_on_gaussian_input() {
    // Synthetic sums drawn from N(0, sigma2 * n): the KS distance stays
    // under the 1% Kolmogorov critical value 1.628 / sqrt(count).
    let sigma2 = 0.5;
    let n = 400usize;
    let count = 50_000usize;
    let mut sums = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let u1 = rng::uniform_at(0xAB, 50, 2 * i).max(f64::MIN_POSITIVE);
        let u2 = rng::uniform_at(0xAB, 50, 2 * i + 1);
        let z = (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos();
        sums.push(z * (sigma2 * n as f64).sqrt());
    }
    let batch =
        SampleBatch { t0: 0, n, count, seed: 0xAB, sums, start_law: StartLaw::Lebesgue };
    let rep = clt_experiment(&batch, sigma2).unwrap();
    let crit = 1.628 / (count as f64).sqrt();
    assert!(rep.ks_distance < crit, "ks {} vs {crit}", rep.ks_distance);
    assert!((rep.empirical_variance - sigma2).abs() < 0.03 * sigma2);
}

#[test]
fn clt_refuses_degenerate_variance() {
    let batch = SampleBatch {
        t0: 0,
        n: 10,
        count: 4,
        seed: 0,
        sums: vec![0.0; 4],
        start_law: StartLaw::Lebesgue,
    };
    assert!(matches!(
        clt_experiment(&batch, 0.0),
        Err(Error::DegenerateVariance { .. })
    ));
}

#[test]
fn clt_on_doubling_cos_moderate_scale() {
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 256);
    let count = 30_000usize;
    let plan =
        SamplePlan { t0: 0, n: 500, count, seed: 20, start_law: StartLaw::Lebesgue, n_cells: 256 };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let rep = clt_experiment(&batch, 0.5).unwrap();
    assert!(rep.ks_distance <= 0.02, "ks {}", rep.ks_distance);
    assert!((rep.empirical_variance - 0.5).abs() <= 0.03 * 0.5, "var {}", rep.empirical_variance);
}

#[test]
fn ldp_rows_flag_empty_tails_and_move_toward_rate() {
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 512);
    let params = CurveParams { n_orbit: 4000, n_burn: 256, n_cells: 512, fd_step: 1e-2 };
    let grid: Vec<f64> = (-12..=12).map(|k| k as f64 * 0.05).collect();
    let curve = lambda_curve(&fam, &drv, &obs, Axis::Real, &grid, &params).unwrap();
    let rate = legendre_rate(&curve, &[0.1, 10.0]).unwrap();

    let count = 50_000usize;
    let mut batches = Vec::new();
    for n in [100usize, 200] {
        let plan =
            SamplePlan { t0: 0, n, count, seed: 33, start_law: StartLaw::Lebesgue, n_cells: 512 };
        batches.push(birkhoff_samples(&fam, &drv, &obs, &plan).unwrap());
    }
    let rows = ldp_experiment(&batches, &rate);
    assert_eq!(rows.len(), 4);
    // eps = 10 is beyond any achievable average: empty tail, flagged.
    for row in rows.iter().filter(|r| r.epsilon == 10.0) {
        assert_eq!(row.p_hat, 0.0);
        assert!(row.low_stat);
        assert!(row.rate_hat.is_infinite());
    }
    // eps = 0.1: the empirical rate approaches c(eps) as n grows.
    let r100 = rows.iter().find(|r| r.epsilon == 0.1 && r.n == 100).unwrap();
    let r200 = rows.iter().find(|r| r.epsilon == 0.1 && r.n == 200).unwrap();
    assert!(!r100.low_stat && !r200.low_stat);
    assert!(
        r200.rel_gap <= r100.rel_gap,
        "gap should shrink with n: {} -> {}",
        r100.rel_gap,
        r200.rel_gap
    );
}

#[test]
fn lclt_tail_statistic_vanishes() {
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 128);
    let plan =
        SamplePlan { t0: 0, n: 200, count: 5000, seed: 8, start_law: StartLaw::Lebesgue, n_cells: 128 };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let far = batch.sums.iter().map(|s| s.abs()).fold(0.0, f64::max) + 10.0;
    let rep = lclt_experiment(&batch, 0.5, (-0.25, 0.25), &[far]).unwrap();
    assert_eq!(rep.statistic[0], 0.0);
    assert!(rep.target[0] < 1e-6);
}

#[test]
fn lclt_statistic_linear_in_interval_length() {
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 256);
    let count = 50_000usize;
    let plan =
        SamplePlan { t0: 0, n: 500, count, seed: 12, start_law: StartLaw::Lebesgue, n_cells: 256 };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let a = lclt_experiment(&batch, 0.5, (-0.25, 0.25), &[0.0]).unwrap();
    let b = lclt_experiment(&batch, 0.5, (-0.5, 0.5), &[0.0]).unwrap();
    let ratio = b.statistic[0] / a.statistic[0];
    assert!((ratio - 2.0).abs() < 0.2, "doubling |J| scales the statistic: ratio {ratio}");
}

#[test]
fn lclt_total_mass_sanity() {
    // Trapezoid of the statistic over s in [-4 Sigma sqrt(n), +4 ...],
    // divided by |J| and by Sigma sqrt(n), integrates to ~1.
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 256);
    let count = 50_000usize;
    let n = 500usize;
    let plan =
        SamplePlan { t0: 0, n, count, seed: 14, start_law: StartLaw::Lebesgue, n_cells: 256 };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let sigma2 = 0.5f64;
    let sn = (sigma2 * n as f64).sqrt();
    let s_grid: Vec<f64> = (-40..=40).map(|k| k as f64 / 40.0 * 4.0 * sn).collect();
    let rep = lclt_experiment(&batch, sigma2, (-0.25, 0.25), &s_grid).unwrap();
    let mut integral = 0.0;
    for i in 1..s_grid.len() {
        integral +=
            0.5 * (rep.statistic[i] + rep.statistic[i - 1]) * (s_grid[i] - s_grid[i - 1]);
    }
    let mass = integral / (0.5 * sn);
    assert!((mass - 1.0).abs() <= 0.05, "total mass {mass}");
}

#[test]
fn periodic_lclt_lattice_arithmetic() {
    // g = 1_[1/2,1) - 1/2 on doubling: sums live on -n/2 + Z exactly.
    let fam = doubling_family();
    let drv = const_driving();
    let n_cells = 256;
    let raw = Observable::indicator(0.5, 0.5);
    let obs = center_observable(&raw, &fam, &drv, (0, 1), n_cells, 1e-10).unwrap();
    let lattice = lattice_detect(&obs, n_cells, 1e-9).unwrap();
    assert_eq!(lattice.span, 1.0);
    assert!((lattice.eta[0] + 0.5).abs() < 1e-12);

    let n = 100usize;
    let count = 20_000usize;
    let plan =
        SamplePlan { t0: 0, n, count, seed: 21, start_law: StartLaw::Lebesgue, n_cells };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let ebar = eta_bar(&obs, &lattice, &drv, 0, n).unwrap();
    assert!((ebar + n as f64 / 2.0).abs() < 1e-9, "eta_bar {ebar}");

    // n even: sums are integers, exactly.
    for &s in batch.sums.iter().take(100) {
        assert_eq!(s, s.round());
    }

    let sigma2 = 0.25;
    let sn = (sigma2 * n as f64).sqrt();
    let s_grid: Vec<f64> = (-10..=10).map(|k| k as f64 / 10.0 * 2.0 * sn).collect();
    let rep =
        lclt_periodic_experiment(&batch, sigma2, (-0.25, 0.25), &s_grid, ebar, 1.0).unwrap();
    assert_eq!(rep.off_lattice_mass, Some(0.0));
    assert!(rep.periodic);

    // An interval shorter than the span placed strictly between lattice
    // points sees nothing: target 0 and statistic 0.
    let between = (ebar + 0.3, ebar + 0.7);
    let rep2 = lclt_periodic_experiment(&batch, sigma2, between, &[0.0], ebar, 1.0).unwrap();
    assert_eq!(rep2.statistic[0], 0.0);
    assert_eq!(rep2.target[0], 0.0);
}

#[test]
fn periodic_lclt_matches_lattice_target_moderate_scale() {
    let fam = doubling_family();
    let drv = const_driving();
    let n_cells = 256;
    let raw = Observable::indicator(0.5, 0.5);
    let obs = center_observable(&raw, &fam, &drv, (0, 1), n_cells, 1e-10).unwrap();
    let lattice = lattice_detect(&obs, n_cells, 1e-9).unwrap();
    let n = 1000usize;
    let count = 100_000usize;
    let plan =
        SamplePlan { t0: 0, n, count, seed: 22, start_law: StartLaw::Lebesgue, n_cells };
    let batch = birkhoff_samples(&fam, &drv, &obs, &plan).unwrap();
    let ebar = eta_bar(&obs, &lattice, &drv, 0, n).unwrap();
    let sigma2 = 0.25;
    let sn = (sigma2 * n as f64).sqrt();
    let s_grid: Vec<f64> = (-12..=12).map(|k| k as f64 / 12.0 * 3.0 * sn).collect();
    let rep =
        lclt_periodic_experiment(&batch, sigma2, (-0.25, 0.25), &s_grid, ebar, 1.0).unwrap();
    assert!(rep.sup_error <= 0.08, "sup error {}", rep.sup_error);
    assert_eq!(rep.off_lattice_mass, Some(0.0));
}

#[test]
fn lattice_detect_examples() {
    // Span 3: values in {-3/2, 3/2}, gaps in 3Z.
    let obs3 = Observable::indicator(0.5, 0.0);
    let scaled = GridFunction::from_midpoints(256, |x| {
        3.0 * (if x >= 0.5 { 1.0 } else { 0.0 }) - 1.5
    })
    .unwrap();
    let table = Observable::new(ObservableKind::Table { per_symbol: vec![scaled] }).unwrap();
    let l = lattice_detect(&table, 256, 1e-9).unwrap();
    assert_eq!(l.span, 3.0);
    // Plain indicator: span 1.
    let l = lattice_detect(&obs3, 256, 1e-9).unwrap();
    assert_eq!(l.span, 1.0);
    // Cosine: no lattice.
    assert!(lattice_detect(&Observable::cosine(1), 256, 1e-9).is_none());
}

#[test]
fn aperiodicity_scan_classifies_cosine_as_aperiodic() {
    let fam = doubling_family();
    let drv = const_driving();
    let obs = centered_cos(&fam, &drv, 512);
    let t_grid: Vec<f64> =
        (0..20).map(|k| 0.5 + k as f64 / 19.0 * (std::f64::consts::PI - 0.5)).collect();
    let params = ScanParams {
        n_orbit: 4000,
        n_burn: 256,
        n_cells: 512,
        fit_steps: 40,
        lattice_tol: 1e-9,
        seed: 0x5eed,
    };
    let rep = aperiodicity_scan(&fam, &drv, &obs, &t_grid, &params).unwrap();
    assert_eq!(rep.classification, Classification::AperiodicEvidence);
    assert!(rep.lambda_it.iter().all(|&l| l <= -1e-3), "{:?}", rep.lambda_it);
    for &(_, rho) in &rep.norm_decay_fits {
        assert!(rho < 1.0, "norm decay rho {rho}");
    }
}

#[test]
fn aperiodicity_scan_classifies_lattice_as_periodic() {
    let fam = doubling_family();
    let drv = const_driving();
    let raw = Observable::indicator(0.5, 0.5);
    let obs = center_observable(&raw, &fam, &drv, (0, 1), 512, 1e-10).unwrap();
    let t_grid: Vec<f64> =
        (0..8).map(|k| 0.5 + k as f64 / 7.0 * (std::f64::consts::PI - 0.5)).collect();
    let params = ScanParams {
        n_orbit: 2000,
        n_burn: 256,
        n_cells: 512,
        fit_steps: 32,
        lattice_tol: 1e-9,
        seed: 0x5eed,
    };
    let rep = aperiodicity_scan(&fam, &drv, &obs, &t_grid, &params).unwrap();
    match &rep.classification {
        Classification::PeriodicLattice { span, eta } => {
            assert_eq!(*span, 1.0);
            assert!((eta[0] + 0.5).abs() < 1e-12);
        }
        other => panic!("expected periodic, got {other:?}"),
    }
}

#[test]
fn aperiodicity_scan_zero_observable_degenerate() {
    let fam = doubling_family();
    let drv = const_driving();
    let zero = GridFunction::from_real(vec![0.0; 256]).unwrap();
    let raw = Observable::new(ObservableKind::Table { per_symbol: vec![zero] }).unwrap();
    let obs = center_observable(&raw, &fam, &drv, (0, 1), 256, 1e-10).unwrap();
    let params = ScanParams {
        n_orbit: 500,
        n_burn: 64,
        n_cells: 256,
        fit_steps: 16,
        lattice_tol: 1e-9,
        seed: 1,
    };
    let rep = aperiodicity_scan(&fam, &drv, &obs, &[0.5, 1.0], &params).unwrap();
    match &rep.classification {
        Classification::PeriodicLattice { span, .. } => assert_eq!(*span, 0.0),
        other => panic!("expected degenerate periodic, got {other:?}"),
    }
    // Lambda(it) = 0 for the zero observable.
    assert!(rep.lambda_it.iter().all(|&l| l.abs() < 1e-10));
    assert!(!rep.notes.is_empty());
}

#[test]
fn rate_function_lookup() {
    let curve = synthetic_quadratic_curve(0.5);
    let rate: RateFunction = legendre_rate(&curve, &[0.05, 0.1]).unwrap();
    assert!(rate.c_at(0.05).is_some());
    assert!(rate.c_at(0.33).is_none());
    assert!(rate.theta_plus > 0.0);
    assert!(rate.epsilon0 > 0.0);
}
