//! Experiment dispatch: build the model, execute the requested pipeline,
//! evaluate tolerance checks, and write artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde_json::json;

use quenched_core::limits::{
    aperiodicity_scan, birkhoff_samples_range, clt_experiment, eta_bar, lattice_detect,
    lclt_experiment, lclt_periodic_experiment, ldp_experiment, legendre_rate, Classification,
    SampleBatch, SamplePlan, ScanParams, StartLaw,
};
use quenched_core::rds::{validate_family, DrivingSystem, MapFamily};
use quenched_core::spectral::{
    center_observable, equivariant_density, lambda_curve, variance, Axis, CurveParams,
    Observable, MAX_HORIZON,
};
use quenched_core::transfer::build_ulam;
use quenched_core::Error as CoreError;

use crate::artifacts::{
    dump_matrix, write_artifact, write_summary, Check, Csv, CsvField, RunSummary,
};
use crate::config::{Expectation, ExperimentPlan, KindParams, Sigma2Spec};
use crate::model::{build_driving, build_family, build_raw_observable};
use crate::parallel::{map_chunked, SAMPLE_CHUNK};
use crate::svg;

/// Execute a plan and write all artifacts under `plan.out_dir`. The summary
/// is always written, even when the experiment refuses to run (degenerate
/// variance, missing aperiodicity evidence); `passed` reflects the
/// conjunction of all checks.
pub fn run(plan: &ExperimentPlan, mut warnings: Vec<String>) -> Result<RunSummary> {
    let started = Instant::now();
    let family = build_family(plan)?;
    let driving = build_driving(plan)?;
    let out_dir = PathBuf::from(&plan.out_dir);

    let outcome = execute(plan, &family, &driving, &mut warnings);
    let (checks, payload, csvs, error) = match outcome {
        Ok(r) => (r.checks, r.payload, r.csvs, None),
        Err(ExperimentFailure::Refused { message, payload }) => {
            (Vec::new(), payload, Vec::new(), Some(message))
        }
        Err(ExperimentFailure::Fatal(e)) => return Err(e),
    };

    let mut artifacts = Vec::new();
    for (name, content) in &csvs {
        let path = write_artifact(&out_dir, name, content)?;
        artifacts.push(path.display().to_string());
    }
    if plan.dump_matrices {
        for (i, map) in family.maps().iter().enumerate() {
            let m = build_ulam(map, plan.n_cells)?;
            let name = format!("ulam_map{i}_{}.txt", plan.seed);
            let path = write_artifact(&out_dir, &name, &dump_matrix(&m, i))?;
            artifacts.push(path.display().to_string());
        }
    }
    if plan.plots {
        if let Some((csv_name, _)) = csvs.first() {
            match plan.kind.name() {
                kind @ ("lambda" | "ldp" | "lclt") => {
                    let csv = std::fs::read_to_string(out_dir.join(csv_name))?;
                    match svg::plot(kind, &csv) {
                        Ok(svg) => {
                            let name = format!("{kind}_{}.svg", plan.seed);
                            let path = write_artifact(&out_dir, &name, &svg)?;
                            artifacts.push(path.display().to_string());
                        }
                        Err(e) => warnings.push(format!("plot skipped: {e}")),
                    }
                }
                other => warnings.push(format!("no plot defined for kind `{other}`")),
            }
        }
    }

    let passed = error.is_none() && checks.iter().all(|c| c.pass);
    let mut summary = RunSummary {
        kind: plan.kind.name(),
        seed: plan.seed,
        passed,
        error,
        checks,
        warnings,
        artifacts,
        wall_time_ms: started.elapsed().as_millis(),
        payload,
        plan: plan.clone(),
    };
    let sum_name = format!("{}_{}.json", plan.kind.name(), plan.seed);
    let path = write_summary(&out_dir, &sum_name, &summary)?;
    summary.artifacts.push(path.display().to_string());
    Ok(summary)
}

struct ExperimentResult {
    checks: Vec<Check>,
    payload: serde_json::Value,
    /// `(file name, content)` pairs; the first entry is the primary CSV.
    csvs: Vec<(String, String)>,
}

enum ExperimentFailure {
    /// The experiment refused to run (recorded in the summary, nonzero exit).
    Refused { message: String, payload: serde_json::Value },
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for ExperimentFailure {
    fn from(e: anyhow::Error) -> Self {
        ExperimentFailure::Fatal(e)
    }
}

impl From<CoreError> for ExperimentFailure {
    fn from(e: CoreError) -> Self {
        ExperimentFailure::Fatal(anyhow!(e.to_string()))
    }
}

type ExpResult = std::result::Result<ExperimentResult, ExperimentFailure>;

/// Fiber-time window that covers every centering lookup of the run.
fn centering_window(plan: &ExperimentPlan) -> (i64, i64) {
    let max_h = MAX_HORIZON as i64;
    match &plan.params {
        KindParams::Density { t, .. } => (t - 2 * max_h, t + max_h),
        KindParams::Lambda { n_orbit, n_burn, .. } => {
            (-((*n_orbit as i64) + (*n_burn as i64) + max_h), max_h)
        }
        KindParams::Variance { n_orbit, j_max, .. } => (
            -((*n_orbit as i64) + 512 + max_h),
            *n_orbit as i64 + *j_max as i64 + max_h,
        ),
        KindParams::Ldp { ns, n_orbit, n_burn, .. } => (
            -((*n_orbit as i64) + (*n_burn as i64) + max_h),
            ns.iter().copied().max().unwrap_or(0) as i64 + max_h,
        ),
        KindParams::Clt { n, var_orbit, var_j_max, .. } => (
            -((*var_orbit as i64) + 512 + 2 * max_h),
            *n as i64 + *var_orbit as i64 + *var_j_max as i64 + max_h,
        ),
        KindParams::Lclt { n, var_orbit, var_j_max, .. } => (
            -(25_000 + (*var_orbit as i64) + 2 * max_h),
            *n as i64 + *var_orbit as i64 + *var_j_max as i64 + max_h,
        ),
        KindParams::Aperiodicity { n_orbit, n_burn, .. } => {
            (-((*n_orbit as i64) + (*n_burn as i64) + max_h), max_h)
        }
        KindParams::Validate { .. } => (0, 1),
    }
}

fn prepare_observable(
    plan: &ExperimentPlan,
    family: &MapFamily,
    driving: &DrivingSystem,
) -> Result<Observable> {
    let raw = build_raw_observable(plan);
    if plan.centered {
        let window = centering_window(plan);
        center_observable(&raw, family, driving, window, plan.n_cells, 1e-10)
            .context("centering the observable")
    } else {
        Ok(raw)
    }
}

fn sample_parallel(
    family: &MapFamily,
    driving: &DrivingSystem,
    obs: &Observable,
    sp: &SamplePlan,
    workers: usize,
) -> Result<SampleBatch> {
    // Validate inputs once; chunks then cannot fail.
    birkhoff_samples_range(family, driving, obs, sp, 0, 0)
        .map_err(|e| anyhow!(e.to_string()))
        .context("sample plan validation")?;
    let sums = map_chunked(sp.count, SAMPLE_CHUNK, workers, |lo, hi| {
        birkhoff_samples_range(family, driving, obs, sp, lo, hi).expect("validated sample plan")
    });
    Ok(SampleBatch {
        t0: sp.t0,
        n: sp.n,
        count: sp.count,
        seed: sp.seed,
        sums,
        start_law: sp.start_law,
    })
}

fn theta_grid(theta_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 3 || steps % 2 == 0 {
        bail!("theta_steps must be an odd integer >= 3 so the grid contains 0");
    }
    if theta_max <= 0.0 {
        bail!("theta_max must be positive");
    }
    let half = (steps - 1) / 2;
    Ok((0..steps)
        .map(|i| (i as i64 - half as i64) as f64 * theta_max / half as f64)
        .collect())
}

fn resolve_sigma2(
    spec: Sigma2Spec,
    family: &MapFamily,
    driving: &DrivingSystem,
    obs: &Observable,
    var_j_max: usize,
    var_orbit: u32,
    n_cells: usize,
    payload: &mut serde_json::Map<String, serde_json::Value>,
) -> std::result::Result<f64, ExperimentFailure> {
    let sigma2 = match spec {
        Sigma2Spec::Forced(v) => {
            payload.insert("sigma2_source".into(), json!("forced"));
            v
        }
        Sigma2Spec::Auto => {
            let est = variance(family, driving, obs, var_j_max, var_orbit, n_cells)?;
            payload.insert("sigma2_source".into(), json!("variance series"));
            payload.insert("sigma2_curve".into(), json!(est.sigma2_curve));
            est.sigma2_series
        }
    };
    payload.insert("sigma2".into(), json!(sigma2));
    if sigma2 < 1e-6 {
        return Err(ExperimentFailure::Refused {
            message: CoreError::DegenerateVariance { sigma2 }.to_string(),
            payload: serde_json::Value::Object(payload.clone()),
        });
    }
    Ok(sigma2)
}

fn execute(
    plan: &ExperimentPlan,
    family: &MapFamily,
    driving: &DrivingSystem,
    warnings: &mut Vec<String>,
) -> ExpResult {
    match &plan.params {
        KindParams::Density { t, theta_re, theta_im, tol } => {
            let obs = prepare_observable(plan, family, driving)?;
            let theta = Complex64::new(*theta_re, *theta_im);
            let data =
                equivariant_density(family, driving, *t, theta, &obs, plan.n_cells, *tol)?;
            let mut csv = Csv::new("cell,midpoint,v_re,v_im");
            let n = plan.n_cells;
            for (i, v) in data.v.values().iter().enumerate() {
                csv.row(&[
                    CsvField::U(i as u64),
                    CsvField::F((i as f64 + 0.5) / n as f64),
                    CsvField::F(v.re),
                    CsvField::F(v.im),
                ]);
            }
            let mut checks = vec![
                Check::at_most("pullback_residual", data.residual, *tol),
                Check::abs_within("mass_deviation", (data.v.mean() - Complex64::new(1.0, 0.0)).norm(), 1e-12),
            ];
            if theta == Complex64::new(0.0, 0.0) {
                checks.push(Check::abs_within(
                    "lambda_minus_one_at_zero_twist",
                    (data.lambda - Complex64::new(1.0, 0.0)).norm(),
                    1e-12,
                ));
                checks.push(Check::boolean("density_strictly_positive", data.v.min_real() > 0.0));
            }
            Ok(ExperimentResult {
                checks,
                payload: json!({
                    "lambda_re": data.lambda.re,
                    "lambda_im": data.lambda.im,
                    "burn_in_used": data.burn_in_used,
                    "min_cell": data.v.min_real(),
                }),
                csvs: vec![(format!("density_{}.csv", plan.seed), csv.into_string())],
            })
        }

        KindParams::Lambda {
            theta_max,
            theta_steps,
            n_orbit,
            n_burn,
            fd_step,
            tol_d1,
            tol_lambda0,
        } => {
            let obs = prepare_observable(plan, family, driving)?;
            let grid = theta_grid(*theta_max, *theta_steps)?;
            let params = CurveParams {
                n_orbit: *n_orbit,
                n_burn: *n_burn,
                n_cells: plan.n_cells,
                fd_step: *fd_step,
            };
            let curve = lambda_curve(family, driving, &obs, Axis::Real, &grid, &params)?;
            let mut csv = Csv::new("theta,lambda_value");
            for (t, v) in curve.thetas.iter().zip(&curve.values) {
                csv.row(&[CsvField::F(*t), CsvField::F(*v)]);
            }
            let zero_idx = grid.iter().position(|&x| x == 0.0).expect("grid contains 0");
            let mut checks = vec![
                Check::abs_within("lambda_at_zero", curve.values[zero_idx], *tol_lambda0),
                Check::boolean("convexity_clean", curve.convexity_violations.is_empty()),
            ];
            if plan.centered {
                checks.push(Check::abs_within("d1_at_zero", curve.d1_at_0, *tol_d1));
            } else {
                warnings.push("observable not centered: d1 check skipped".into());
            }
            Ok(ExperimentResult {
                checks,
                payload: json!({
                    "d1_at_0": curve.d1_at_0,
                    "d2_at_0": curve.d2_at_0,
                    "convexity_violations": curve.convexity_violations,
                }),
                csvs: vec![(format!("lambda_{}.csv", plan.seed), csv.into_string())],
            })
        }

        KindParams::Variance { j_max, n_orbit, tol_agree } => {
            if !plan.centered {
                return Err(ExperimentFailure::Fatal(anyhow!(
                    "variance requires a centered observable"
                )));
            }
            let obs = prepare_observable(plan, family, driving)?;
            let est = variance(family, driving, &obs, *j_max, *n_orbit, plan.n_cells)?;
            let mut csv = Csv::new("j,term");
            for (j, t) in est.terms.iter().enumerate() {
                csv.row(&[CsvField::U(j as u64), CsvField::F(*t)]);
            }
            let mut checks = vec![
                Check::boolean("series_nonnegative", est.sigma2_series >= -1e-8),
                Check::boolean("curve_nonnegative", est.sigma2_curve >= -1e-8),
            ];
            if est.degenerate {
                warnings.push(format!(
                    "degenerate variance {:e}: coboundary suspicion, estimator agreement not checked",
                    est.sigma2_series
                ));
            } else {
                let rel = (est.sigma2_series - est.sigma2_curve).abs() / est.sigma2_series;
                checks.push(Check::at_most("estimator_agreement", rel, *tol_agree));
            }
            Ok(ExperimentResult {
                checks,
                payload: json!({
                    "sigma2_series": est.sigma2_series,
                    "sigma2_curve": est.sigma2_curve,
                    "decay_rate": est.decay_rate,
                    "truncation_j": est.truncation_j,
                    "degenerate": est.degenerate,
                }),
                csvs: vec![(format!("variance_{}.csv", plan.seed), csv.into_string())],
            })
        }

        KindParams::Ldp { epsilons, ns, count, theta_max, theta_steps, n_orbit, n_burn, tol_gap } => {
            if !plan.centered {
                return Err(ExperimentFailure::Fatal(anyhow!(
                    "the large-deviation experiment requires a centered observable"
                )));
            }
            let obs = prepare_observable(plan, family, driving)?;
            let grid = theta_grid(*theta_max, *theta_steps)?;
            let params = CurveParams {
                n_orbit: *n_orbit,
                n_burn: *n_burn,
                n_cells: plan.n_cells,
                fd_step: 1e-2,
            };
            let curve = lambda_curve(family, driving, &obs, Axis::Real, &grid, &params)?;
            let rate = legendre_rate(&curve, epsilons)?;
            let mut batches = Vec::new();
            for &n in ns {
                let sp = SamplePlan {
                    t0: 0,
                    n,
                    count: *count,
                    seed: plan.seed,
                    start_law: StartLaw::MuOmega,
                    n_cells: plan.n_cells,
                };
                batches.push(sample_parallel(family, driving, &obs, &sp, plan.workers)?);
            }
            let rows = ldp_experiment(&batches, &rate);
            let mut csv = Csv::new("epsilon,n,p_hat,rate_hat,c_eps,rel_gap,low_stat");
            let mut checks = Vec::new();
            for row in &rows {
                csv.row(&[
                    CsvField::F(row.epsilon),
                    CsvField::U(row.n as u64),
                    CsvField::F(row.p_hat),
                    CsvField::F(row.rate_hat),
                    CsvField::F(row.c_eps),
                    CsvField::F(row.rel_gap),
                    CsvField::B(row.low_stat),
                ]);
                if row.low_stat {
                    warnings.push(format!(
                        "low statistics at epsilon {} n {}: {} tail hits",
                        row.epsilon,
                        row.n,
                        (row.p_hat * row.n as f64).round()
                    ));
                } else {
                    checks.push(Check::at_most(
                        &format!("rate_gap_eps{}_n{}", row.epsilon, row.n),
                        row.rel_gap,
                        *tol_gap,
                    ));
                }
            }
            // The gap must not grow with n.
            for &eps in epsilons {
                let mut per_eps: Vec<_> =
                    rows.iter().filter(|r| r.epsilon == eps && !r.low_stat).collect();
                per_eps.sort_by_key(|r| r.n);
                if per_eps.len() >= 2 {
                    let first = per_eps.first().unwrap();
                    let last = per_eps.last().unwrap();
                    checks.push(Check::boolean(
                        &format!("gap_monotone_eps{eps}"),
                        last.rel_gap <= first.rel_gap,
                    ));
                }
            }
            Ok(ExperimentResult {
                checks,
                payload: json!({
                    "theta_plus": rate.theta_plus,
                    "epsilon0": rate.epsilon0,
                    "c_values": rate.c_values,
                    "theta_star": rate.theta_star,
                }),
                csvs: vec![(format!("ldp_{}.csv", plan.seed), csv.into_string())],
            })
        }

        KindParams::Clt { n, count, sigma2, var_j_max, var_orbit, tol_ks, tol_var } => {
            if !plan.centered {
                return Err(ExperimentFailure::Fatal(anyhow!(
                    "the CLT experiment requires a centered observable"
                )));
            }
            let obs = prepare_observable(plan, family, driving)?;
            let mut payload = serde_json::Map::new();
            let sigma2 = resolve_sigma2(
                *sigma2,
                family,
                driving,
                &obs,
                *var_j_max,
                *var_orbit,
                plan.n_cells,
                &mut payload,
            )?;
            let sp = SamplePlan {
                t0: 0,
                n: *n,
                count: *count,
                seed: plan.seed,
                start_law: StartLaw::MuOmega,
                n_cells: plan.n_cells,
            };
            let batch = sample_parallel(family, driving, &obs, &sp, plan.workers)?;
            let rep = clt_experiment(&batch, sigma2).map_err(|e| match e {
                CoreError::DegenerateVariance { .. } => ExperimentFailure::Refused {
                    message: e.to_string(),
                    payload: serde_json::Value::Object(payload.clone()),
                },
                other => ExperimentFailure::Fatal(anyhow!(other.to_string())),
            })?;
            let mut csv = Csv::new("n,count,ks,var_emp,sigma2");
            csv.row(&[
                CsvField::U(*n as u64),
                CsvField::U(*count as u64),
                CsvField::F(rep.ks_distance),
                CsvField::F(rep.empirical_variance),
                CsvField::F(sigma2),
            ]);
            let checks = vec![
                Check::at_most("ks_distance", rep.ks_distance, *tol_ks),
                Check::at_most(
                    "variance_relative_error",
                    (rep.empirical_variance - sigma2).abs() / sigma2,
                    *tol_var,
                ),
            ];
            payload.insert("ks".into(), json!(rep.ks_distance));
            payload.insert("var_emp".into(), json!(rep.empirical_variance));
            Ok(ExperimentResult {
                checks,
                payload: serde_json::Value::Object(payload),
                csvs: vec![(format!("clt_{}.csv", plan.seed), csv.into_string())],
            })
        }

        KindParams::Lclt {
            n,
            count,
            j_lo,
            j_hi,
            s_points,
            s_span,
            sigma2,
            var_j_max,
            var_orbit,
            tol_sup,
            override_aperiodicity,
        } => {
            if !plan.centered {
                return Err(ExperimentFailure::Fatal(anyhow!(
                    "the local CLT experiment requires a centered observable"
                )));
            }
            let obs = prepare_observable(plan, family, driving)?;
            let mut payload = serde_json::Map::new();
            let sigma2 = resolve_sigma2(
                *sigma2,
                family,
                driving,
                &obs,
                *var_j_max,
                *var_orbit,
                plan.n_cells,
                &mut payload,
            )?;
            let lattice = lattice_detect(&obs, plan.n_cells, 1e-9);
            let sp = SamplePlan {
                t0: 0,
                n: *n,
                count: *count,
                seed: plan.seed,
                start_law: StartLaw::MuOmega,
                n_cells: plan.n_cells,
            };
            let sn = (sigma2 * *n as f64).sqrt();
            let s_grid: Vec<f64> = (0..*s_points)
                .map(|i| {
                    let frac = if *s_points > 1 { i as f64 / (*s_points as f64 - 1.0) } else { 0.5 };
                    (-1.0 + 2.0 * frac) * s_span * sn
                })
                .collect();

            let (rep, mut checks) = match lattice {
                Some(info) if info.span > 0.0 => {
                    payload.insert("lattice_span".into(), json!(info.span));
                    let ebar = eta_bar(&obs, &info, driving, 0, *n)?;
                    payload.insert("eta_bar_n".into(), json!(ebar));
                    let batch = sample_parallel(family, driving, &obs, &sp, plan.workers)?;
                    let rep = lclt_periodic_experiment(
                        &batch,
                        sigma2,
                        (*j_lo, *j_hi),
                        &s_grid,
                        ebar,
                        info.span,
                    )?;
                    let off = rep.off_lattice_mass.unwrap_or(1.0);
                    let checks = vec![
                        Check::at_most("sup_error", rep.sup_error, *tol_sup),
                        Check::abs_within("off_lattice_mass", off, 0.0),
                    ];
                    (rep, checks)
                }
                _ => {
                    if !*override_aperiodicity {
                        let scan = ScanParams {
                            n_orbit: 2000,
                            n_burn: 256,
                            n_cells: plan.n_cells.min(512),
                            fit_steps: 24,
                            lattice_tol: 1e-9,
                            seed: plan.seed,
                        };
                        let t_grid = [0.5, 1.1, 1.7, 2.4, 3.1];
                        let report =
                            aperiodicity_scan(family, driving, &obs, &t_grid, &scan)?;
                        if report.classification != Classification::AperiodicEvidence {
                            return Err(ExperimentFailure::Refused {
                                message: format!(
                                    "aperiodicity evidence not established ({:?}); set override_aperiodicity = true to force",
                                    report.classification
                                ),
                                payload: serde_json::Value::Object(payload.clone()),
                            });
                        }
                        payload.insert("aperiodicity_evidence".into(), json!(true));
                    } else {
                        warnings.push("aperiodicity pre-check overridden".into());
                    }
                    let batch = sample_parallel(family, driving, &obs, &sp, plan.workers)?;
                    let rep = lclt_experiment(&batch, sigma2, (*j_lo, *j_hi), &s_grid)?;
                    let checks = vec![Check::at_most("sup_error", rep.sup_error, *tol_sup)];
                    (rep, checks)
                }
            };
            let mut csv = Csv::new("s,statistic,target,abs_err");
            for i in 0..rep.s_grid.len() {
                csv.row(&[
                    CsvField::F(rep.s_grid[i]),
                    CsvField::F(rep.statistic[i]),
                    CsvField::F(rep.target[i]),
                    CsvField::F((rep.statistic[i] - rep.target[i]).abs()),
                ]);
            }
            payload.insert("periodic".into(), json!(rep.periodic));
            payload.insert("sup_error".into(), json!(rep.sup_error));
            checks.shrink_to_fit();
            Ok(ExperimentResult {
                checks,
                payload: serde_json::Value::Object(payload),
                csvs: vec![(format!("lclt_{}.csv", plan.seed), csv.into_string())],
            })
        }

        KindParams::Aperiodicity { t_min, t_max, t_points, n_orbit, n_burn, fit_steps, expect } => {
            let obs = prepare_observable(plan, family, driving)?;
            if *t_points < 2 || t_max <= t_min || *t_min <= 0.0 {
                return Err(ExperimentFailure::Fatal(anyhow!(
                    "aperiodicity scan needs 0 < t_min < t_max and at least 2 points"
                )));
            }
            let t_grid: Vec<f64> = (0..*t_points)
                .map(|i| t_min + (t_max - t_min) * i as f64 / (*t_points as f64 - 1.0))
                .collect();
            let params = ScanParams {
                n_orbit: *n_orbit,
                n_burn: *n_burn,
                n_cells: plan.n_cells,
                fit_steps: *fit_steps,
                lattice_tol: 1e-9,
                seed: plan.seed,
            };
            let report = aperiodicity_scan(family, driving, &obs, &t_grid, &params)?;
            let mut csv = Csv::new("t,lambda_it,rho_fit");
            for i in 0..t_grid.len() {
                csv.row(&[
                    CsvField::F(t_grid[i]),
                    CsvField::F(report.lambda_it[i]),
                    CsvField::F(report.norm_decay_fits[i].1),
                ]);
            }
            let classification_label = match &report.classification {
                Classification::AperiodicEvidence => "aperiodic_evidence".to_string(),
                Classification::PeriodicLattice { span, .. } => {
                    format!("periodic_lattice(span={span})")
                }
                Classification::Inconclusive => "inconclusive".to_string(),
            };
            let max_lambda = report.lambda_it.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut checks = Vec::new();
            match expect {
                Expectation::Any => {
                    checks.push(Check::boolean(
                        "classified",
                        report.classification != Classification::Inconclusive,
                    ));
                }
                Expectation::Aperiodic => {
                    checks.push(Check::boolean(
                        "classification_aperiodic",
                        report.classification == Classification::AperiodicEvidence,
                    ));
                    checks.push(Check::at_most("max_lambda_it", max_lambda, report.threshold));
                }
                Expectation::Periodic => {
                    checks.push(Check::boolean(
                        "classification_periodic",
                        matches!(report.classification, Classification::PeriodicLattice { .. }),
                    ));
                }
            }
            for w in &report.notes {
                warnings.push(w.clone());
            }
            Ok(ExperimentResult {
                checks,
                payload: json!({
                    "classification": classification_label,
                    "lambda_it": report.lambda_it,
                    "threshold": report.threshold,
                    "max_lambda_it": max_lambda,
                }),
                csvs: vec![(format!("aperiodicity_{}.csv", plan.seed), csv.into_string())],
            })
        }

        KindParams::Validate { horizon, k_max } => {
            let report = validate_family(family, driving, *horizon, *k_max)?;
            let mut table = String::from("quantity,value\n");
            table.push_str(&format!("delta,{}\n", report.delta));
            table.push_str(&format!("b_max,{}\n", report.b_max));
            table.push_str(&format!("iterate_n,{}\n", report.iterate_n));
            table.push_str(&format!("min_regularity_len,{}\n", report.min_regularity_len));
            table.push_str(&format!(
                "covering_k,{}\n",
                report.covering_k.map(|k| k.to_string()).unwrap_or_else(|| "-1".into())
            ));
            let checks = vec![
                Check::boolean("admissible_evidence", report.admissible_evidence),
                Check::boolean("covering_reached", report.covering_k.is_some()),
            ];
            for note in &report.notes {
                warnings.push(note.clone());
            }
            Ok(ExperimentResult {
                checks,
                payload: json!({
                    "delta": report.delta,
                    "b_max": report.b_max,
                    "iterate_n": report.iterate_n,
                    "min_regularity_len": report.min_regularity_len,
                    "covering_k": report.covering_k,
                }),
                csvs: vec![(format!("validate_{}.csv", plan.seed), table)],
            })
        }
    }
}

/// Entry used by the plot subcommand.
pub fn plot_file(csv_path: &Path, kind: &str, out_path: &Path) -> Result<()> {
    let csv = std::fs::read_to_string(csv_path)
        .with_context(|| format!("reading {}", csv_path.display()))?;
    let svg = svg::plot(kind, &csv)?;
    std::fs::write(out_path, svg)
        .with_context(|| format!("writing {}", out_path.display()))?;
    Ok(())
}
