//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).
//!
//! The statistical criteria run the full 200-realization protocol per noise
//! kind and take a few minutes in total; everything is seeded, so the
//! verdicts are deterministic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lppl::benchmark::{reference_params, run_branch, BenchmarkSpec};
use lppl::calibrate::{fit, FitConfig, FitResult};
use lppl::forecast::{
    bootstrap_replicas, density_of_samples, permute_residual_blocks, scan_windows, BandwidthMode,
    DensityConfig, ReplicaMethod, ReplicaSpec, ScanPlan,
};
use lppl::model::LpplParams;
use lppl::seeds::derive_seed;
use lppl::simulate::{
    add_noise, generate_reference, simulate_jls, simulate_jls_conditioned, NoiseKind, NoiseSpec,
    SdeParams,
};

fn report(criterion: &str, passed: bool, details: &str) {
    println!(
        "criterion {criterion}: {} - {details}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} failed: {details}");
}

fn table_reproduction(number: &str, kind: NoiseKind) {
    let spec = BenchmarkSpec::standard(42);
    let branch = run_branch(&spec, kind).unwrap();
    let details = format!(
        "{kind:?}: {} pooled fits, tc {:.2} ({:.2}), m {:.3} ({:.3}), omega {:.2} ({:.2})",
        branch.samples,
        branch.tc.mean,
        branch.tc.std,
        branch.m.mean,
        branch.m.std,
        branch.omega.mean,
        branch.omega.std
    );
    for check in &branch.checks {
        println!(
            "  [{}] {}: observed {:.4}, requirement {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.observed,
            check.requirement
        );
    }
    report(number, branch.passed, &details);
}

#[test]
fn criterion_1_table_reproduction_gaussian() {
    table_reproduction("1 (table reproduction, gaussian)", NoiseKind::Gaussian);
}

#[test]
fn criterion_2_table_reproduction_student_t() {
    table_reproduction("2 (table reproduction, student-t)", NoiseKind::StudentT4);
}

#[test]
fn criterion_1_smoke_variant_runtime() {
    // The reduced 20-realization variant must finish well inside three
    // minutes.
    let start = std::time::Instant::now();
    let mut spec = BenchmarkSpec::standard(42);
    spec.realizations = 20;
    let branch = run_branch(&spec, NoiseKind::Gaussian).unwrap();
    let elapsed = start.elapsed();
    report(
        "1 (smoke variant runtime)",
        elapsed.as_secs_f64() <= 180.0,
        &format!(
            "20 realizations ({} pooled fits) in {elapsed:.2?} (limit 180 s)",
            branch.samples
        ),
    );
}

#[test]
fn criterion_3_noiseless_identifiability() {
    let truth = reference_params();
    let series = generate_reference(&truth, 240, 1.0).unwrap();
    let mut config = FitConfig::for_window(1.0, 240.0);
    config.taboo.seed = 42;
    let best = fit(&series, &config).unwrap().best().unwrap().clone();

    let d_tc = (best.params.tc - truth.tc).abs();
    let d_m = (best.params.m - truth.m).abs();
    let d_omega = (best.params.omega - truth.omega).abs();
    let d_phi = (best.params.phi - truth.phi).abs();
    let d_a = (best.params.a - truth.a).abs();
    let d_b = (best.params.b - truth.b).abs();
    let d_c = (best.params.c - truth.c).abs();
    let passed = d_tc < 0.5
        && d_m < 0.01
        && d_omega < 0.05
        && d_phi < 1e-4
        && d_a < 1e-4
        && d_b < 1e-4
        && d_c < 1e-4
        && best.rmse < 1e-8;
    report(
        "3 (noiseless identifiability)",
        passed,
        &format!(
            "dtc {d_tc:.2e}, dm {d_m:.2e}, domega {d_omega:.2e}, dphi {d_phi:.2e}, \
             dA {d_a:.2e}, dB {d_b:.2e}, dC {d_c:.2e}, rmse {:.2e}",
            best.rmse
        ),
    );
}

#[test]
fn criterion_4_forecast_skill() {
    use rayon::prelude::*;

    let runs = 50usize;
    let replicas_per_window = 10usize;
    let true_tc = 300.0;

    let per_run: Vec<(Vec<f64>, f64, f64)> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let base = derive_seed(987, run as u64);
            let reference = generate_reference(&reference_params(), 240, 1.0).unwrap();
            let noisy = add_noise(
                &reference,
                &NoiseSpec {
                    kind: NoiseKind::Gaussian,
                    relative_std: 0.05,
                    seed: derive_seed(base, 0),
                },
            )
            .unwrap();
            let mut config = FitConfig::for_window(1.0, 240.0);
            config.taboo.seed = derive_seed(base, 1);
            let plan = ScanPlan {
                t1_list: vec![1.0, 21.0, 41.0],
                t2: 240.0,
                config,
            };
            let scanned = scan_windows(&noisy, &plan).unwrap();

            let mut samples: Vec<f64> = scanned.results.iter().map(|r| r.params.tc).collect();
            let mut window_best: Vec<&FitResult> = Vec::new();
            for r in &scanned.results {
                if window_best
                    .iter()
                    .all(|b| b.provenance.t1 != r.provenance.t1)
                {
                    window_best.push(r);
                }
            }
            for (w, best) in window_best.iter().enumerate() {
                let window = noisy
                    .window(best.provenance.t1, best.provenance.t2)
                    .unwrap();
                let spec = ReplicaSpec {
                    method: ReplicaMethod::BlockBootstrap,
                    count: replicas_per_window,
                    block_len: 25,
                    seed: derive_seed(base, 100 + w as u64),
                };
                let replicas = bootstrap_replicas(&window, best, &spec).unwrap();
                for (r, replica) in replicas.into_iter().enumerate() {
                    let mut cfg = plan.config;
                    cfg.taboo.seed = derive_seed(derive_seed(base, 200 + w as u64), r as u64);
                    if let Ok(e) = fit(&replica, &cfg) {
                        samples.extend(e.results.iter().map(|r| r.params.tc));
                    }
                }
            }
            let density = density_of_samples(&samples, &DensityConfig::default()).unwrap();
            (samples, density.summary.q05, density.summary.q95)
        })
        .collect();

    let mut pooled = Vec::new();
    let mut covered = 0;
    for (samples, q05, q95) in &per_run {
        if *q05 <= true_tc && true_tc <= *q95 {
            covered += 1;
        }
        pooled.extend_from_slice(samples);
    }
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let std = (pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / pooled.len() as f64).sqrt();

    // The window end is day 240 and the true critical time day 300; skill
    // means the pooled uncertainty stays well inside that 60-day gap and the
    // per-run central intervals almost always bracket the truth.
    let passed = std <= 30.0 && covered >= 40;
    report(
        "4 (forecast skill)",
        passed,
        &format!(
            "pooled {} samples, std {std:.2} (limit 30), coverage {covered}/{runs} (need 40)",
            pooled.len()
        ),
    );
}

/// Uniform grid in log-time-to-critical plus the extrema of the oscillation,
/// so grid minima coincide with the analytic minima of the hazard and slope.
fn scan_grid(tc: f64, omega: f64, phase: f64, tau_min: f64, tau_max: f64) -> Vec<f64> {
    let lo = tau_min.ln();
    let hi = tau_max.ln();
    let n = 1000;
    let mut lns: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let k_lo = ((omega * lo - phase) / std::f64::consts::PI).ceil() as i64;
    let k_hi = ((omega * hi - phase) / std::f64::consts::PI).floor() as i64;
    for k in k_lo..=k_hi {
        lns.push((phase + k as f64 * std::f64::consts::PI) / omega);
    }
    lns.into_iter().map(|l| tc - l.exp()).collect()
}

#[test]
fn criterion_5_hazard_martingale_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240717);
    let tc = 300.0;
    let tau_min = 0.25;
    let tau_max = 200.0;
    let mut accepted = 0usize;
    let mut disagreements = Vec::new();

    while accepted < 1000 {
        let params = LpplParams {
            tc,
            m: 0.05 + 0.90 * rng.random::<f64>(),
            omega: 2.0 + 23.0 * rng.random::<f64>(),
            phi: std::f64::consts::TAU * rng.random::<f64>(),
            a: 10.0,
            b: -1.0 + 1.3 * rng.random::<f64>(),
            c: -0.15 + 0.30 * rng.random::<f64>(),
        };
        let margin = params.hazard_margin();
        // The sign equivalence is exact in real arithmetic but no finite
        // grid can resolve the b = 0 boundary itself; draws within numerical
        // resolution of it are re-drawn.
        if margin.abs() < 1e-3 {
            continue;
        }
        accepted += 1;
        let margin_pass = margin >= 0.0;

        let hazard = params.to_hazard(0.3).unwrap();
        let hazard_grid = scan_grid(tc, hazard.omega, hazard.phi_prime, tau_min, tau_max);
        let min_rate = hazard_grid
            .iter()
            .map(|&t| hazard.rate(t).unwrap())
            .fold(f64::MAX, f64::min);
        let hazard_pass = min_rate >= 0.0;

        // The slope extrema share the hazard's phase (phi' = phi - atan2(w, m)).
        let slope_grid = scan_grid(tc, params.omega, hazard.phi_prime, tau_min, tau_max);
        let mut min_slope = f64::MAX;
        let mut max_abs_slope: f64 = 0.0;
        for &t in &slope_grid {
            let tau = tc - t;
            let h = 1e-5 * tau;
            let slope =
                (params.log_price(t + h).unwrap() - params.log_price(t - h).unwrap()) / (2.0 * h);
            min_slope = min_slope.min(slope);
            max_abs_slope = max_abs_slope.max(slope.abs());
        }
        let eps = 1e-9 * max_abs_slope.max(1.0);
        let slope_pass = min_slope >= -eps;

        if margin_pass != hazard_pass || margin_pass != slope_pass {
            disagreements.push(format!(
                "margin {margin:.3e} (pass {margin_pass}), min hazard {min_rate:.3e} \
                 (pass {hazard_pass}), min slope {min_slope:.3e} (pass {slope_pass})"
            ));
        }
    }

    report(
        "5 (hazard/martingale equivalence)",
        disagreements.is_empty(),
        &format!(
            "1000 parameter sets, {} disagreements{}",
            disagreements.len(),
            disagreements
                .first()
                .map(|d| format!("; first: {d}"))
                .unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_6_simulator_consistency() {
    // Constant hazard: crash frequency matches the survival function.
    let h = 0.01;
    let horizon = 100.0;
    let dt = 0.05;
    let n = (horizon / dt) as usize + 1;
    let sde = SdeParams {
        hazard: lppl::model::HazardParams {
            tc: 1e9,
            m: 1.0,
            omega: 10.0,
            b_prime: h,
            c_prime: 0.0,
            phi_prime: 0.0,
            kappa: 0.2,
        },
        sigma: 0.0,
        kappa: 0.2,
        dt,
        p0: 1.0,
    };
    let paths = 10_000;
    let crashed = (0..paths)
        .filter(|&i| {
            !simulate_jls(&sde, n, derive_seed(2026, i))
                .unwrap()
                .crash_times
                .is_empty()
        })
        .count();
    let expected = 1.0 - (-h * horizon).exp();
    let observed = crashed as f64 / paths as f64;
    let se = (expected * (1.0 - expected) / paths as f64).sqrt();
    let crash_ok = (observed - expected).abs() <= 3.0 * se;

    // Drift-only path converges to the closed-form curve linearly in dt.
    let params = reference_params();
    let hazard = params.to_hazard(0.25).unwrap();
    let p0 = params.log_price(0.0).unwrap().exp();
    let mut errors = Vec::new();
    for dt in [1.0, 0.1, 0.01] {
        let n = (240.0 / dt) as usize + 1;
        let sde = SdeParams {
            hazard,
            sigma: 0.0,
            kappa: 0.25,
            dt,
            p0,
        };
        let path = simulate_jls_conditioned(&sde, n, 0).unwrap();
        let mut max_err: f64 = 0.0;
        for (i, &v) in path.values.iter().enumerate() {
            let exact = params.log_price(i as f64 * dt).unwrap();
            max_err = max_err.max((v.ln() - exact).abs());
        }
        errors.push(max_err);
    }
    let r1 = errors[1] / errors[0];
    let r2 = errors[2] / errors[1];
    let linear_ok = (0.05..=0.2).contains(&r1) && (0.05..=0.2).contains(&r2);

    report(
        "6 (simulator consistency)",
        crash_ok && linear_ok,
        &format!(
            "crash fraction {observed:.4} vs {expected:.4} (3se {:.4}); \
             euler errors {:?} ratios {r1:.3}/{r2:.3}",
            3.0 * se,
            errors
        ),
    );
}

#[test]
fn criterion_7_bootstrap_invariants() {
    // Fit a series whose noise is AR(1)-correlated so the residual
    // autocorrelation is material.
    let reference = generate_reference(&reference_params(), 240, 1.0).unwrap();
    let mut noisy = reference.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut x = 0.0f64;
    for v in &mut noisy.values {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        x = 0.6 * x + 0.05 * z;
        *v += x;
    }
    let mut config = FitConfig::for_window(1.0, 240.0);
    config.taboo.seed = 8;
    let best = fit(&noisy, &config).unwrap().best().unwrap().clone();

    let lag1 = |res: &[f64]| {
        let n = res.len();
        let mean = res.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let d = res[i] - mean;
            den += d * d;
            if i > 0 {
                num += d * (res[i - 1] - mean);
            }
        }
        num / den
    };
    let original_ac = lag1(&best.residuals);

    let spec = ReplicaSpec {
        method: ReplicaMethod::BlockBootstrap,
        count: 200,
        block_len: 25,
        seed: 99,
    };
    let replicas = bootstrap_replicas(&noisy, &best, &spec).unwrap();
    let fitted: Vec<f64> = noisy
        .values
        .iter()
        .zip(best.residuals.iter())
        .map(|(y, r)| y - r)
        .collect();

    let mut original_sorted = best.residuals.clone();
    original_sorted.sort_by(f64::total_cmp);
    let mut multiset_exact = true;
    let mut ac_sum = 0.0;
    for (r, replica) in replicas.iter().enumerate() {
        let permuted =
            permute_residual_blocks(&best.residuals, spec.block_len, spec.seed, r as u64);
        let mut sorted = permuted.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted != original_sorted {
            multiset_exact = false;
        }
        for i in 0..replica.len() {
            if replica.values[i] != fitted[i] + permuted[i] {
                multiset_exact = false;
            }
        }
        let res: Vec<f64> = replica
            .values
            .iter()
            .zip(fitted.iter())
            .map(|(v, f)| v - f)
            .collect();
        ac_sum += lag1(&res);
    }
    let mean_ac = ac_sum / replicas.len() as f64;
    let ac_rel = ((mean_ac - original_ac) / original_ac).abs();

    report(
        "7 (bootstrap invariants)",
        multiset_exact && ac_rel < 0.10,
        &format!(
            "multiset exact over 200 replicas: {multiset_exact}; lag-1 autocorr {mean_ac:.4} \
             vs original {original_ac:.4} (rel {ac_rel:.3}, limit 0.10)"
        ),
    );
}

#[test]
fn criterion_8_kde_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(512);
    let samples: Vec<f64> = (0..100_000)
        .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
        .collect();
    let sample_mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let sample_std = (samples
        .iter()
        .map(|x| (x - sample_mean).powi(2))
        .sum::<f64>()
        / samples.len() as f64)
        .sqrt();

    let mut passed = true;
    let mut details = String::new();
    for mode in [BandwidthMode::Adaptive, BandwidthMode::FixedSilverman] {
        let config = DensityConfig {
            mode,
            ..DensityConfig::default()
        };
        let density = density_of_samples(&samples, &config).unwrap();
        let nonneg = density.density.iter().all(|&v| v >= 0.0);
        let integral = density.integral();
        let (kde_mean, kde_std) = density.grid_moments();
        let ok = nonneg
            && (integral - 1.0).abs() <= 1e-6
            && (kde_mean - sample_mean).abs() < 0.02
            && (kde_std - sample_std).abs() < 0.02;
        passed &= ok;
        details.push_str(&format!(
            "[{mode:?}: integral {integral:.8}, mean err {:.4}, std err {:.4}] ",
            (kde_mean - sample_mean).abs(),
            (kde_std - sample_std).abs()
        ));
    }
    report("8 (kde correctness)", passed, details.trim());
}

#[test]
fn criterion_9_determinism() {
    use std::process::Command as Proc;

    let bin = env!("CARGO_BIN_EXE_lppl");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");

    let run = |args: &[&str]| {
        let output = Proc::new(bin).args(args).output().unwrap();
        assert!(
            output.status.success(),
            "lppl {args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };

    run(&[
        "simulate",
        "--out",
        data.to_str().unwrap(),
        "--noise",
        "gaussian",
        "--seed",
        "7",
    ]);
    let series = data.join("series.csv");

    let out_a = dir.path().join("a");
    run(&[
        "forecast",
        "--input",
        series.to_str().unwrap(),
        "--price-column",
        "log_price",
        "--log-input",
        "--out",
        out_a.to_str().unwrap(),
        "--t1-list",
        "1,41",
        "--t2",
        "240",
        "--replicas",
        "2",
        "--taboo-iterations",
        "80",
        "--taboo-pool",
        "6",
        "--top-k",
        "4",
        "--seed",
        "3",
    ]);

    let out_b = dir.path().join("b");
    run(&[
        "rerun",
        "--manifest",
        out_a.join("manifest.json").to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);

    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut compared = 0;
    let mut identical = true;
    for name in &names {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        if a != b {
            identical = false;
        }
        compared += 1;
    }

    // A reduced benchmark rerun must also reproduce its report and
    // checkpoint bytes.
    let bench_a = dir.path().join("bench_a");
    let bench_b = dir.path().join("bench_b");
    for out in [&bench_a, &bench_b] {
        run(&[
            "benchmark",
            "--out",
            out.to_str().unwrap(),
            "--realizations",
            "2",
            "--noise",
            "gaussian",
            "--seed",
            "5",
            "--top-k",
            "3",
        ]);
    }
    for name in ["report.json", "checkpoint_gaussian.jsonl", "manifest.json"] {
        let a = std::fs::read(bench_a.join(name)).unwrap();
        let b = std::fs::read(bench_b.join(name)).unwrap();
        if a != b {
            identical = false;
        }
        compared += 1;
    }

    report(
        "9 (determinism)",
        identical && compared >= 10,
        &format!("{compared} artifacts compared byte-for-byte"),
    );
}
