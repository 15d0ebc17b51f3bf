//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hilbert_sgm::data::{gen_linear_attainable, gen_synthetic_abs, split3, InputLaw, MinMaxScaler};
use hilbert_sgm::decomposition::{bias_bound, covariance_eigenvalues, source_radius, unbiasedness_check};
use hilbert_sgm::experiments::{
    fit_and_stop, rate_sweep, sec9_decompose, FitSpec, Generator, Preset, RateSweep, RateSweepSpec,
    Sec9Setup,
};
use hilbert_sgm::iterations::{run_population, Checkpoints, SpaceSpec, Surrogate, TrainingSet};
use hilbert_sgm::lemma_lab::{lemma_sweep, SweepConfig};
use hilbert_sgm::stopping::{validation_curve, ValidationMetric};
use hilbert_sgm::{CorollaryId, Execution, KernelSpec, StepSchedule};

const RATE_GRID: [usize; 5] = [64, 128, 256, 512, 1024];
const RATE_TRIALS: usize = 20;
const RATE_SEED: u64 = 5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn gaussian_space(sigma: f64) -> SpaceSpec {
    SpaceSpec::Kernel {
        kernel: KernelSpec::gaussian(sigma).unwrap(),
    }
}

fn within_time(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn abs_sweep(corollary: CorollaryId, ms: &[usize]) -> RateSweep {
    let spec = RateSweepSpec {
        generator: Generator::SyntheticAbs { noise_sd: 1.0 },
        space: gaussian_space(0.2),
        corollary,
        zeta: 0.5,
        gamma: 1.0,
        epsilon: None,
        c_eta: 0.125,
        ms: ms.to_vec(),
        trials: RATE_TRIALS,
        base_seed: RATE_SEED,
        surrogate_size: 2000,
        surrogate_seed: 6,
    };
    rate_sweep(&spec, Execution::default()).expect("rate sweep")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let verdicts = lemma_sweep(&SweepConfig::default());
    let failures = verdicts.iter().filter(|v| !v.pass).count();
    let elapsed = start.elapsed();
    Outcome {
        pass: failures == 0 && within_time(elapsed, 60),
        detail: format!("{} verdicts, {failures} failures, {elapsed:.2?}", verdicts.len()),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let m = 16;
    let sample = gen_synthetic_abs(m, 21, 1.0).unwrap();
    let (points, targets) = sample.into_parts();
    let train = TrainingSet::new(points, targets, gaussian_space(0.2)).unwrap();
    let schedule = StepSchedule::constant(1.0 / (8.0 * m as f64), 1.0).unwrap();
    let rep = unbiasedness_check(&train, &schedule, 1, 64, 4000, 22, Execution::default()).unwrap();
    let elapsed = start.elapsed();
    Outcome {
        pass: rep.pass && within_time(elapsed, 30),
        detail: format!(
            "deviation {:.3e} vs 4 SE = {:.3e}, {elapsed:.2?}",
            rep.deviation,
            4.0 * rep.standard_error
        ),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let rep = sec9_decompose(Preset::Sec9Minibatch, &Sec9Setup::default(), Execution::default()).unwrap();
    let elapsed = start.elapsed();
    let ineq = rep.all_inequalities_hold();
    let bias_monotone = rep.rows.windows(2).all(|w| w[1].bias_sq <= w[0].bias_sq + 1e-12);
    let i = rep.total_minimizer().unwrap();
    let r = &rep.rows[i];
    let negligible = r.comp_var_sq <= 0.1 * (r.bias_sq + r.sample_var_sq);
    Outcome {
        pass: ineq && bias_monotone && negligible && within_time(elapsed, 120),
        detail: format!(
            "inequality {ineq}, bias nonincreasing {bias_monotone}, at pass {}: comp {:.2e} vs 0.1*(bias+sv) {:.2e}, {elapsed:.2?}",
            r.pass,
            r.comp_var_sq,
            0.1 * (r.bias_sq + r.sample_var_sq)
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut checks = 0usize;
    let mut violations = 0usize;
    let mut instances = 0usize;
    for d in 1..=8usize {
        for rep in 0..2u64 {
            let seed = 100 * d as u64 + rep;
            let w: Vec<f64> = (0..d).map(|j| ((j + 1) as f64 * 0.7 + rep as f64).sin()).collect();
            let (sample, _) = gen_linear_attainable(200, &w, 0.0, seed, InputLaw::CappedNormal).unwrap();
            let eigs = covariance_eigenvalues(sample.points());
            assert!(eigs.last().copied().unwrap() > 1e-6, "full rank");
            let (points, values) = sample.into_parts();
            let surrogate = Surrogate::new(points.clone(), values).unwrap();
            let pop = surrogate.as_training_set(SpaceSpec::Euclidean, Execution::default()).unwrap();
            let kappa_sq = pop.kappa_sq();
            instances += 1;
            for theta in [0.0, 0.5] {
                let schedule = StepSchedule::new(1.0, theta, kappa_sq).unwrap();
                let traj = run_population(&pop, &schedule, 1000, &Checkpoints::all(1000)).unwrap();
                for zeta in [0.5, 1.0] {
                    let radius = source_radius(&points, &w, zeta).unwrap();
                    for (t, _, mu) in traj.iter() {
                        let bias = hilbert_sgm::excess_risk(mu, &surrogate).unwrap().sqrt();
                        let bound = bias_bound(radius, zeta, &schedule, t);
                        checks += 1;
                        if bias > bound * (1.0 + 1e-12) {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{instances} instances, {checks} checks, {violations} violations"),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let sweep = abs_sweep(CorollaryId::C3, &RATE_GRID);
    let elapsed = start.elapsed();
    let slope = sweep.excess_risk_fit.as_ref().unwrap().slope;
    Outcome {
        pass: (-0.75..=-0.30).contains(&slope) && within_time(elapsed, 600),
        detail: format!("slope {slope:.3} (r2 {:.3}), {elapsed:.2?}", sweep.excess_risk_fit.unwrap().r_squared),
    }
}

fn criterion_6() -> Outcome {
    let batch = abs_sweep(CorollaryId::Bgm, &RATE_GRID);
    let sgm = abs_sweep(CorollaryId::C3, &RATE_GRID);
    let slope = batch.excess_risk_fit.as_ref().unwrap().slope;
    let worst_ratio = batch
        .points
        .iter()
        .zip(&sgm.points)
        .map(|(b, s)| (b.excess_risk / s.excess_risk).max(s.excess_risk / b.excess_risk))
        .fold(0.0, f64::max);
    Outcome {
        pass: (-0.75..=-0.30).contains(&slope) && worst_ratio <= 2.0,
        detail: format!("slope {slope:.3}, worst batch/sgm ratio {worst_ratio:.3}"),
    }
}

fn criterion_7() -> Outcome {
    let ms = [100, 400];
    let c3 = abs_sweep(CorollaryId::C3, &ms);
    let c4 = abs_sweep(CorollaryId::C4, &ms);
    let ratios: Vec<f64> = c4
        .points
        .iter()
        .zip(&c3.points)
        .map(|(a, b)| a.excess_risk / b.excess_risk)
        .collect();
    Outcome {
        pass: ratios.iter().all(|r| (1.0 / 1.5..=1.5).contains(r)),
        detail: format!("minibatch/simple ratios {ratios:.3?} at m = {ms:?}"),
    }
}

fn criterion_8() -> Outcome {
    let d = 10;
    let spec = RateSweepSpec {
        generator: Generator::LinearAttainable {
            w_dagger: vec![1.0 / (d as f64).sqrt(); d],
            noise_sd: 0.5,
            law: InputLaw::CappedNormal,
        },
        space: SpaceSpec::Euclidean,
        corollary: CorollaryId::C3,
        zeta: 0.5,
        gamma: 1.0,
        epsilon: None,
        c_eta: 0.125,
        ms: RATE_GRID.to_vec(),
        trials: RATE_TRIALS,
        base_seed: RATE_SEED,
        surrogate_size: 2000,
        surrogate_seed: 6,
    };
    let sweep = rate_sweep(&spec, Execution::default()).unwrap();
    let errors: Vec<f64> = sweep.points.iter().map(|p| p.h_norm_error.unwrap()).collect();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let slope = sweep.h_norm_fit.unwrap().slope;
    Outcome {
        pass: decreasing && slope < -0.15,
        detail: format!("errors {errors:.4?}, slope {slope:.3}"),
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("breast_cancer_like.csv");
    let table = common::breast_cancer_like(683, 11);
    hilbert_sgm::write_csv(&table, std::fs::File::create(&path).unwrap()).unwrap();
    let sample = hilbert_sgm::load_csv(&path).unwrap();
    let (train, validation, test) = split3(&sample, [0.6, 0.2, 0.2], 3).unwrap();
    let scaler = MinMaxScaler::fit(train.points());
    let train = scaler.transform(&train).unwrap();
    let validation = scaler.transform(&validation).unwrap();
    let test = scaler.transform(&test).unwrap();
    let m = train.len();
    let mut best = Vec::new();
    for preset in Preset::ALL {
        let algorithm = preset.algorithm(m);
        let iterations = preset.iterations(m, 50);
        let spec = FitSpec {
            space: gaussian_space(0.5),
            algorithm,
            schedule: preset.schedule(m),
            iterations,
            seed: 9,
            checkpoints: Checkpoints::at_passes(m, algorithm.batch_size(m), iterations),
            metric: ValidationMetric::Misclassification,
        };
        let fit = fit_and_stop(&train, &validation, &spec, Execution::default()).unwrap();
        let curve = validation_curve(&fit.trajectory, &test, ValidationMetric::Misclassification, Execution::default())
            .unwrap();
        best.push((preset, curve.iter().copied().fold(f64::INFINITY, f64::min)));
    }
    let lo = best.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let hi = best.iter().map(|b| b.1).fold(0.0, f64::max);
    Outcome {
        pass: hi - lo <= 0.03,
        detail: format!(
            "best test errors {}; spread {:.4}",
            best.iter()
                .map(|(p, e)| format!("{p} {e:.4}"))
                .collect::<Vec<_>>()
                .join(", "),
            hi - lo
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("lemma suite", criterion_1),
        ("unbiasedness", criterion_2),
        ("error decomposition", criterion_3),
        ("bias bound", criterion_4),
        ("SGM rate slope", criterion_5),
        ("batch GM parity", criterion_6),
        ("mini-batch vs step size", criterion_7),
        ("H-norm convergence", criterion_8),
        ("classification parity", criterion_9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let outcome = run();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{status} {label}: {}", outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
