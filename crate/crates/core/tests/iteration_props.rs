mod common;

use hilbert_sgm::decomposition::{iterate_norm_bound, source_radius};
use hilbert_sgm::experiments::{Preset, SEC9_SAMPLE_SIZE, SEC9_SIGMA};
use hilbert_sgm::{
    gen_linear_attainable, gen_synthetic_abs, passes, recipe, run_algorithm, run_batch_gm,
    run_population, run_sgm, sample_index_plan, Algorithm, Checkpoints, CorollaryId, Execution,
    InputLaw, IterationError, KernelSpec, RecipeParams, SpaceSpec, StepSchedule, Surrogate,
    TrainingSet,
};
use proptest::prelude::*;

fn gaussian(sigma: f64) -> SpaceSpec {
    SpaceSpec::Kernel {
        kernel: KernelSpec::gaussian(sigma).unwrap(),
    }
}

fn abs_training(m: usize, seed: u64, space: SpaceSpec) -> TrainingSet {
    let (points, targets) = gen_synthetic_abs(m, seed, 1.0).unwrap().into_parts();
    TrainingSet::new(points, targets, space).unwrap()
}

#[test]
fn index_frequencies_are_uniform() {
    let m = 100;
    let t = 100_000;
    let plan = sample_index_plan(m, 1, t, 17).unwrap();
    let mut counts = vec![0usize; m];
    for &i in plan.indices() {
        counts[i as usize] += 1;
    }
    let expected = t as f64 / m as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99.9% quantile of chi-square with 99 degrees of freedom.
    assert!(chi2 < 148.2, "chi2 = {chi2}");
}

#[test]
fn plans_are_reproducible_and_validated() {
    let a = sample_index_plan(40, 3, 200, 5).unwrap();
    let b = sample_index_plan(40, 3, 200, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_index_plan(40, 3, 200, 6).unwrap());
    assert_eq!(a.batch(1).len(), 3);
    assert_eq!(a.batch(200), &a.indices()[597..600]);
    assert!(matches!(
        sample_index_plan(10, 11, 5, 0),
        Err(IterationError::BatchOutOfRange { b: 11, m: 10 })
    ));
    assert!(sample_index_plan(10, 0, 5, 0).is_err());
    assert!(matches!(sample_index_plan(10, 1, 0, 0), Err(IterationError::ZeroIterations)));
}

#[test]
fn batch_gm_training_error_is_nonincreasing() {
    let train = abs_training(80, 3, gaussian(0.2));
    let schedule = StepSchedule::constant(1.0, train.kappa_sq()).unwrap();
    let traj = run_batch_gm(&train, &schedule, 300, &Checkpoints::all(300)).unwrap();
    let errors: Vec<f64> = traj
        .iterates()
        .iter()
        .map(|h| h.mean_square_error(train.points(), train.targets()).unwrap())
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
    }
}

#[test]
fn noiseless_least_squares_recovers_minimizer() {
    let w = [0.5, -0.3, 0.8];
    let (sample, w_dagger) = gen_linear_attainable(200, &w, 0.0, 8, InputLaw::CappedNormal).unwrap();
    let (points, targets) = sample.into_parts();
    let train = TrainingSet::new(points, targets, SpaceSpec::Euclidean).unwrap();
    let kappa_sq = train.kappa_sq();
    let schedule = StepSchedule::constant(1.0, kappa_sq).unwrap();
    let traj = run_batch_gm(&train, &schedule, 20_000, &Checkpoints::last(20_000)).unwrap();
    let err = traj.last().unwrap().combine(1.0, &w_dagger, -1.0).unwrap().norm_sq().sqrt();
    assert!(err <= 1e-8, "error {err}");
}

#[test]
fn population_iteration_matches_spectral_form() {
    let w = [0.4, -0.2, 0.1, 0.7];
    let (sample, _) = gen_linear_attainable(300, &w, 0.0, 12, InputLaw::ScaledUniform).unwrap();
    let (points, values) = sample.into_parts();
    let surrogate = Surrogate::new(points.clone(), values).unwrap();
    let pop = surrogate.as_training_set(SpaceSpec::Euclidean, Execution::default()).unwrap();
    let eta = 1.0 / pop.kappa_sq();
    let schedule = StepSchedule::constant(1.0, pop.kappa_sq()).unwrap();
    let traj = run_population(&pop, &schedule, 200, &Checkpoints::new(vec![0, 1, 7, 50, 200], 200).unwrap()).unwrap();
    for (t, _, mu) in traj.iter() {
        let oracle = common::population_closed_form(&points, &w, eta, t);
        for (a, b) in mu.coefficients().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10, "t = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn population_iterates_respect_norm_bound() {
    for (seed, d) in [(1u64, 2usize), (2, 5), (3, 8)] {
        let w: Vec<f64> = (0..d).map(|j| 1.0 / (j as f64 + 1.0)).collect();
        let (sample, _) = gen_linear_attainable(150, &w, 0.0, seed, InputLaw::CappedNormal).unwrap();
        let (points, values) = sample.into_parts();
        let pop = Surrogate::new(points.clone(), values)
            .unwrap()
            .as_training_set(SpaceSpec::Euclidean, Execution::default())
            .unwrap();
        let kappa_sq = pop.kappa_sq();
        for theta in [0.0, 0.5] {
            let schedule = StepSchedule::new(1.0, theta, kappa_sq).unwrap();
            let traj = run_population(&pop, &schedule, 500, &Checkpoints::all(500)).unwrap();
            for zeta in [0.5, 1.0] {
                let bound = iterate_norm_bound(source_radius(&points, &w, zeta).unwrap(), zeta, kappa_sq);
                for (t, _, mu) in traj.iter() {
                    let norm = mu.norm_sq().sqrt();
                    assert!(norm <= bound * (1.0 + 1e-10), "d={d} theta={theta} zeta={zeta} t={t}");
                }
            }
        }
    }
}

#[test]
fn preset_smoke_run() {
    let m = SEC9_SAMPLE_SIZE;
    let train = abs_training(m, 1, gaussian(SEC9_SIGMA));
    for preset in Preset::ALL {
        let alg = preset.algorithm(m);
        let iterations = preset.iterations(m, 5);
        let b = alg.batch_size(m);
        let traj = run_algorithm(
            &train,
            alg,
            &preset.schedule(m),
            iterations,
            4,
            &Checkpoints::at_passes(m, b, iterations),
            Execution::default(),
        )
        .unwrap();
        assert_eq!(traj.passes(), &[1, 2, 3, 4, 5], "{preset}");
        let mse = traj.last().unwrap().mean_square_error(train.points(), train.targets()).unwrap();
        assert!(mse.is_finite() && mse < 2.0, "{preset}: {mse}");
    }
}

#[test]
fn sgm_reports_checkpoints_like_batch_gm() {
    let train = abs_training(10, 2, gaussian(0.3));
    let schedule = StepSchedule::constant(0.5, 1.0).unwrap();
    let cps = Checkpoints::new(vec![0, 4, 30], 30).unwrap();
    let batch = run_batch_gm(&train, &schedule, 30, &cps).unwrap();
    let plan = sample_index_plan(10, 4, 30, 1).unwrap();
    let sgm = run_sgm(&train, &schedule, &plan, &cps).unwrap();
    assert_eq!(sgm.checkpoints(), batch.checkpoints());
    assert_eq!(sgm.passes(), &[0, 2, 12]);
    assert_eq!(batch.passes(), &[0, 4, 30]);
    assert!(sgm.get(0).unwrap().is_zero());
}

#[test]
fn diverging_schedule_is_reported() {
    let train = abs_training(20, 2, gaussian(0.3));
    let schedule = StepSchedule::constant(1000.0, 1.0).unwrap();
    let err = run_batch_gm(&train, &schedule, 500, &Checkpoints::last(500)).unwrap_err();
    assert!(matches!(err, IterationError::Divergence { .. }), "{err}");
}

#[cfg(feature = "parallel")]
#[test]
fn sequential_and_parallel_runs_agree_bitwise() {
    let (points, targets) = gen_synthetic_abs(300, 9, 1.0).unwrap().into_parts();
    let mut runs = Vec::new();
    for exec in [Execution::Sequential, Execution::Parallel] {
        let train = TrainingSet::with_execution(points.clone(), targets.clone(), gaussian(0.2), exec).unwrap();
        let schedule = StepSchedule::constant(0.25, 1.0).unwrap();
        let cps = Checkpoints::every(50, 200);
        let sgm = run_algorithm(&train, Algorithm::Sgm { batch: 5 }, &schedule, 200, 3, &cps, exec).unwrap();
        let gm = run_algorithm(&train, Algorithm::Batch, &schedule, 200, 3, &cps, exec).unwrap();
        runs.push((sgm, gm));
    }
    for i in 0..runs[0].0.len() {
        assert_eq!(runs[0].0.iterates()[i].coefficients(), runs[1].0.iterates()[i].coefficients());
        assert_eq!(runs[0].1.iterates()[i].coefficients(), runs[1].1.iterates()[i].coefficients());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recipe_pass_count_matches_iterations(m in 10usize..5000, idx in 0usize..11) {
        let id = CorollaryId::ALL[idx];
        let r = recipe(id, &RecipeParams::new(m)).unwrap();
        prop_assert!(r.b >= 1 && r.b <= m);
        prop_assert!(r.t_star >= 1);
        let b = match r.algorithm() {
            Algorithm::Batch => m,
            Algorithm::Sgm { batch } => batch,
        };
        prop_assert_eq!(r.passes, passes(b, r.t_star, m));
    }

    #[test]
    fn step_sizes_are_nonincreasing(eta1 in 0.01f64..1.0, theta in 0.0f64..1.0, kappa_sq in 0.1f64..10.0) {
        let s = StepSchedule::new(eta1, theta, kappa_sq).unwrap();
        for t in 1..200 {
            prop_assert!(s.eta(t + 1) <= s.eta(t));
            prop_assert!(s.eta(t) <= 1.0 / kappa_sq + 1e-15);
        }
    }

    #[test]
    fn checkpoint_passes_follow_ceiling(m in 1usize..300, b_frac in 0.0f64..1.0, t in 1usize..2000) {
        let b = 1 + ((m - 1) as f64 * b_frac) as usize;
        let cps = Checkpoints::at_passes(m, b, t);
        for &c in cps.as_slice() {
            let p = passes(b, c, m);
            prop_assert_eq!(p, (b * c + m - 1) / m);
        }
        prop_assert_eq!(cps.max(), Some(t));
    }
}
