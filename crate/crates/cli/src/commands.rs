use std::io::Write;
use std::path::Path;

use hilbert_sgm::decomposition::covariance_eigenvalues;
use hilbert_sgm::experiments::{
    fit_and_stop, rate_sweep, score, trial_seeds, FitSpec, Generator, Preset, RateSweepSpec,
};
use hilbert_sgm::iterations::PRNG_ALGORITHM;
use hilbert_sgm::lemma_lab::{lemma_sweep, write_verdicts_csv, LemmaId, SweepConfig};
use hilbert_sgm::stopping::{theoretical_stop, validation_curve};
use hilbert_sgm::{
    decompose, f_rho_abs, gen_synthetic_abs, h_norm_error, load_csv, mix_seed, recipe, recipe_table,
    run_algorithm, split3, Algorithm, DecomposeSpec, Execution, InputLaw, KernelSpec, MinMaxScaler,
    Points, RecipeParams, Sample, SpaceSpec, StepSchedule, Surrogate, TrainingSet, ValidationMetric,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    AlgorithmArgs, Cli, Command, DecomposeArgs, GeneratorArg, GeneratorArgs, LawArg, LemmasArgs,
    MetricArg, RatesArgs, RecipesArgs, RuleArg, RunArgs,
};
use crate::failure::Failure;

#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    CheckFailed,
}

pub fn dispatch(cli: &Cli) -> Result<Status, Failure> {
    init_threads(cli.threads)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match &cli.command {
        Command::Decompose(a) => run_decompose(a, exec),
        Command::Rates(a) => run_rates(a, exec),
        Command::Recipes(a) => run_recipes(a),
        Command::Lemmas(a) => run_lemmas(a),
        Command::Run(a) => run_fit(a, exec),
    }
}

#[cfg(feature = "parallel")]
fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}"))),
        _ => Ok(()),
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_threads: Option<usize>) -> Result<(), Failure> {
    Ok(())
}

/// `{tool, version, command, config, prng, seeds, result}`; `config` is the
/// resolved flag set and can be fed back through `--config`.
fn artifact(command: &str, config: &impl Serialize, seeds: Value, result: Value) -> Result<Value, Failure> {
    let mut config = serde_json::to_value(config).map_err(Failure::io)?;
    if let Value::Object(map) = &mut config {
        map.insert("command".into(), Value::from(command));
    }
    Ok(json!({
        "tool": "hsgm",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "prng": PRNG_ALGORITHM,
        "seeds": seeds,
        "result": result,
    }))
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| Failure::io(anyhow::Error::new(e).context(format!("writing {}", p.display())))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(Failure::io)
        }
    }
}

fn emit_json(path: Option<&Path>, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::io)?;
    text.push('\n');
    emit(path, text.as_bytes())
}

fn to_json(value: &impl Serialize) -> Result<Value, Failure> {
    serde_json::to_value(value).map_err(Failure::io)
}

/// `κ²` of the data under `space`: the kernel constant, or the largest squared norm.
fn kappa_sq(space: &SpaceSpec, points: &Points) -> f64 {
    match space {
        SpaceSpec::Euclidean => KernelSpec::Linear.kappa_sq(points),
        SpaceSpec::Kernel { kernel } => kernel.kappa_sq(points),
    }
}

struct Plan {
    algorithm: Algorithm,
    schedule: StepSchedule,
    iterations: usize,
    t_star: Option<usize>,
}

fn override_algorithm(alg: &AlgorithmArgs, default: Algorithm) -> Algorithm {
    if alg.batch_gm {
        Algorithm::Batch
    } else if let Some(b) = alg.b {
        Algorithm::Sgm { batch: b }
    } else {
        default
    }
}

fn preset_plan(alg: &AlgorithmArgs, preset: Preset, m: usize, passes: usize, kappa_sq: f64) -> Result<Plan, Failure> {
    let algorithm = override_algorithm(alg, preset.algorithm(m));
    let b = algorithm.batch_size(m).max(1);
    let schedule = StepSchedule::new(
        alg.eta1.unwrap_or_else(|| preset.eta1(m)),
        alg.theta.unwrap_or(0.0),
        kappa_sq,
    )?;
    Ok(Plan {
        algorithm,
        schedule,
        iterations: alg.iterations.unwrap_or_else(|| (m * passes).div_ceil(b).max(1)),
        t_star: None,
    })
}

fn recipe_plan(alg: &AlgorithmArgs, params: &RecipeParams, id: hilbert_sgm::CorollaryId) -> Result<Plan, Failure> {
    let rec = recipe(id, params)?;
    let schedule = StepSchedule::new(
        alg.eta1.unwrap_or(rec.eta1),
        alg.theta.unwrap_or(rec.theta),
        params.kappa_sq,
    )?;
    Ok(Plan {
        algorithm: override_algorithm(alg, rec.algorithm()),
        schedule,
        iterations: alg.iterations.unwrap_or(rec.t_star),
        t_star: Some(rec.t_star),
    })
}

fn run_decompose(args: &DecomposeArgs, exec: Execution) -> Result<Status, Failure> {
    let space = args.space.spec()?;
    let m = args.m;
    let sample = gen_synthetic_abs(m, args.data_seed, args.noise_sd)?;
    let surrogate = Surrogate::uniform_iid(args.surrogate_size, args.surrogate_seed, |x| f_rho_abs(x[0]))?;
    let plan = preset_plan(&args.algorithm, args.preset, m, args.passes, kappa_sq(&space, sample.points()))?;
    let b = plan.algorithm.batch_size(m);
    let spec = DecomposeSpec {
        space,
        algorithm: plan.algorithm,
        schedule: plan.schedule,
        iterations: plan.iterations,
        trials: args.trials,
        base_seed: args.base_seed,
        checkpoints: args.checkpoints.resolve(m, b, plan.iterations),
    };
    let report = decompose(&sample, &surrogate, &spec, exec)?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(Failure::io)?;
    emit(args.csv.as_deref(), &csv)?;
    if let Some(path) = &args.json {
        let plan_seeds: Vec<u64> = match spec.algorithm {
            Algorithm::Sgm { .. } => (0..args.trials as u64).map(|r| mix_seed(args.base_seed, r)).collect(),
            Algorithm::Batch => Vec::new(),
        };
        let seeds = json!({
            "data_seed": args.data_seed,
            "surrogate_seed": args.surrogate_seed,
            "base_seed": args.base_seed,
            "plan_seeds": plan_seeds,
        });
        let result = json!({ "spec": to_json(&spec)?, "report": to_json(&report)? });
        emit_json(Some(path), &artifact("decompose", args, seeds, result)?)?;
    }

    let failed = report.rows.iter().filter(|r| !r.ineq_ok).count();
    if failed > 0 {
        eprintln!("decompose: error inequality violated at {failed} of {} checkpoints", report.rows.len());
        return Ok(Status::CheckFailed);
    }
    Ok(Status::Pass)
}

fn generator(args: &GeneratorArgs) -> Generator {
    match args.generator {
        GeneratorArg::SyntheticAbs => Generator::SyntheticAbs {
            noise_sd: args.noise_sd.unwrap_or(1.0),
        },
        GeneratorArg::Linear => Generator::LinearAttainable {
            w_dagger: args
                .w
                .clone()
                .unwrap_or_else(|| vec![1.0 / (args.dim as f64).sqrt(); args.dim]),
            noise_sd: args.noise_sd.unwrap_or(0.5),
            law: match args.input_law {
                LawArg::CappedNormal => InputLaw::CappedNormal,
                LawArg::ScaledUniform => InputLaw::ScaledUniform,
            },
        },
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run_rates(args: &RatesArgs, exec: Execution) -> Result<Status, Failure> {
    let spec = RateSweepSpec {
        generator: generator(&args.data),
        space: args.space.spec()?,
        corollary: args.corollary,
        zeta: args.zeta,
        gamma: args.gamma,
        epsilon: args.epsilon,
        c_eta: args.c_eta,
        ms: args.ms.clone(),
        trials: args.trials,
        base_seed: args.base_seed,
        surrogate_size: args.surrogate_size,
        surrogate_seed: args.surrogate_seed,
    };
    let sweep = rate_sweep(&spec, exec)?;

    let mut csv = String::from("m,b,eta1,theta,t_star,passes,excess_risk,excess_risk_se,h_norm_error,h_norm_error_se\n");
    for p in &sweep.points {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            p.m,
            p.b,
            p.eta1,
            p.theta,
            p.t_star,
            p.passes,
            p.excess_risk,
            p.excess_risk_se,
            opt(p.h_norm_error),
            opt(p.h_norm_error_se)
        ));
    }
    emit(args.csv.as_deref(), csv.as_bytes())?;
    if let Some(path) = &args.json {
        let per_m: Vec<Value> = args
            .ms
            .iter()
            .map(|&m| {
                let trials: Vec<Value> = (0..args.trials)
                    .map(|r| {
                        let (data, plan) = trial_seeds(args.base_seed, m, r);
                        json!({ "data_seed": data, "plan_seed": plan })
                    })
                    .collect();
                json!({ "m": m, "trials": trials })
            })
            .collect();
        let seeds = json!({
            "base_seed": args.base_seed,
            "surrogate_seed": args.surrogate_seed,
            "per_m": per_m,
        });
        emit_json(Some(path), &artifact("rates", args, seeds, to_json(&sweep)?)?)?;
    }
    if let Some(fit) = &sweep.excess_risk_fit {
        eprintln!("rates: excess-risk slope {:.4} (r^2 {:.3})", fit.slope, fit.r_squared);
    }
    Ok(Status::Pass)
}

fn run_recipes(args: &RecipesArgs) -> Result<Status, Failure> {
    let params = RecipeParams {
        m: args.m,
        zeta: args.zeta,
        gamma: args.gamma,
        epsilon: args.epsilon,
        c_eta: args.c_eta,
        kappa_sq: args.kappa_sq,
    };
    let (recipes, unavailable) = match args.corollary {
        Some(id) => (vec![recipe(id, &params)?], Vec::new()),
        None => recipe_table(&params),
    };
    if recipes.is_empty() {
        if let Some((_, e)) = unavailable.first().cloned() {
            return Err(e.into());
        }
    }
    let unavailable: Vec<Value> = unavailable
        .iter()
        .map(|(id, e)| json!({ "corollary": id, "reason": e.to_string() }))
        .collect();
    let result = json!({ "params": to_json(&params)?, "recipes": to_json(&recipes)?, "unavailable": unavailable });
    emit_json(args.json.as_deref(), &artifact("recipes", args, json!({}), result)?)?;
    Ok(Status::Pass)
}

fn run_lemmas(args: &LemmasArgs) -> Result<Status, Failure> {
    let config = SweepConfig {
        max_t: args.max_t,
        grid_points: args.grid_points,
        spectra: args.spectra,
        spectrum_size: args.spectrum_size,
        max_contraction_t: args.max_contraction_t,
        seed: args.seed,
    };
    let verdicts = lemma_sweep(&config);
    let mut csv = Vec::new();
    write_verdicts_csv(&verdicts, &mut csv).map_err(Failure::io)?;
    emit(args.csv.as_deref(), &csv)?;

    let failed: Vec<_> = verdicts.iter().filter(|v| !v.pass).collect();
    if let Some(path) = &args.json {
        let per_lemma: serde_json::Map<String, Value> = [
            LemmaId::SumLower,
            LemmaId::SumUpper,
            LemmaId::SumLog,
            LemmaId::Convolution,
            LemmaId::Contraction,
        ]
        .iter()
        .map(|id| {
            let checked = verdicts.iter().filter(|v| v.lemma == *id).count();
            let failed = failed.iter().filter(|v| v.lemma == *id).count();
            (id.as_str().to_string(), json!({ "checked": checked, "failed": failed }))
        })
        .collect();
        let result = json!({
            "verdicts": verdicts.len(),
            "failures": failed.len(),
            "per_lemma": per_lemma,
            "failed": to_json(&failed)?,
        });
        emit_json(Some(path), &artifact("lemmas", args, json!({ "seed": args.seed }), result)?)?;
    }
    eprintln!("lemmas: {} verdicts, {} failures", verdicts.len(), failed.len());
    Ok(if failed.is_empty() {
        Status::Pass
    } else {
        Status::CheckFailed
    })
}

fn run_fit(args: &RunArgs, exec: Execution) -> Result<Status, Failure> {
    let (sample, truth) = match &args.data {
        Some(path) => (load_csv(path)?, None),
        None => generator(&args.generator).draw(args.m, args.data_seed)?,
    };
    let fractions: [f64; 3] = args
        .split
        .as_slice()
        .try_into()
        .map_err(|_| Failure::config("--split needs three fractions"))?;
    let (train, validation, test) = split3(&sample, fractions, args.split_seed)?;
    let scaler = (!args.no_scale).then(|| MinMaxScaler::fit(train.points()));
    let scale = |s: Sample| -> Result<Sample, Failure> {
        match &scaler {
            Some(sc) => Ok(sc.transform(&s)?),
            None => Ok(s),
        }
    };
    let (train, validation, test) = (scale(train)?, scale(validation)?, scale(test)?);
    if train.is_empty() {
        return Err(Failure::config("training split is empty"));
    }

    let metric = match args.metric {
        MetricArg::Mse => ValidationMetric::Mse,
        MetricArg::Misclassification => ValidationMetric::Misclassification,
        MetricArg::Auto if hilbert_sgm::data::check_labels(sample.targets()).is_ok() => {
            ValidationMetric::Misclassification
        }
        MetricArg::Auto => ValidationMetric::Mse,
    };
    let space = args.space.spec()?;
    let m = train.len();
    let kappa = kappa_sq(&space, train.points());
    let plan = match args.corollary {
        Some(id) => {
            let params = RecipeParams {
                m,
                zeta: args.zeta,
                gamma: args.gamma,
                epsilon: args.epsilon,
                c_eta: args.c_eta,
                kappa_sq: kappa,
            };
            recipe_plan(&args.algorithm, &params, id)?
        }
        None => preset_plan(&args.algorithm, args.preset, m, args.passes, kappa)?,
    };
    let b = plan.algorithm.batch_size(m);
    let checkpoints = args.checkpoints.resolve(m, b, plan.iterations);
    let fit_spec = FitSpec {
        space,
        algorithm: plan.algorithm,
        schedule: plan.schedule,
        iterations: plan.iterations,
        seed: args.seed,
        checkpoints,
        metric,
    };

    let (stopping, chosen) = match args.rule {
        RuleArg::Holdout => {
            let fit = fit_and_stop(&train, &validation, &fit_spec, exec)?;
            (fit.stopping, fit.chosen)
        }
        RuleArg::Tstar => {
            let t_star = plan
                .t_star
                .ok_or_else(|| Failure::config("--rule tstar needs --corollary"))?;
            let set = TrainingSet::with_execution(train.points().clone(), train.targets().to_vec(), space, exec)?;
            let traj = run_algorithm(
                &set,
                fit_spec.algorithm,
                &fit_spec.schedule,
                fit_spec.iterations,
                fit_spec.seed,
                &fit_spec.checkpoints,
                exec,
            )?;
            let mut outcome = theoretical_stop(&traj, t_star)?;
            if !validation.is_empty() {
                outcome.curve = validation_curve(&traj, &validation, metric, exec)?;
                outcome.metric = Some(metric);
            }
            let chosen = traj.iterates()[outcome.index].clone();
            (outcome, chosen)
        }
    };

    let mut errors = serde_json::Map::new();
    errors.insert("train".into(), Value::from(score(&chosen, &train, metric)?));
    if !validation.is_empty() {
        errors.insert("validation".into(), Value::from(score(&chosen, &validation, metric)?));
    }
    if !test.is_empty() {
        errors.insert("test".into(), Value::from(score(&chosen, &test, metric)?));
    }
    let h_norm = match (&truth, space, scaler.is_none()) {
        (Some(w), SpaceSpec::Euclidean, true) => Some(h_norm_error(&chosen, w)?),
        _ => None,
    };
    let model = json!({
        "backend": chosen.backend().name(),
        "kernel": match space { SpaceSpec::Kernel { kernel } => to_json(&kernel)?, SpaceSpec::Euclidean => Value::Null },
        "anchors": match space {
            SpaceSpec::Kernel { .. } => to_json(&train.points().rows().collect::<Vec<_>>())?,
            SpaceSpec::Euclidean => Value::Null,
        },
        "coefficients": chosen.coefficients(),
    });
    let result = json!({
        "data": {
            "provenance": sample.provenance().to_string(),
            "sizes": { "train": train.len(), "validation": validation.len(), "test": test.len() },
            "dim": sample.dim(),
            "scaler": to_json(&scaler)?,
            "covariance_eigenvalues": if matches!(space, SpaceSpec::Euclidean) {
                to_json(&covariance_eigenvalues(train.points()))?
            } else {
                Value::Null
            },
        },
        "algorithm": to_json(&fit_spec.algorithm)?,
        "schedule": to_json(&fit_spec.schedule)?,
        "iterations": fit_spec.iterations,
        "t_star": plan.t_star,
        "metric": to_json(&metric)?,
        "stopping": to_json(&stopping)?,
        "errors": errors,
        "h_norm_error": h_norm,
        "model": model,
    });
    let seeds = json!({
        "data_seed": if args.data.is_none() { Some(args.data_seed) } else { None },
        "split_seed": args.split_seed,
        "plan_seed": args.seed,
    });
    emit_json(args.json.as_deref(), &artifact("run", args, seeds, result)?)?;
    eprintln!(
        "run: stopped at t = {} ({} checkpoints), {:?} errors {}",
        stopping.checkpoint,
        stopping.checkpoints.len(),
        metric,
        Value::Object(errors)
    );
    Ok(Status::Pass)
}
