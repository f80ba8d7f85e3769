use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use taep_core::experiment::{self, Grid, TuneOptions};
use taep_core::io::{self, format_value, SavedModel};
use taep_core::model::{Dataset, LabelSpace};
use taep_core::scoring::{predict_all, Mode};
use taep_core::similarity::{cooccurrence_similarity, wordnet_similarity, SimilarityMatrix};
use taep_core::synth::{self, SynthConfig};
use taep_core::trainer::{train, TrainConfig, TraceRecord};
use taep_core::{Error, Result};

use crate::args::*;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::SimBuild(a) => cmd_sim_build(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

struct Inputs {
    dataset: Dataset,
    labels: LabelSpace,
    similarity: Option<SimilarityMatrix>,
}

fn load_inputs(a: &DataArgs) -> Result<Inputs> {
    let labels = io::read_label_space(&a.embeddings, a.seen_count)?;
    let dataset = Dataset::new(io::read_matrix(&a.features)?, io::read_matrix(&a.labels)?);
    let similarity = match &a.aux_sim {
        Some(path) => Some(io::align_similarity(io::read_similarity(path)?, &labels)?),
        None => None,
    };
    Ok(Inputs {
        dataset,
        labels,
        similarity,
    })
}

fn solver_config(s: &SolverArgs, beta: f64, gamma: f64, lambda: f64) -> TrainConfig {
    TrainConfig {
        beta,
        gamma,
        lambda,
        r: s.r,
        max_outer_iterations: s.max_iters,
        dual_tolerance: s.tol,
        ..TrainConfig::default()
    }
}

fn require_similarity(lambda_positive: bool, inputs: &Inputs) -> Result<()> {
    if lambda_positive && inputs.similarity.is_none() {
        return Err(Error::Config("lambda > 0 needs an auxiliary similarity file (--aux-sim)".into()));
    }
    Ok(())
}

fn format_trace(trace: &[TraceRecord]) -> String {
    let mut out = String::from("iteration\tdual\tprimal\tpsi_norm\torthonormality_error\n");
    for t in trace {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            t.iteration,
            format_value(t.dual_objective),
            format_value(t.primal_objective),
            format_value(t.psi_norm),
            format_value(t.orthonormality_error)
        );
    }
    out
}

fn log_trace(trace: &[TraceRecord]) {
    for t in trace {
        log::info!(
            "iter {} dual {:.10e} primal {:.10e} |psi| {:.4e} at {:.3}s",
            t.iteration,
            t.dual_objective,
            t.primal_objective,
            t.psi_norm,
            t.elapsed_secs
        );
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let inputs = load_inputs(&a.data)?;
    require_similarity(a.lambda > 0.0, &inputs)?;
    let config = solver_config(&a.solver, a.beta, a.gamma, a.lambda);
    let sim = if a.lambda > 0.0 { inputs.similarity.as_ref() } else { None };
    let out = train(&inputs.dataset, &inputs.labels, sim, &config)?;
    log_trace(&out.trace);
    if let Some(path) = &a.trace {
        io::write_text(path, &format_trace(&out.trace))?;
    }
    io::write_model(
        &a.out,
        &SavedModel {
            params: out.model,
            labels: inputs.labels,
        },
    )?;
    let last = out.trace.last().expect("at least one iteration");
    println!("iterations={}", last.iteration);
    println!("converged={}", out.converged);
    println!("dual_objective={}", format_value(last.dual_objective));
    println!("primal_objective={}", format_value(last.primal_objective));
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = io::read_model(&a.model)?;
    let features = io::read_matrix(&a.features)?;
    let predictions = predict_all(&model.params, features.view(), &model.labels, a.mode.into())?;
    io::write_text(&a.out, &io::format_predictions(&predictions, &model.labels))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = io::read_matrix(&a.truth)?;
    let mode: Mode = a.mode.into();
    let eval = if let Some(path) = &a.predictions {
        let file = io::read_predictions(path)?;
        let expected = match mode {
            Mode::UnseenOnly => "zeroshot",
            Mode::AllLabels => "generalized",
        };
        let candidates = file.candidates();
        let all = candidates.len() == file.labels.len();
        if !file.predictions.is_empty() && all != (mode == Mode::AllLabels) {
            return Err(Error::Config(format!(
                "{} does not hold {expected} predictions",
                path.display()
            )));
        }
        if file.predictions.len() != truth.nrows() {
            return Err(Error::Argument(format!(
                "{} has {} predictions but the truth has {} rows",
                path.display(),
                file.predictions.len(),
                truth.nrows()
            )));
        }
        let truth = file.truth_columns(truth.view())?;
        taep_core::metrics::evaluate(&file.predictions, truth.view())?
    } else {
        let model = io::read_model(a.model.as_deref().expect("clap requires --model"))?;
        let features = match &a.features {
            Some(p) => io::read_matrix(p)?,
            None => return Err(Error::Config("--model needs --features".into())),
        };
        experiment::evaluate_model(&model.params, &model.labels, features.view(), truth.view(), mode)?
    };
    print!("{}", io::format_eval_report(&eval));
    Ok(())
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let inputs = load_inputs(&a.data)?;
    let defaults = Grid::default_grid();
    let default_lambdas = if inputs.similarity.is_some() { defaults.lambdas.clone() } else { vec![0.0] };
    let grid = Grid {
        betas: a.betas.unwrap_or(defaults.betas),
        gammas: a.gammas.unwrap_or(defaults.gammas),
        lambdas: a.lambdas.unwrap_or(default_lambdas),
    };
    require_similarity(grid.lambdas.iter().any(|&l| l > 0.0), &inputs)?;
    let mut base = solver_config(&a.solver, 1.0, 0.0, 0.0);
    base.keep_best_iterate = a.keep_best_iterate;
    let options = TuneOptions {
        grid,
        metric: a.metric,
        seed: a.seed,
        holdout_fraction: a.holdout,
    };
    let report = experiment::tune(&inputs.dataset, &inputs.labels, inputs.similarity.as_ref(), &base, &options)?;
    log_trace(&report.output.trace);

    let mut table = format!("beta\tgamma\tlambda\t{}\n", a.metric);
    for s in &report.scores {
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{:.2}",
            format_value(s.beta),
            format_value(s.gamma),
            format_value(s.lambda),
            a.metric.value(&s.eval) * 100.0
        );
    }
    if let Some(path) = &a.report {
        io::write_text(path, &table)?;
    }
    io::write_model(
        &a.out,
        &SavedModel {
            params: report.output.model.clone(),
            labels: inputs.labels,
        },
    )?;
    let best = report.selected();
    println!(
        "selected beta={} gamma={} lambda={}",
        format_value(best.beta),
        format_value(best.gamma),
        format_value(best.lambda)
    );
    println!("validation_{}={:.2}", a.metric, a.metric.value(&best.eval) * 100.0);
    Ok(())
}

fn cmd_sim_build(a: SimBuildArgs) -> Result<()> {
    let names = io::read_label_names(&a.labels)?;
    if names.is_empty() {
        return Err(Error::Argument(format!("{} lists no labels", a.labels.display())));
    }
    // The similarity builders only look at names.
    let l = names.len();
    let labels = LabelSpace::new(names, l, Array2::zeros((l, 1)));
    let sim = match a.source {
        SimSource::Hierarchy => {
            let graph = io::read_hierarchy(&a.input)?;
            wordnet_similarity(&graph, &labels)
        }
        SimSource::Counts => {
            let counts = io::read_counts(&a.input)?;
            cooccurrence_similarity(&counts, &labels)
        }
    }
    .map_err(|e| with_file(e, &a.input))?;
    io::write_text(&a.out, &io::format_similarity(&sim))
}

fn with_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Similarity(msg) => Error::Similarity(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        seed: a.seed,
        n_train: a.n_train,
        n_test: a.n_test,
        l_seen: a.seen,
        l_unseen: a.unseen,
        m: a.m,
        d: a.d,
        label_density: a.label_density,
        noise_scale: a.noise,
        transfer_tightness: a.tightness,
        embedding_noise: a.embedding_noise,
    };
    if !(a.sim_noise >= 0.0) {
        return Err(Error::Argument(format!("sim noise must be nonnegative, got {}", a.sim_noise)));
    }
    let task = synth::generate(&config)?;
    fs::create_dir_all(&a.out_dir).map_err(|source| Error::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    let dir = &a.out_dir;
    io::write_matrix(&dir.join("train_features.txt"), &task.train.features)?;
    io::write_matrix(&dir.join("train_labels.txt"), &task.train.labels)?;
    io::write_matrix(&dir.join("test_features.txt"), &task.test.features)?;
    io::write_matrix(&dir.join("test_truth.txt"), &task.test.labels)?;
    io::write_text(
        &dir.join("embeddings.txt"),
        &io::format_embeddings(&task.labels.names, &task.labels.embeddings),
    )?;
    io::write_text(&dir.join("labels.txt"), &(task.labels.names.join("\n") + "\n"))?;
    let sim = synth::noisy_prototype_similarity(&task, a.sim_noise, a.seed);
    io::write_text(&dir.join("similarity.txt"), &io::format_similarity(&sim))?;
    println!("seen_count={}", task.labels.seen_count);
    println!("train_instances={}", task.train.n());
    println!("test_instances={}", task.test.n());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let inputs = load_inputs(&a.data)?;
    require_similarity(a.lambda > 0.0, &inputs)?;
    let base = solver_config(&a.solver, a.beta, a.gamma, a.lambda);
    let test_features = io::read_matrix(&a.test_features)?;
    let test_truth = io::read_matrix(&a.test_truth)?;
    let rows = experiment::sweep(
        &inputs.dataset,
        &inputs.labels,
        inputs.similarity.as_ref(),
        &base,
        a.param,
        test_features.view(),
        test_truth.view(),
        a.mode.into(),
    )?;
    let mut table = format!("factor\t{}\tmiap\tmicro_f1\tmacro_f1\thamming\n", a.param);
    for row in &rows {
        let e = &row.eval;
        let _ = writeln!(
            table,
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
            format_value(row.factor),
            format_value(row.value),
            e.miap * 100.0,
            e.micro_f1 * 100.0,
            e.macro_f1 * 100.0,
            e.hamming * 100.0
        );
    }
    print!("{table}");
    if let Some(path) = &a.out {
        io::write_text(path, &table)?;
    }
    if let Some(path) = &a.svg {
        io::write_text(path, &experiment::sweep_svg(&rows, a.param))?;
    }
    Ok(())
}
