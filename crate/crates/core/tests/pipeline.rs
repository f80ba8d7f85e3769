use std::path::Path;

use taep_core::experiment::evaluate_model;
use taep_core::io::{self, SavedModel};
use taep_core::metrics;
use taep_core::model::ModelParams;
use taep_core::scoring::{predict_all, Mode};
use taep_core::synth::{generate, noisy_prototype_similarity, SynthConfig, SynthTask};
use taep_core::trainer::{train, TrainConfig};

fn task() -> SynthTask {
    generate(&SynthConfig {
        seed: 3,
        n_train: 80,
        n_test: 40,
        l_seen: 6,
        l_unseen: 3,
        m: 10,
        d: 14,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn config() -> TrainConfig {
    TrainConfig {
        beta: 2.0,
        gamma: 10.0,
        lambda: 0.1,
        r: 4,
        max_outer_iterations: 15,
        ..TrainConfig::default()
    }
}

#[test]
fn saved_model_predicts_identically() {
    let t = task();
    let sim = noisy_prototype_similarity(&t, 0.1, 3);
    let out = train(&t.train, &t.labels, Some(&sim), &config()).unwrap();
    let saved = SavedModel {
        params: out.model.clone(),
        labels: t.labels.clone(),
    };
    let text = io::format_model(&saved);
    let back = io::parse_model(&text, Path::new("model.txt")).unwrap();
    assert_eq!(back.labels.names, t.labels.names);
    for mode in [Mode::UnseenOnly, Mode::AllLabels] {
        let a = predict_all(&out.model, t.test.features.view(), &t.labels, mode).unwrap();
        let b = predict_all(&back.params, t.test.features.view(), &back.labels, mode).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn predictions_file_scores_like_the_model() {
    let t = task();
    let out = train(&t.train, &t.labels, None, &TrainConfig { lambda: 0.0, ..config() }).unwrap();
    let direct = evaluate_model(&out.model, &t.labels, t.test.features.view(), t.test.labels.view(), Mode::UnseenOnly).unwrap();

    let preds = predict_all(&out.model, t.test.features.view(), &t.labels, Mode::UnseenOnly).unwrap();
    let text = io::format_predictions(&preds, &t.labels);
    let file = io::parse_predictions(&text, Path::new("preds.txt")).unwrap();
    let truth = file.truth_columns(t.test.labels.view()).unwrap();
    let from_file = metrics::evaluate(&file.predictions, truth.view()).unwrap();

    assert_eq!(direct.evaluated, from_file.evaluated);
    assert!((direct.miap - from_file.miap).abs() < 1e-12);
    assert_eq!(direct.counts.tp, from_file.counts.tp);
    assert!((direct.hamming - from_file.hamming).abs() < 1e-12);
}

#[test]
fn trained_model_beats_the_zero_model() {
    let t = task();
    let out = train(&t.train, &t.labels, None, &TrainConfig { lambda: 0.0, ..config() }).unwrap();
    let trained = evaluate_model(&out.model, &t.labels, t.test.features.view(), t.test.labels.view(), Mode::UnseenOnly).unwrap();
    let zero = ModelParams::zeros(14, 10, 4);
    let baseline = evaluate_model(&zero, &t.labels, t.test.features.view(), t.test.labels.view(), Mode::UnseenOnly).unwrap();
    assert!(trained.miap > baseline.miap, "{} vs {}", trained.miap, baseline.miap);
}

#[test]
fn similarity_file_round_trip_keeps_training_identical() {
    let t = task();
    let sim = noisy_prototype_similarity(&t, 0.1, 3);
    let back = io::parse_similarity(&io::format_similarity(&sim), Path::new("sim.txt")).unwrap();
    let back = io::align_similarity(back, &t.labels).unwrap();
    let a = train(&t.train, &t.labels, Some(&sim), &config()).unwrap();
    let b = train(&t.train, &t.labels, Some(&back), &config()).unwrap();
    assert_eq!(a.model.w, b.model.w);
    assert_eq!(a.model.u, b.model.u);
}
