use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taep"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn taep")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "taep {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = run(dir, args);
    assert_eq!(out.status.code(), Some(code), "taep {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Synthetic task with 6 seen and 3 unseen labels under `data/`.
fn synth_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "synth", "--seed", "11", "--n-train", "60", "--n-test", "30", "--seen", "6", "--unseen", "3", "--m", "8",
            "--d", "10", "--out-dir", "data",
        ],
    );
    dir
}

const DATA: [&str; 8] = [
    "--features",
    "data/train_features.txt",
    "--labels",
    "data/train_labels.txt",
    "--embeddings",
    "data/embeddings.txt",
    "--seen-count",
    "6",
];

fn with_data<'a>(cmd: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(DATA);
    v.extend(rest);
    v
}

fn kv(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .to_owned()
}

#[test]
fn synth_writes_every_file() {
    let dir = synth_dir();
    for f in [
        "train_features.txt",
        "train_labels.txt",
        "test_features.txt",
        "test_truth.txt",
        "embeddings.txt",
        "labels.txt",
        "similarity.txt",
    ] {
        assert!(dir.path().join("data").join(f).exists(), "{f}");
    }
    let truth = fs::read_to_string(dir.path().join("data/test_truth.txt")).unwrap();
    assert!(truth.starts_with("30 9\n"));
}

#[test]
fn train_predict_evaluate_round_trip() {
    let dir = synth_dir();
    let d = dir.path();
    let stdout = ok(
        d,
        &with_data(
            "train",
            &["--beta", "1", "--gamma", "0", "--lambda", "0", "--r", "3", "--max-iters", "5", "--out", "m.txt", "--trace", "trace.tsv"],
        ),
    );
    assert!(stdout.contains("dual_objective="));
    assert!(stdout.contains("primal_objective="));
    let model = taep_core::io::read_model(&d.join("m.txt")).unwrap();
    assert!(model.params.orthonormality_error() < 1e-10);
    assert_eq!(fs::read_to_string(d.join("trace.tsv")).unwrap().lines().count(), 6);

    ok(d, &["predict", "--model", "m.txt", "--features", "data/test_features.txt", "--out", "p.txt"]);
    let preds = fs::read_to_string(d.join("p.txt")).unwrap();
    assert_eq!(preds.lines().filter(|l| !l.starts_with('#')).count(), 30);

    let direct = ok(
        d,
        &["evaluate", "--model", "m.txt", "--features", "data/test_features.txt", "--truth", "data/test_truth.txt"],
    );
    let from_file = ok(d, &["evaluate", "--predictions", "p.txt", "--truth", "data/test_truth.txt"]);
    assert_eq!(direct, from_file);
    assert!(direct.contains("MiAP"));
    assert_eq!(kv(&direct, "evaluated"), "30");
}

#[test]
fn lambda_without_similarity_is_a_config_error() {
    let dir = synth_dir();
    let err = fails(
        dir.path(),
        &with_data("train", &["--beta", "1", "--gamma", "0", "--lambda", "0.1", "--r", "2", "--out", "m.txt"]),
        1,
    );
    assert!(err.contains("--aux-sim"), "{err}");
    assert!(!dir.path().join("m.txt").exists());
}

#[test]
fn lambda_with_similarity_trains() {
    let dir = synth_dir();
    ok(
        dir.path(),
        &with_data(
            "train",
            &["--aux-sim", "data/similarity.txt", "--beta", "1", "--gamma", "1", "--lambda", "0.1", "--r", "2", "--max-iters", "3", "--out", "m.txt"],
        ),
    );
    let text = fs::read_to_string(dir.path().join("m.txt")).unwrap();
    assert!(text.contains("lambda = 0.1\n"));
}

#[test]
fn invalid_labels_exit_with_validation_code() {
    let dir = synth_dir();
    let d = dir.path();
    let mut labels = fs::read_to_string(d.join("data/train_labels.txt")).unwrap();
    let first_row = labels.lines().nth(1).unwrap().to_owned();
    labels = labels.replacen(&first_row, "1 1 1 1 1 1", 1);
    write(d, "bad_labels.txt", &labels);
    let err = fails(
        d,
        &[
            "train", "--features", "data/train_features.txt", "--labels", "bad_labels.txt", "--embeddings",
            "data/embeddings.txt", "--seen-count", "6", "--beta", "1", "--gamma", "0", "--lambda", "0", "--r", "2",
            "--out", "m.txt",
        ],
        2,
    );
    assert!(err.contains("empty negative set"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fails(dir.path(), &["train", "--beta", "1"], 1);
    fails(dir.path(), &["no-such-command"], 1);
    let missing = fails(
        dir.path(),
        &["predict", "--model", "nope.txt", "--features", "nope.txt", "--out", "p.txt"],
        1,
    );
    assert!(missing.contains("nope.txt"));
}

#[test]
fn malformed_matrix_names_file_and_line() {
    let dir = synth_dir();
    let d = dir.path();
    write(d, "bad.txt", "2 3\n1 2 3\n4 five 6\n");
    let err = fails(
        d,
        &["predict", "--model", "bad.txt", "--features", "bad.txt", "--out", "p.txt"],
        2,
    );
    assert!(err.contains("bad.txt"), "{err}");
}

/// Hand-built model: one seen and two unseen labels on the coordinate
/// axes, identity maps and a zero threshold, so the score of label `c` is
/// feature `c`.
fn axis_model(dir: &Path, w_scale: f64) -> PathBuf {
    let w = if w_scale == 0.0 {
        "0 0 0\n0 0 0\n0 0 0\n".to_owned()
    } else {
        "1 0 0\n0 1 0\n0 0 1\n".to_owned()
    };
    let text = format!(
        "[meta]\nformat_version = 1\nbeta = 1\ngamma = 0\nlambda = 0\nr = 3\nd = 3\nm = 3\nseen_count = 1\nunseen_count = 2\nnormalized = true\nlabels = s u1 u2\n\
         [W]\n3 3\n{w}[W0]\n1 3\n0 0 0\n[U]\n3 3\n1 0 0\n0 1 0\n0 0 1\n[M]\n3 3\n1 0 0\n0 1 0\n0 0 1\n"
    );
    write(dir, "axis.model", &text)
}

#[test]
fn perfect_predictions_score_full_marks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    axis_model(d, 1.0);
    write(d, "x.txt", "3 3\n0.5 1 -1\n0.5 -1 1\n0.5 1 2\n");
    write(d, "truth.txt", "3 2\n1 0\n0 1\n1 1\n");
    let report = ok(d, &["evaluate", "--model", "axis.model", "--features", "x.txt", "--truth", "truth.txt"]);
    assert!(report.starts_with("MiAP      100.00\n"), "{report}");
    assert_eq!(kv(&report, "miap"), "100.00");
    assert_eq!(kv(&report, "hamming"), "0.00");
    assert_eq!(kv(&report, "micro_f1"), "100.00");
    assert_eq!(kv(&report, "skipped"), "0");
}

#[test]
fn generalized_mode_needs_all_label_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    axis_model(d, 1.0);
    write(d, "x.txt", "1 3\n0.5 1 -1\n");
    write(d, "truth.txt", "1 2\n1 0\n");
    let err = fails(
        d,
        &["evaluate", "--model", "axis.model", "--features", "x.txt", "--truth", "truth.txt", "--mode", "generalized"],
        2,
    );
    assert!(err.contains("expected shape 3"), "{err}");
    write(d, "full.txt", "1 3\n1 1 0\n");
    let report = ok(
        d,
        &["evaluate", "--model", "axis.model", "--features", "x.txt", "--truth", "full.txt", "--mode", "generalized"],
    );
    assert_eq!(kv(&report, "miap"), "100.00");
}

#[test]
fn zero_model_predicts_zero_scores_and_no_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    axis_model(d, 0.0);
    write(d, "x.txt", "2 3\n0.5 1 -1\n3 4 5\n");
    ok(d, &["predict", "--model", "axis.model", "--features", "x.txt", "--out", "p.txt"]);
    let text = fs::read_to_string(d.join("p.txt")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, vec!["0\t-\tu1=0\tu2=0", "0\t-\tu1=0\tu2=0"]);
}

#[test]
fn hand_ranked_predictions_give_known_miap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // true labels a and c ranked first and third of four
    write(
        d,
        "p.txt",
        "# labels:\ts\ta\tb\tc\td\n# candidates:\ta\tb\tc\td\n0.5\ta,b\ta=0.9\tb=0.8\tc=0.3\td=0.1\n",
    );
    write(d, "truth.txt", "1 4\n1 0 1 0\n");
    let report = ok(d, &["evaluate", "--predictions", "p.txt", "--truth", "truth.txt"]);
    assert_eq!(kv(&report, "miap"), "83.33");
    assert_eq!(kv(&report, "hamming"), "50.00");
    let gen = fails(d, &["evaluate", "--predictions", "p.txt", "--truth", "truth.txt", "--mode", "generalized"], 1);
    assert!(gen.contains("generalized"), "{gen}");
}

#[test]
fn sim_build_hierarchy_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "h.txt", "# chain\nb\ta\nc\tb\n");
    write(d, "names.txt", "a\nb\nc\n");
    ok(d, &["sim-build", "--source", "hierarchy", "--input", "h.txt", "--labels", "names.txt", "--out", "r.txt"]);
    let sim = taep_core::io::read_similarity(&d.join("r.txt")).unwrap();
    assert_eq!(sim.names, vec!["a", "b", "c"]);
    let third = 1.0 / 3.0;
    assert_eq!(sim.values, ndarray::array![[1.0, 0.5, third], [0.5, 1.0, 0.5], [third, 0.5, 1.0]]);
}

#[test]
fn sim_build_counts_and_missing_label() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "c.txt", "i\t40\nj\t60\ni\tj\t10\n");
    write(d, "names.txt", "i\nj\n");
    ok(d, &["sim-build", "--source", "counts", "--input", "c.txt", "--labels", "names.txt", "--out", "r.txt"]);
    let sim = taep_core::io::read_similarity(&d.join("r.txt")).unwrap();
    assert_eq!(sim.values, ndarray::array![[1.0, 0.1], [0.1, 1.0]]);

    write(d, "more.txt", "i\nj\nk\n");
    let err = fails(d, &["sim-build", "--source", "counts", "--input", "c.txt", "--labels", "more.txt", "--out", "r2.txt"], 2);
    assert!(err.contains("\"k\""), "{err}");
    assert!(err.contains("c.txt"), "{err}");
}

#[test]
fn tune_single_point_grid_selects_it() {
    let dir = synth_dir();
    let d = dir.path();
    let out = ok(
        d,
        &with_data(
            "tune",
            &["--r", "2", "--betas", "3", "--gammas", "0.5", "--lambdas", "0", "--max-iters", "5", "--out", "t.txt", "--report", "grid.tsv"],
        ),
    );
    assert!(out.contains("selected beta=3 gamma=0.5 lambda=0"), "{out}");
    let model = taep_core::io::read_model(&d.join("t.txt")).unwrap();
    assert_eq!((model.params.beta, model.params.gamma), (3.0, 0.5));
    assert_eq!(fs::read_to_string(d.join("grid.tsv")).unwrap().lines().count(), 2);
}

#[test]
fn tune_needs_two_seen_labels() {
    let dir = synth_dir();
    let d = dir.path();
    let labels = fs::read_to_string(d.join("data/train_labels.txt")).unwrap();
    let n: usize = labels.split_whitespace().next().unwrap().parse().unwrap();
    write(d, "one.txt", &format!("{n} 1\n{}", "1\n".repeat(n)));
    let err = fails(
        d,
        &[
            "tune", "--features", "data/train_features.txt", "--labels", "one.txt", "--embeddings", "data/embeddings.txt",
            "--seen-count", "1", "--r", "1", "--out", "t.txt",
        ],
        1,
    );
    assert!(err.contains("cannot split 1 seen label"), "{err}");
}

#[test]
fn sweep_table_and_plot() {
    let dir = synth_dir();
    let d = dir.path();
    let out = ok(
        d,
        &with_data(
            "sweep",
            &[
                "--param", "gamma", "--beta", "1", "--gamma", "2", "--lambda", "0", "--r", "2", "--max-iters", "3",
                "--test-features", "data/test_features.txt", "--test-truth", "data/test_truth.txt", "--svg", "plot.svg",
                "--out", "table.tsv",
            ],
        ),
    );
    let factors: Vec<&str> = out.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(factors, vec!["1", "0.1", "0.01", "0.001"]);
    let values: Vec<&str> = out.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(values, vec!["2", "0.2", "0.02", "0.002"]);
    assert_eq!(fs::read_to_string(d.join("table.tsv")).unwrap(), out);
    let svg = fs::read_to_string(d.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn sweep_rejects_zero_base_lambda() {
    let dir = synth_dir();
    let err = fails(
        dir.path(),
        &with_data(
            "sweep",
            &[
                "--param", "lambda", "--beta", "1", "--gamma", "1", "--lambda", "0", "--r", "2",
                "--test-features", "data/test_features.txt", "--test-truth", "data/test_truth.txt",
            ],
        ),
        1,
    );
    assert!(err.contains("cannot sweep lambda from a base value of 0"), "{err}");
}
