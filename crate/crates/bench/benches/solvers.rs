use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::{Array1, Array2};

use taep_core::eigen::top_r_eigenvectors;
use taep_core::qp::{solve_row_qp, RowQP};
use taep_core::synth::{generate, SynthConfig};
use taep_core::trainer::{coordinate_pass, DualState, TrainConfig, TrainingData};

// Cheap deterministic fill so the benches don't need an RNG dependency.
fn filled(rows: usize, cols: usize, salt: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| (((i * 31 + j * 17 + salt) % 97) as f64 / 48.5) - 1.0)
}

fn row_qp(ls: usize) -> RowQP {
    let a = filled(ls, 3, ls);
    let h = a.dot(&a.t()) + 1.0;
    let f = Array1::from_shape_fn(ls, |i| ((i * 7) % 5) as f64 - 2.0);
    let mask = (0..ls).map(|i| i % 3 == 0).collect();
    RowQP::new(h, f, mask, 0).unwrap()
}

fn bench_qp(c: &mut Criterion) {
    let mut g = c.benchmark_group("row_qp");
    for ls in [8, 32, 128] {
        let qp = row_qp(ls);
        g.bench_with_input(BenchmarkId::from_parameter(ls), &qp, |b, qp| {
            b.iter(|| solve_row_qp(black_box(qp), 1e-10).unwrap())
        });
    }
    g.finish();
}

fn bench_eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("jacobi_top_r");
    for m in [16, 64, 128] {
        let a = filled(m, m, m);
        let s = (&a + &a.t()) * 0.5;
        g.bench_with_input(BenchmarkId::from_parameter(m), &s, |b, s| {
            b.iter(|| top_r_eigenvectors(black_box(s.view()), m / 4).unwrap())
        });
    }
    g.finish();
}

fn bench_pass(c: &mut Criterion) {
    let task = generate(&SynthConfig {
        seed: 1,
        n_train: 200,
        l_seen: 12,
        l_unseen: 5,
        m: 24,
        d: 24,
        ..SynthConfig::default()
    })
    .unwrap();
    let data = TrainingData::new(&task.train, &task.labels, None).unwrap();
    let config = TrainConfig {
        beta: 2.0,
        gamma: 100.0,
        lambda: 0.0,
        r: 6,
        ..TrainConfig::default()
    };
    let start = DualState::zeros(data.n(), data.seen_count, data.embedding_dim(), config.r);
    c.bench_function("coordinate_pass_n200", |b| {
        b.iter(|| coordinate_pass(black_box(start.clone()), &data, &config).unwrap())
    });
}

criterion_group!(benches, bench_qp, bench_eigen, bench_pass);
criterion_main!(benches);
