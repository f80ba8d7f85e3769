//! Deterministic synthetic zero-shot tasks.
//!
//! Every label gets a prototype in embedding space. Seen prototypes are
//! Gaussian; each unseen prototype is `t·(convex blend of seen prototypes)
//! + (1 − t)·(fresh Gaussian direction) + noise`, with `t` the transfer
//! tightness. An instance's feature is `A·mean(prototypes of its labels)`
//! plus Gaussian noise, for a fixed random linear map `A` (d×m). Label
//! embeddings are the row-normalized prototypes, optionally perturbed by
//! `embedding_noise` to mimic imperfect word vectors; features are
//! row-normalized too.
//!
//! Randomness comes from ChaCha8 with one stream per entity (prototypes,
//! blend weights, map, train labels, train noise, test labels, test noise,
//! similarity noise, embedding noise), so growing one part of a task leaves
//! the rest unchanged.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{normalize_rows, Dataset, LabelSpace};
use crate::similarity::SimilarityMatrix;

const STREAM_PROTOTYPES: u64 = 1;
const STREAM_BLEND: u64 = 2;
const STREAM_MAP: u64 = 3;
const STREAM_TRAIN_LABELS: u64 = 4;
const STREAM_TRAIN_NOISE: u64 = 5;
const STREAM_TEST_LABELS: u64 = 6;
const STREAM_TEST_NOISE: u64 = 7;
const STREAM_SIMILARITY: u64 = 8;
const STREAM_EMBEDDING_NOISE: u64 = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub l_seen: usize,
    pub l_unseen: usize,
    pub m: usize,
    pub d: usize,
    /// Independent inclusion probability of each label.
    pub label_density: f64,
    pub noise_scale: f64,
    /// Weight of the seen-prototype blend in each unseen prototype.
    pub transfer_tightness: f64,
    /// Gaussian noise added to the prototypes before they are handed out
    /// as label embeddings. Features and similarities still use the clean
    /// prototypes.
    pub embedding_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_train: 200,
            n_test: 100,
            l_seen: 8,
            l_unseen: 4,
            m: 16,
            d: 24,
            label_density: 0.2,
            noise_scale: 0.1,
            transfer_tightness: 0.9,
            embedding_noise: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<()> {
        let counts = [
            ("n_train", self.n_train),
            ("n_test", self.n_test),
            ("l_seen", self.l_seen),
            ("m", self.m),
            ("d", self.d),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::arg(format!("{name} must be at least 1")));
            }
        }
        if self.l_seen < 2 {
            return Err(Error::arg("l_seen must be at least 2 so every row has a positive and a negative"));
        }
        if self.l_unseen < 2 {
            return Err(Error::arg("l_unseen must be at least 2"));
        }
        if !(self.label_density > 0.0 && self.label_density < 1.0) {
            return Err(Error::arg(format!("label_density must lie in (0, 1), got {}", self.label_density)));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::arg(format!("noise_scale must be nonnegative, got {}", self.noise_scale)));
        }
        if !(self.embedding_noise >= 0.0) || !self.embedding_noise.is_finite() {
            return Err(Error::arg(format!("embedding_noise must be nonnegative, got {}", self.embedding_noise)));
        }
        if !(0.0..=1.0).contains(&self.transfer_tightness) {
            return Err(Error::arg(format!(
                "transfer_tightness must lie in [0, 1], got {}",
                self.transfer_tightness
            )));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTask {
    pub train: Dataset,
    /// Test instances with truth over all L labels (seen columns first).
    pub test: Dataset,
    pub labels: LabelSpace,
    /// Raw L×m prototypes before normalization.
    pub prototypes: Array2<f64>,
    /// Lᵘ×Lˢ convex weights used for the unseen blends.
    pub blend_weights: Array2<f64>,
    /// d×m feature map.
    pub map: Array2<f64>,
}

impl SynthTask {
    pub fn test_unseen_truth(&self) -> Array2<f64> {
        self.test.labels.slice(ndarray::s![.., self.labels.seen_count..]).to_owned()
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub fn generate(config: &SynthConfig) -> Result<SynthTask> {
    config.check()?;
    let (ls, lu, m, d) = (config.l_seen, config.l_unseen, config.m, config.d);
    let l = ls + lu;
    let t = config.transfer_tightness;

    let mut proto_rng = config.rng(STREAM_PROTOTYPES);
    let seen = gaussian_matrix(&mut proto_rng, ls, m);
    let fresh = gaussian_matrix(&mut proto_rng, lu, m);
    let proto_noise = gaussian_matrix(&mut proto_rng, lu, m);

    let mut blend_rng = config.rng(STREAM_BLEND);
    let mut blend_weights = Array2::<f64>::zeros((lu, ls));
    for mut row in blend_weights.outer_iter_mut() {
        // flat Dirichlet via normalized exponentials
        row.mapv_inplace(|_| Exp1.sample(&mut blend_rng));
        let total = row.sum();
        row.mapv_inplace(|v: f64| v / total);
    }
    let blended = blend_weights.dot(&seen);
    let unseen = blended * t + fresh * (1.0 - t) + proto_noise * config.noise_scale;

    let mut prototypes = Array2::<f64>::zeros((l, m));
    prototypes.slice_mut(ndarray::s![..ls, ..]).assign(&seen);
    prototypes.slice_mut(ndarray::s![ls.., ..]).assign(&unseen);

    let mut map_rng = config.rng(STREAM_MAP);
    let map = gaussian_matrix(&mut map_rng, d, m) / (m as f64).sqrt();

    let train_labels = draw_labels(
        &mut config.rng(STREAM_TRAIN_LABELS),
        config.n_train,
        ls,
        config.label_density,
        |row| row.iter().any(|&v| v) && !row.iter().all(|&v| v),
    );
    let test_labels = draw_labels(
        &mut config.rng(STREAM_TEST_LABELS),
        config.n_test,
        l,
        config.label_density,
        |row| row[ls..].iter().any(|&v| v) && !row.iter().all(|&v| v),
    );

    let train_x = features(&prototypes, &map, &train_labels, config.noise_scale, &mut config.rng(STREAM_TRAIN_NOISE));
    let test_x = features(&prototypes, &map, &test_labels, config.noise_scale, &mut config.rng(STREAM_TEST_NOISE));

    let names = (0..l)
        .map(|i| if i < ls { format!("seen{i}") } else { format!("unseen{}", i - ls) })
        .collect();
    let mut embeddings = prototypes.clone();
    if config.embedding_noise > 0.0 {
        let noise = gaussian_matrix(&mut config.rng(STREAM_EMBEDDING_NOISE), l, m);
        embeddings.scaled_add(config.embedding_noise, &noise);
    }
    let labels = LabelSpace::new(names, ls, embeddings).normalized();

    Ok(SynthTask {
        train: Dataset::new(train_x, train_labels),
        test: Dataset::new(test_x, test_labels),
        labels,
        prototypes,
        blend_weights,
        map,
    })
}

/// Independent Bernoulli rows, redrawn until `accept` holds.
fn draw_labels(
    rng: &mut ChaCha8Rng,
    n: usize,
    cols: usize,
    density: f64,
    accept: impl Fn(&[bool]) -> bool,
) -> Array2<f64> {
    let mut out = Array2::zeros((n, cols));
    let mut row = vec![false; cols];
    for mut target in out.outer_iter_mut() {
        loop {
            for v in row.iter_mut() {
                *v = rng.gen::<f64>() < density;
            }
            if accept(&row) {
                break;
            }
        }
        for (dst, &v) in target.iter_mut().zip(&row) {
            *dst = if v { 1.0 } else { 0.0 };
        }
    }
    out
}

fn features(
    prototypes: &Array2<f64>,
    map: &Array2<f64>,
    labels: &Array2<f64>,
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let cols = labels.ncols();
    let protos = prototypes.slice(ndarray::s![..cols, ..]);
    let counts = labels.sum_axis(Axis(1));
    let means = labels.dot(&protos) / &counts.insert_axis(Axis(1));
    let mut x = means.dot(&map.t());
    let noise = gaussian_matrix(rng, x.nrows(), x.ncols());
    x.scaled_add(noise_scale, &noise);
    normalize_rows(x.view())
}

/// A noisy version of the true label affinity: cosine similarity of the
/// prototypes, clipped at zero, perturbed by uniform noise of the given
/// amplitude and symmetrized, with unit diagonal.
pub fn noisy_prototype_similarity(task: &SynthTask, noise: f64, seed: u64) -> SimilarityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_SIMILARITY);
    let unit = normalize_rows(task.prototypes.view());
    let cos = unit.dot(&unit.t());
    let l = cos.nrows();
    let mut values = Array2::<f64>::zeros((l, l));
    for i in 0..l {
        values[[i, i]] = 1.0;
        for j in 0..i {
            let v = (cos[[i, j]] + noise * (rng.gen::<f64>() * 2.0 - 1.0)).clamp(0.0, 1.0);
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    SimilarityMatrix {
        names: task.labels.names.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use approx::assert_abs_diff_eq;

    fn small() -> SynthConfig {
        SynthConfig {
            n_train: 30,
            n_test: 20,
            l_seen: 5,
            l_unseen: 3,
            m: 6,
            d: 7,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.train.features, c.train.features);
    }

    #[test]
    fn more_instances_keep_prototypes_and_prefix() {
        let a = generate(&small()).unwrap();
        let b = generate(&SynthConfig { n_train: 60, ..small() }).unwrap();
        assert_eq!(a.prototypes, b.prototypes);
        assert_eq!(a.map, b.map);
        assert_eq!(a.train.labels, b.train.labels.slice(ndarray::s![..30, ..]));
        assert_eq!(a.train.features, b.train.features.slice(ndarray::s![..30, ..]));
    }

    #[test]
    fn passes_validation() {
        for seed in 0..5 {
            let task = generate(&SynthConfig { seed, ..small() }).unwrap();
            let report = validate(&task.train, &task.labels);
            assert!(report.is_ok(), "{report:?}");
            assert_eq!(task.test.labels.ncols(), 8);
        }
    }

    #[test]
    fn noiseless_single_label_feature() {
        let cfg = SynthConfig {
            noise_scale: 0.0,
            label_density: 0.05,
            ..small()
        };
        let task = generate(&cfg).unwrap();
        let mut checked = 0;
        for (x, y) in task.train.features.outer_iter().zip(task.train.labels.outer_iter()) {
            let pos: Vec<usize> = (0..5).filter(|&c| y[c] == 1.0).collect();
            if pos.len() == 1 {
                let raw = task.map.dot(&task.prototypes.row(pos[0]));
                let expected = &raw / raw.dot(&raw).sqrt();
                assert_abs_diff_eq!(x.to_owned(), expected, epsilon = 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn sparse_density_still_has_positives() {
        let task = generate(&SynthConfig { label_density: 1e-3, n_train: 20, n_test: 5, ..small() }).unwrap();
        for row in task.train.labels.outer_iter() {
            assert!(row.sum() >= 1.0);
        }
    }

    #[test]
    fn tight_noiseless_unseen_in_convex_hull() {
        let cfg = SynthConfig {
            transfer_tightness: 1.0,
            noise_scale: 0.0,
            ..small()
        };
        let task = generate(&cfg).unwrap();
        let seen = task.prototypes.slice(ndarray::s![..5, ..]).to_owned();
        for (k, target) in task.prototypes.slice(ndarray::s![5.., ..]).outer_iter().enumerate() {
            // least squares for the blend weights: (SSᵀ) w = S p
            let gram = seen.dot(&seen.t());
            let rhs = seen.dot(&target);
            let w = crate::linalg::solve(gram.view(), rhs.view(), 1e-12).unwrap();
            let fit = seen.t().dot(&w);
            assert_abs_diff_eq!(fit, target.to_owned(), epsilon = 1e-9);
            assert!(w.iter().all(|&v| v >= -1e-9));
            assert_abs_diff_eq!(w.sum(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(w, task.blend_weights.row(k).to_owned(), epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate(&SynthConfig { l_unseen: 1, ..small() }).is_err());
        assert!(generate(&SynthConfig { label_density: 1.0, ..small() }).is_err());
        assert!(generate(&SynthConfig { transfer_tightness: 1.5, ..small() }).is_err());
    }

    #[test]
    fn similarity_is_valid() {
        let task = generate(&small()).unwrap();
        let r = noisy_prototype_similarity(&task, 0.1, 3);
        assert_eq!(r.values, r.values.t());
        assert!(r.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((0..8).all(|i| r.values[[i, i]] == 1.0));
    }
}
