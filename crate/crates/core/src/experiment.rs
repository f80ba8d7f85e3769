//! Model selection and regularization sweeps.
//!
//! Hyperparameters are chosen without touching the unseen labels: the seen
//! labels are split in two halves, a model is trained on the first half and
//! scored on held-out instances against the second half as if those labels
//! were unseen. The selected point is then retrained on all seen labels.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult};
use crate::model::{Dataset, LabelSpace, ModelParams};
use crate::scoring::{predict_all, Mode};
use crate::similarity::SimilarityMatrix;
use crate::trainer::{train_monitored, TrainConfig, TrainOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Miap,
    MicroF1,
    MacroF1,
    Hamming,
}

impl Metric {
    pub fn value(self, e: &EvalResult) -> f64 {
        match self {
            Metric::Miap => e.miap,
            Metric::MicroF1 => e.micro_f1,
            Metric::MacroF1 => e.macro_f1,
            Metric::Hamming => e.hamming,
        }
    }

    /// Selection score, higher is better. Hamming loss is negated.
    pub fn score(self, e: &EvalResult) -> f64 {
        let v = self.value(e);
        let s = if self == Metric::Hamming { -v } else { v };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "miap" => Ok(Metric::Miap),
            "micro_f1" => Ok(Metric::MicroF1),
            "macro_f1" => Ok(Metric::MacroF1),
            "hamming" => Ok(Metric::Hamming),
            _ => Err(Error::arg(format!(
                "unknown metric '{s}' (expected miap, micro_f1, macro_f1 or hamming)"
            ))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Miap => "miap",
            Metric::MicroF1 => "micro_f1",
            Metric::MacroF1 => "macro_f1",
            Metric::Hamming => "hamming",
        })
    }
}

/// Candidate values for `(β, γ, λ)`; the search runs over the product.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Grid {
    /// β ∈ {1, …, 10}, γ and λ ∈ {0.01, 0.1, 1, 10}.
    pub fn default_grid() -> Self {
        Self {
            betas: (1..=10).map(f64::from).collect(),
            gammas: vec![0.01, 0.1, 1.0, 10.0],
            lambdas: vec![0.01, 0.1, 1.0, 10.0],
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.betas.is_empty() || self.gammas.is_empty() || self.lambdas.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        if self.betas.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::Config("grid betas must be positive".into()));
        }
        if self.gammas.iter().chain(&self.lambdas).any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("grid gammas and lambdas must be nonnegative".into()));
        }
        Ok(())
    }

    /// All grid points in lexicographic `(β, γ, λ)` order, duplicates removed.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (bs, gs, ls) = (sorted(&self.betas), sorted(&self.gammas), sorted(&self.lambdas));
        let mut out = Vec::with_capacity(bs.len() * gs.len() * ls.len());
        for &b in &bs {
            for &g in &gs {
                for &l in &ls {
                    out.push((b, g, l));
                }
            }
        }
        out
    }
}

/// Validation problem built from the seen labels alone.
#[derive(Debug, Clone)]
pub struct SeenSplit {
    /// Training instances restricted to the first half of the seen labels.
    pub train: Dataset,
    /// Seen half A followed by the validation half B (treated as unseen).
    pub labels: LabelSpace,
    pub valid_features: Array2<f64>,
    /// Held-out truth over the B labels.
    pub valid_truth: Array2<f64>,
    pub similarity: Option<SimilarityMatrix>,
}

/// Splits seen labels by label order (half A gets the extra label when
/// the count is odd) and holds out a seeded fraction of the instances for
/// scoring against half B.
pub fn split_seen(
    dataset: &Dataset,
    labels: &LabelSpace,
    similarity: Option<&SimilarityMatrix>,
    seed: u64,
    holdout_fraction: f64,
) -> Result<SeenSplit> {
    let ls = labels.seen_count;
    if ls < 2 {
        return Err(Error::Config(format!("cannot split {ls} seen label(s) into training and validation halves")));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::arg(format!("holdout fraction must lie in (0, 1), got {holdout_fraction}")));
    }
    let n = dataset.n();
    if n < 2 {
        return Err(Error::Config("need at least two instances to hold some out".into()));
    }
    let half_a = (ls + 1) / 2;
    let a: Vec<usize> = (0..half_a).collect();
    let b: Vec<usize> = (half_a..ls).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_valid = ((n as f64 * holdout_fraction).round() as usize).clamp(1, n - 1);
    let (valid_rows, train_rows) = order.split_at(n_valid);
    let mut train_rows = train_rows.to_vec();
    let mut valid_rows = valid_rows.to_vec();
    train_rows.sort_unstable();
    valid_rows.sort_unstable();

    let pool = Dataset::new(
        dataset.features.select(Axis(0), &train_rows),
        dataset.labels.select(Axis(0), &train_rows),
    );
    let train = pool.select_labels(&a);
    if train.n() == 0 {
        return Err(Error::Config(
            "no training instance has both a positive and a negative label in the first half of the seen labels".into(),
        ));
    }
    let all: Vec<usize> = (0..ls).collect();
    let split_labels = labels.reorder(&all, half_a);
    let split_similarity = similarity.map(|s| SimilarityMatrix {
        names: split_labels.names.clone(),
        values: s.values.select(Axis(0), &all).select(Axis(1), &all),
    });
    Ok(SeenSplit {
        train,
        labels: split_labels,
        valid_features: dataset.features.select(Axis(0), &valid_rows),
        valid_truth: dataset.labels.select(Axis(0), &valid_rows).select(Axis(1), &b),
        similarity: split_similarity,
    })
}

/// Truth columns matching the candidates of `mode`. Accepts either exactly
/// those columns or a full truth matrix over every label.
pub fn truth_for_mode(truth: ArrayView2<'_, f64>, labels: &LabelSpace, mode: Mode) -> Result<Array2<f64>> {
    let candidates = mode.candidates(labels);
    if truth.ncols() == candidates.len() {
        Ok(truth.to_owned())
    } else if truth.ncols() == labels.len() {
        Ok(truth.select(Axis(1), &candidates))
    } else {
        Err(Error::shape("truth columns", candidates.len(), truth.ncols()))
    }
}

pub fn evaluate_model(
    model: &ModelParams,
    labels: &LabelSpace,
    features: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, f64>,
    mode: Mode,
) -> Result<EvalResult> {
    if features.nrows() != truth.nrows() {
        return Err(Error::shape("truth rows", features.nrows(), truth.nrows()));
    }
    let truth = truth_for_mode(truth, labels, mode)?;
    let predictions = predict_all(model, features, labels, mode)?;
    evaluate(&predictions, truth.view())
}

#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub grid: Grid,
    pub metric: Metric,
    pub seed: u64,
    pub holdout_fraction: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            grid: Grid::default_grid(),
            metric: Metric::Miap,
            seed: 0,
            holdout_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridScore {
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub score: f64,
    pub eval: EvalResult,
}

#[derive(Debug, Clone)]
pub struct TuneReport {
    /// Every grid point in lexicographic order with its validation result.
    pub scores: Vec<GridScore>,
    /// Index into `scores` of the selected point.
    pub selected: usize,
    /// Configuration of the final retraining on all seen labels.
    pub config: TrainConfig,
    pub output: TrainOutput,
}

impl TuneReport {
    pub fn selected(&self) -> &GridScore {
        &self.scores[self.selected]
    }
}

/// Trains `config` on the split and scores it on the validation half.
/// With `keep_best_iterate` the best validation iterate is scored.
pub fn validate_point(split: &SeenSplit, config: &TrainConfig, metric: Metric) -> Result<EvalResult> {
    let sim = if config.lambda > 0.0 { split.similarity.as_ref() } else { None };
    let score = |model: &ModelParams| -> Result<EvalResult> {
        evaluate_model(
            model,
            &split.labels,
            split.valid_features.view(),
            split.valid_truth.view(),
            Mode::UnseenOnly,
        )
    };
    let out = if config.keep_best_iterate {
        let mut monitor = |m: &ModelParams| score(m).map(|e| metric.score(&e)).unwrap_or(f64::NEG_INFINITY);
        train_monitored(&split.train, &split.labels, sim, config, Some(&mut monitor))?
    } else {
        train_monitored(&split.train, &split.labels, sim, config, None)?
    };
    score(&out.model)
}

/// Grid search on the seen-label split followed by retraining on all seen
/// labels. Ties keep the lexicographically smallest `(β, γ, λ)`.
pub fn tune(
    dataset: &Dataset,
    labels: &LabelSpace,
    similarity: Option<&SimilarityMatrix>,
    base: &TrainConfig,
    options: &TuneOptions,
) -> Result<TuneReport> {
    options.grid.check()?;
    let points = options.grid.points();
    if similarity.is_none() && points.iter().any(|&(_, _, l)| l > 0.0) {
        return Err(Error::Config("grid contains lambda > 0 but no auxiliary similarity was given".into()));
    }
    let split = split_seen(dataset, labels, similarity, options.seed, options.holdout_fraction)?;
    let mut scores: Vec<GridScore> = Vec::with_capacity(points.len());
    let mut selected = 0;
    for (k, &(beta, gamma, lambda)) in points.iter().enumerate() {
        let config = TrainConfig {
            beta,
            gamma,
            lambda,
            ..base.clone()
        };
        let eval = validate_point(&split, &config, options.metric)?;
        let score = options.metric.score(&eval);
        log::info!("grid beta={beta} gamma={gamma} lambda={lambda}: {}={:.6}", options.metric, options.metric.value(&eval));
        if k > 0 && score > scores[selected].score {
            selected = k;
        }
        scores.push(GridScore {
            beta,
            gamma,
            lambda,
            score,
            eval,
        });
    }
    let best = &scores[selected];
    let config = TrainConfig {
        beta: best.beta,
        gamma: best.gamma,
        lambda: best.lambda,
        keep_best_iterate: false,
        ..base.clone()
    };
    let sim = if config.lambda > 0.0 { similarity } else { None };
    let output = train_monitored(dataset, labels, sim, &config, None)?;
    Ok(TuneReport {
        scores,
        selected,
        config,
        output,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    Lambda,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "lambda" => Ok(SweepParam::Lambda),
            _ => Err(Error::arg(format!("unknown sweep parameter '{s}' (expected gamma or lambda)"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Lambda => "lambda",
        })
    }
}

pub const SWEEP_FACTORS: [f64; 4] = [1.0, 0.1, 0.01, 0.001];

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub factor: f64,
    pub value: f64,
    pub eval: EvalResult,
}

/// Retrains with the swept parameter scaled by each of [`SWEEP_FACTORS`]
/// and evaluates on a test set.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    dataset: &Dataset,
    labels: &LabelSpace,
    similarity: Option<&SimilarityMatrix>,
    base: &TrainConfig,
    param: SweepParam,
    test_features: ArrayView2<'_, f64>,
    test_truth: ArrayView2<'_, f64>,
    mode: Mode,
) -> Result<Vec<SweepRow>> {
    let base_value = match param {
        SweepParam::Gamma => base.gamma,
        SweepParam::Lambda => base.lambda,
    };
    if !(base_value > 0.0) {
        return Err(Error::Config(format!(
            "cannot sweep {param} from a base value of {base_value}: every scaled value would be zero"
        )));
    }
    let mut rows = Vec::with_capacity(SWEEP_FACTORS.len());
    for &factor in &SWEEP_FACTORS {
        let value = base_value * factor;
        let mut config = base.clone();
        match param {
            SweepParam::Gamma => config.gamma = value,
            SweepParam::Lambda => config.lambda = value,
        }
        let sim = if config.lambda > 0.0 { similarity } else { None };
        let out = train_monitored(dataset, labels, sim, &config, None)?;
        let eval = evaluate_model(&out.model, labels, test_features, test_truth, mode)?;
        rows.push(SweepRow { factor, value, eval });
    }
    Ok(rows)
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. A constant
/// input has no ordering and yields 0.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape("spearman input", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::arg("spearman correlation needs at least two points"));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// MiAP against the scaling factor on a log axis, as a standalone SVG.
pub fn sweep_svg(rows: &[SweepRow], param: SweepParam) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 56.0;
    let xs: Vec<f64> = rows.iter().map(|r| r.factor.log10()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.eval.miap * 100.0).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = H - PAD,
        r = W - PAD,
    );
    let points: Vec<String> = xs.iter().zip(&ys).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    svg += &format!(
        "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>\n",
        points.join(" ")
    );
    for (row, (&x, &y)) in rows.iter().zip(xs.iter().zip(&ys)) {
        svg += &format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{:.2}</text>\n",
            px(x),
            py(y),
            px(x),
            H - PAD + 16.0,
            row.factor,
            px(x),
            py(y) - 8.0,
            y
        );
    }
    svg += &format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{param} scaling factor</text>\n\
         <text x=\"16\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">MiAP (%)</text>\n</svg>\n",
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0
    );
    svg
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        (lo - 1.0, lo + 1.0)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn default_grid_shape() {
        let g = Grid::default_grid();
        assert_eq!(g.betas, (1..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(g.gammas, vec![0.01, 0.1, 1.0, 10.0]);
        assert_eq!(g.points().len(), 160);
        let p = g.points();
        assert_eq!(p[0], (1.0, 0.01, 0.01));
        assert_eq!(p[1], (1.0, 0.01, 0.1));
        assert_eq!(p[159], (10.0, 10.0, 10.0));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[0.4, 0.3, 0.2, 0.1]).unwrap(), -1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[5.0, 6.0, 9.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        // ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 5.0, 5.0, 7.0]).unwrap();
        assert!((r - 4.5 / 4.5f64.sqrt() / 5.0f64.sqrt()).abs() < 1e-15);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn truth_alignment() {
        let labels = LabelSpace::new(vec!["a".into(), "b".into(), "c".into()], 1, Array2::eye(3));
        let full = array![[1.0, 0.0, 1.0]];
        assert_eq!(truth_for_mode(full.view(), &labels, Mode::UnseenOnly).unwrap(), array![[0.0, 1.0]]);
        assert_eq!(truth_for_mode(full.view(), &labels, Mode::AllLabels).unwrap(), full);
        let unseen = array![[0.0, 1.0]];
        assert!(truth_for_mode(unseen.view(), &labels, Mode::AllLabels).is_err());
    }

    fn small_task() -> crate::synth::SynthTask {
        generate(&SynthConfig {
            seed: 3,
            n_train: 40,
            n_test: 20,
            l_seen: 5,
            l_unseen: 2,
            m: 6,
            d: 8,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn split_uses_label_order_and_is_seeded() {
        let task = small_task();
        let s1 = split_seen(&task.train, &task.labels, None, 7, 0.3).unwrap();
        let s2 = split_seen(&task.train, &task.labels, None, 7, 0.3).unwrap();
        assert_eq!(s1.labels.seen_count, 3);
        assert_eq!(s1.labels.names, task.labels.names[..5].to_vec());
        assert_eq!(s1.valid_truth.ncols(), 2);
        assert_eq!(s1.valid_features.nrows(), 12);
        assert_eq!(s1.train.features, s2.train.features);
        assert_eq!(s1.valid_truth, s2.valid_truth);
        assert_eq!(s1.train.label_count(), 3);

        let single = LabelSpace::new(vec!["a".into(), "b".into()], 1, Array2::eye(2));
        let ds = Dataset::new(array![[1.0], [0.5]], array![[1.0], [0.0]]);
        assert!(split_seen(&ds, &single, None, 0, 0.3).is_err());
    }

    #[test]
    fn one_point_grid_selects_it() {
        let task = small_task();
        let options = TuneOptions {
            grid: Grid {
                betas: vec![2.0],
                gammas: vec![0.5],
                lambdas: vec![0.0],
            },
            ..TuneOptions::default()
        };
        let base = TrainConfig {
            r: 2,
            max_outer_iterations: 3,
            ..TrainConfig::default()
        };
        let report = tune(&task.train, &task.labels, None, &base, &options).unwrap();
        assert_eq!(report.scores.len(), 1);
        assert_eq!((report.config.beta, report.config.gamma), (2.0, 0.5));
        assert_eq!(report.output.model.beta, 2.0);
    }

    #[test]
    fn lambda_grid_without_similarity_is_rejected() {
        let task = small_task();
        let options = TuneOptions {
            grid: Grid {
                betas: vec![1.0],
                gammas: vec![0.0],
                lambdas: vec![1.0],
            },
            ..TuneOptions::default()
        };
        let err = tune(&task.train, &task.labels, None, &TrainConfig::default(), &options).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn sweep_factors_and_zero_base() {
        let task = small_task();
        let base = TrainConfig {
            r: 2,
            gamma: 3.0,
            max_outer_iterations: 2,
            ..TrainConfig::default()
        };
        let truth = task.test_unseen_truth();
        let rows = sweep(
            &task.train,
            &task.labels,
            None,
            &base,
            SweepParam::Gamma,
            task.test.features.view(),
            truth.view(),
            Mode::UnseenOnly,
        )
        .unwrap();
        assert_eq!(rows.iter().map(|r| r.factor).collect::<Vec<_>>(), vec![1.0, 0.1, 0.01, 0.001]);
        assert_eq!(rows[2].value, 3.0 * 0.01);
        let svg = sweep_svg(&rows, SweepParam::Gamma);
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));

        let err = sweep(
            &task.train,
            &task.labels,
            None,
            &base,
            SweepParam::Lambda,
            task.test.features.view(),
            truth.view(),
            Mode::UnseenOnly,
        )
        .unwrap_err();
        assert!(err.to_string().contains("base value"));
    }

    proptest! {
        #[test]
        fn spearman_matches_pearson_on_ranks_without_ties(v in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            prop_assume!(sorted.len() == 4);
            // against the closed form 1 − 6Σd²/(n(n²−1))
            let idx = [1.0, 2.0, 3.0, 4.0];
            let ranks: Vec<f64> = v.iter().map(|x| sorted.iter().position(|s| s == x).unwrap() as f64 + 1.0).collect();
            let d2: f64 = idx.iter().zip(&ranks).map(|(a, b)| (a - b) * (a - b)).sum();
            let closed = 1.0 - 6.0 * d2 / (4.0 * 15.0);
            prop_assert!((spearman(&idx, &v).unwrap() - closed).abs() < 1e-12);
        }
    }
}
