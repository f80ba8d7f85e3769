//! Instance-label matching scores, calibrated thresholds and rankings.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::model::{LabelSpace, ModelParams};

/// Which labels are ranked at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Unseen labels only (zero-shot).
    UnseenOnly,
    /// Seen and unseen labels together (generalized zero-shot).
    AllLabels,
}

impl Mode {
    /// Label-space indices of the candidate labels, in label order.
    pub fn candidates(self, labels: &LabelSpace) -> Vec<usize> {
        match self {
            Mode::UnseenOnly => (labels.seen_count..labels.len()).collect(),
            Mode::AllLabels => (0..labels.len()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Label-space indices of the candidates, in label order.
    pub candidates: Vec<usize>,
    /// One score per candidate.
    pub scores: Vec<f64>,
    pub threshold: f64,
    /// Candidate positions (into `candidates`) by descending score.
    pub ranking: Vec<usize>,
    /// Candidate positions whose score strictly exceeds the threshold.
    pub positives: Vec<usize>,
}

fn check_dims(model: &ModelParams, x_dim: usize, m_dim: usize) -> Result<()> {
    if x_dim != model.d() {
        return Err(Error::shape("feature vector", model.d(), x_dim));
    }
    if m_dim != model.m() {
        return Err(Error::shape("embedding dimension", model.m(), m_dim));
    }
    Ok(())
}

/// `score_c = (x·W)·(M_c·U)ᵀ` for each candidate row `M_c`.
pub fn score(model: &ModelParams, x: ArrayView1<'_, f64>, candidates: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    check_dims(model, x.len(), candidates.ncols())?;
    let xw = x.dot(&model.w);
    Ok(candidates.dot(&model.u).dot(&xw))
}

/// Scores for every instance (rows) against every candidate (columns).
pub fn score_matrix(model: &ModelParams, x: ArrayView2<'_, f64>, candidates: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_dims(model, x.ncols(), candidates.ncols())?;
    Ok(x.dot(&model.w).dot(&candidates.dot(&model.u).t()))
}

/// The calibrated separation score `x·W0`.
pub fn threshold(model: &ModelParams, x: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != model.d() {
        return Err(Error::shape("feature vector", model.d(), x.len()));
    }
    Ok(x.dot(&model.w0))
}

/// Positions sorted by descending score, ties by ascending position.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn predict(model: &ModelParams, x: ArrayView1<'_, f64>, labels: &LabelSpace, mode: Mode) -> Result<Prediction> {
    let candidates = mode.candidates(labels);
    if candidates.is_empty() {
        return Err(Error::arg("no candidate labels to rank"));
    }
    let rows = labels.embeddings.select(ndarray::Axis(0), &candidates);
    let scores = score(model, x, rows.view())?.to_vec();
    let t = threshold(model, x)?;
    Ok(prediction_from_scores(candidates, scores, t))
}

pub fn prediction_from_scores(candidates: Vec<usize>, scores: Vec<f64>, threshold: f64) -> Prediction {
    let ranking = rank(&scores);
    let positives = (0..scores.len()).filter(|&c| scores[c] > threshold).collect();
    Prediction {
        candidates,
        scores,
        threshold,
        ranking,
        positives,
    }
}

/// Predictions for every row of `x`.
pub fn predict_all(model: &ModelParams, x: ArrayView2<'_, f64>, labels: &LabelSpace, mode: Mode) -> Result<Vec<Prediction>> {
    let candidates = mode.candidates(labels);
    if candidates.is_empty() {
        return Err(Error::arg("no candidate labels to rank"));
    }
    let rows = labels.embeddings.select(ndarray::Axis(0), &candidates);
    let scores = score_matrix(model, x, rows.view())?;
    let thresholds = x.dot(&model.w0);
    Ok(scores
        .outer_iter()
        .zip(thresholds.iter())
        .map(|(s, &t)| prediction_from_scores(candidates.clone(), s.to_vec(), t))
        .collect())
}
