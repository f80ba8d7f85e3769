//! Multi-label evaluation: mean image average precision over rankings,
//! and micro/macro F1 and Hamming loss over binarized predictions.
//!
//! F1 values with a zero denominator are 0. Instances without any true
//! label among the evaluated columns are skipped by MiAP and counted.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scoring::Prediction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiapResult {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Average precision of one ranking (column positions, best first) against
/// a binary truth row. `None` if the row has no positives.
pub fn average_precision(ranking: &[usize], truth: &[bool]) -> Option<f64> {
    let total = truth.iter().filter(|&&t| t).count();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (k, &c) in ranking.iter().enumerate() {
        if truth[c] {
            hits += 1;
            acc += hits as f64 / (k + 1) as f64;
        }
    }
    Some(acc / total as f64)
}

pub fn miap(rankings: &[Vec<usize>], truth: ArrayView2<'_, f64>) -> Result<MiapResult> {
    if rankings.len() != truth.nrows() {
        return Err(Error::shape("rankings", truth.nrows(), rankings.len()));
    }
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for (ranking, row) in rankings.iter().zip(truth.outer_iter()) {
        if ranking.len() != row.len() || ranking.iter().any(|&c| c >= row.len()) {
            return Err(Error::arg(format!(
                "ranking over {} labels does not match {} truth columns",
                ranking.len(),
                row.len()
            )));
        }
        let t: Vec<bool> = row.iter().map(|&v| v == 1.0).collect();
        match average_precision(ranking, &t) {
            Some(ap) => {
                sum += ap;
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    let value = if evaluated == 0 { 0.0 } else { sum / evaluated as f64 };
    Ok(MiapResult {
        value,
        evaluated,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

fn same_shape(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::shape("prediction matrix", truth.dim(), pred.dim()));
    }
    Ok(())
}

pub fn pooled_counts(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<Counts> {
    same_shape(pred, truth)?;
    let mut c = Counts::default();
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        c.add(p == 1.0, t == 1.0);
    }
    Ok(c)
}

pub fn micro_f1(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(pooled_counts(pred, truth)?.f1())
}

/// Unweighted mean of per-class F1, plus the per-class values.
pub fn macro_f1(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<(f64, Vec<f64>)> {
    same_shape(pred, truth)?;
    let per_class: Vec<f64> = pred
        .columns()
        .into_iter()
        .zip(truth.columns())
        .map(|(p, t)| {
            let mut c = Counts::default();
            for (&a, &b) in p.iter().zip(t.iter()) {
                c.add(a == 1.0, b == 1.0);
            }
            c.f1()
        })
        .collect();
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().sum::<f64>() / per_class.len() as f64
    };
    Ok((mean, per_class))
}

pub fn hamming(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<f64> {
    same_shape(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::arg("Hamming loss of an empty matrix"));
    }
    let wrong = pred.iter().zip(truth.iter()).filter(|(p, t)| (**p == 1.0) != (**t == 1.0)).count();
    Ok(wrong as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub miap: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub hamming: f64,
    pub per_class_f1: Vec<f64>,
    pub counts: Counts,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Scores predictions against truth columns aligned with each
/// prediction's candidate order.
pub fn evaluate(predictions: &[Prediction], truth: ArrayView2<'_, f64>) -> Result<EvalResult> {
    if predictions.len() != truth.nrows() {
        return Err(Error::shape("predictions", truth.nrows(), predictions.len()));
    }
    let cols = truth.ncols();
    let mut binary = Array2::<f64>::zeros(truth.dim());
    let mut rankings = Vec::with_capacity(predictions.len());
    for (i, p) in predictions.iter().enumerate() {
        if p.scores.len() != cols {
            return Err(Error::shape("truth columns", p.scores.len(), cols));
        }
        for &c in &p.positives {
            binary[[i, c]] = 1.0;
        }
        rankings.push(p.ranking.clone());
    }
    let m = miap(&rankings, truth)?;
    let counts = pooled_counts(binary.view(), truth)?;
    let (macro_f1, per_class_f1) = macro_f1(binary.view(), truth)?;
    Ok(EvalResult {
        miap: m.value,
        micro_f1: counts.f1(),
        macro_f1,
        hamming: hamming(binary.view(), truth)?,
        per_class_f1,
        counts,
        evaluated: m.evaluated,
        skipped: m.skipped,
    })
}
