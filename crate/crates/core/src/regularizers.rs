//! Label-structure penalties on the embedding projection `U`.
//!
//! The transfer matrix `Q` rewards projected similarity between seen and
//! unseen labels and penalizes similarity among unseen labels. The optional
//! auxiliary term is a normalized graph Laplacian over an external label
//! similarity `R`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::trace_quadratic;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferQ {
    pub q: Array2<f64>,
    pub seen_count: usize,
    pub unseen_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxLaplacian {
    /// `I − D^{-1/2} R D^{-1/2}`
    pub q_aux: Array2<f64>,
    /// Row sums of `R`.
    pub degree: Array1<f64>,
}

/// Builds the L×L block matrix with a zero seen-seen block, constant
/// `−1/(2·Lˢ·Lᵘ)` seen-unseen blocks and `1/(Lᵘ(Lᵘ−1))` off the diagonal
/// of the unseen-unseen block. With a single unseen label that last block
/// is zero.
pub fn build_transfer_q(seen_count: usize, unseen_count: usize) -> Result<TransferQ> {
    if seen_count == 0 || unseen_count == 0 {
        return Err(Error::arg(format!(
            "transfer regularizer needs at least one seen and one unseen label (got {seen_count}, {unseen_count})"
        )));
    }
    let l = seen_count + unseen_count;
    let cross = -1.0 / (2.0 * seen_count as f64 * unseen_count as f64);
    let within = if unseen_count >= 2 {
        1.0 / (unseen_count as f64 * (unseen_count as f64 - 1.0))
    } else {
        0.0
    };
    let q = Array2::from_shape_fn((l, l), |(i, j)| {
        let (si, sj) = (i < seen_count, j < seen_count);
        match (si, sj) {
            (true, true) => 0.0,
            (true, false) | (false, true) => cross,
            (false, false) if i == j => 0.0,
            (false, false) => within,
        }
    });
    Ok(TransferQ {
        q,
        seen_count,
        unseen_count,
    })
}

pub fn build_normalized_laplacian(r: ArrayView2<'_, f64>) -> Result<AuxLaplacian> {
    let l = r.nrows();
    if r.ncols() != l {
        return Err(Error::shape("similarity matrix", (l, l), r.dim()));
    }
    for ((i, j), &v) in r.indexed_iter() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::arg(format!("similarity entry ({i}, {j}) = {v} is not a finite nonnegative value")));
        }
        if (v - r[[j, i]]).abs() > 1e-12 * (1.0 + v.abs()) {
            return Err(Error::arg(format!("similarity matrix is not symmetric at ({i}, {j})")));
        }
    }
    let degree: Array1<f64> = r.rows().into_iter().map(|row| row.sum()).collect();
    if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::Similarity(format!("isolated label in similarity graph: label index {i}")));
    }
    let inv_sqrt = degree.mapv(|d| 1.0 / d.sqrt());
    let mut q_aux = Array2::from_shape_fn((l, l), |(i, j)| {
        let rij = 0.5 * (r[[i, j]] + r[[j, i]]);
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * rij * inv_sqrt[j]
    });
    for i in 0..l {
        for j in 0..i {
            let v = 0.5 * (q_aux[[i, j]] + q_aux[[j, i]]);
            q_aux[[i, j]] = v;
            q_aux[[j, i]] = v;
        }
    }
    Ok(AuxLaplacian { q_aux, degree })
}

/// `MᵀQM` for the L×m embedding matrix `M`.
pub fn pushed_through(q: ArrayView2<'_, f64>, m: ArrayView2<'_, f64>) -> Array2<f64> {
    m.t().dot(&q.dot(&m))
}

/// `(γ/2)·tr(UᵀMᵀQMU) + (λ/2)·tr(UᵀMᵀQᴬMU)`, the second term only when an
/// auxiliary Laplacian is supplied.
pub fn eval_penalty(
    u: ArrayView2<'_, f64>,
    m: ArrayView2<'_, f64>,
    q: &TransferQ,
    q_aux: Option<&AuxLaplacian>,
    gamma: f64,
    lambda: f64,
) -> Result<f64> {
    let l = q.q.nrows();
    if m.nrows() != l {
        return Err(Error::shape("embedding matrix rows", l, m.nrows()));
    }
    if u.nrows() != m.ncols() {
        return Err(Error::shape("U rows", m.ncols(), u.nrows()));
    }
    let mu = m.dot(&u);
    let mut value = 0.5 * gamma * trace_quadratic(mu.view(), q.q.view());
    if let Some(aux) = q_aux {
        if aux.q_aux.nrows() != l {
            return Err(Error::shape("auxiliary Laplacian", (l, l), aux.q_aux.dim()));
        }
        value += 0.5 * lambda * trace_quadratic(mu.view(), aux.q_aux.view());
    }
    Ok(value)
}
