//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! The full spectrum is computed and then truncated to the leading `r`
//! eigenpairs. Embedding dimensions here are a few hundred at most, so a
//! full decomposition is cheap and keeps results reproducible bit-for-bit.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, symmetrize};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    /// m×r, orthonormal columns.
    pub vectors: Array2<f64>,
    /// Sorted non-increasing.
    pub values: Array1<f64>,
}

/// All eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
///
/// Equal eigenvalues keep the order in which they appear on the diagonal
/// after the last sweep, and each eigenvector is flipped so that its
/// largest-magnitude entry (the first one, on ties) is positive.
pub fn symmetric_eigen(s: ArrayView2<'_, f64>) -> Result<EigenResult> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::shape("symmetric_eigen", (n, n), s.dim()));
    }
    let mut a = symmetrize(s);
    let mut v = Array2::<f64>::eye(n);
    let scale = frobenius(a.view());

    let mut converged = scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        if off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > OFF_DIAGONAL_TOL * scale {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps diagonal order among exact ties
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));

    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        let mut col = v.column(i).to_owned();
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (j, &x)| if x.abs() > best.1.abs() { (j, x) } else { best });
        if pivot.1 < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        vectors.column_mut(k).assign(&col);
    }
    Ok(EigenResult { vectors, values })
}

/// The `r` largest eigenvalues of `s` and their orthonormal eigenvectors.
pub fn top_r_eigenvectors(s: ArrayView2<'_, f64>, r: usize) -> Result<EigenResult> {
    let m = s.nrows();
    if r == 0 || r > m {
        return Err(Error::arg(format!("r = {r} must lie in 1..={m}")));
    }
    let full = symmetric_eigen(s)?;
    Ok(EigenResult {
        vectors: full.vectors.slice(ndarray::s![.., ..r]).to_owned(),
        values: full.values.slice(ndarray::s![..r]).to_owned(),
    })
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for ((i, j), &x) in a.indexed_iter() {
        if i != j {
            acc += x * x;
        }
    }
    acc.sqrt()
}

/// Applies the rotation that annihilates `a[p][q]`, accumulating it into `v`.
fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize) {
    let apq = a[[p, q]];
    if apq == 0.0 {
        return;
    }
    let app = a[[p, p]];
    let aqq = a[[q, q]];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let n = a.nrows();
    for k in 0..n {
        let akp = a[[k, p]];
        let akq = a[[k, q]];
        a[[k, p]] = c * akp - s * akq;
        a[[k, q]] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[[p, k]];
        let aqk = a[[q, k]];
        a[[p, k]] = c * apk - s * aqk;
        a[[q, k]] = s * apk + c * aqk;
    }
    a[[p, q]] = 0.0;
    a[[q, p]] = 0.0;
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}
