//! Small dense helpers shared by the solvers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(A + Aᵀ) / 2`
pub fn symmetrize(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]]))
}

/// Frobenius norm of `AᵀA − I`.
pub fn orthonormality_error(a: ArrayView2<'_, f64>) -> f64 {
    let mut gram = a.t().dot(&a);
    for i in 0..gram.nrows() {
        gram[[i, i]] -= 1.0;
    }
    frobenius(gram.view())
}

/// `trace(AᵀBA)`
pub fn trace_quadratic(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let ba = b.dot(&a);
    a.iter().zip(ba.iter()).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `pivot_tol`.
pub fn solve(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>, pivot_tol: f64) -> Option<Array1<f64>> {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .fold((col, -1.0), |acc, (r, v)| if v > acc.1 { (r, v) } else { acc });
        if best <= pivot_tol {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap([piv, k], [col, k]);
            }
            x.swap(piv, col);
        }
        let p = m[[col, col]];
        for r in col + 1..n {
            let factor = m[[r, col]] / p;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[[r, k]] -= factor * m[[col, k]];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[[col, k]] * x[k];
        }
        x[col] = acc / m[[col, col]];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solve_small_system() {
        let a = array![[0.0, 2.0], [3.0, 1.0]];
        let x = solve(a.view(), array![4.0, 5.0].view(), 1e-14).unwrap();
        assert_abs_diff_eq!(x, array![1.0, 2.0], epsilon = 1e-14);
        assert!(solve(array![[1.0, 2.0], [2.0, 4.0]].view(), array![1.0, 1.0].view(), 1e-12).is_none());
    }

    #[test]
    fn trace_quadratic_matches_direct() {
        let a = array![[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]];
        let b = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 1.0]];
        let direct = a.t().dot(&b).dot(&a);
        assert_abs_diff_eq!(trace_quadratic(a.view(), b.view()), direct[[0, 0]] + direct[[1, 1]], epsilon = 1e-12);
    }
}
