//! The per-instance quadratic subproblem of the dual coordinate pass.
//!
//! For instance `i` the row `z = Ψᵢ` solves
//!
//! ```text
//! min ½ zᵀHz + fᵀz
//! s.t. z_c ≥ 0 (c positive),  Σ_pos z_c ≤ 1,
//!      z_c ≤ 0 (c negative),  Σ_neg −z_c ≤ 1.
//! ```
//!
//! The feasible set is a product of two capped simplices, so Euclidean
//! projection onto it is exact and cheap. [`solve_row_qp`] runs an
//! accelerated projected gradient method and, once the active set settles,
//! solves the reduced problem on that face directly.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::linalg::{solve, symmetrize};

pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RowQP {
    pub h: Array2<f64>,
    pub f: Array1<f64>,
    /// `true` where the instance has the label (`Yᵢ = 1`).
    pub positive_mask: Vec<bool>,
    pub instance_index: usize,
    /// Largest eigenvalue of `h`, the gradient's Lipschitz constant.
    pub curvature: f64,
}

impl RowQP {
    pub fn new(h: Array2<f64>, f: Array1<f64>, positive_mask: Vec<bool>, instance_index: usize) -> Result<Self> {
        let n = f.len();
        if h.dim() != (n, n) || positive_mask.len() != n {
            return Err(Error::arg(format!(
                "row QP shapes disagree: H {:?}, f {}, mask {}",
                h.dim(),
                n,
                positive_mask.len()
            )));
        }
        let h = symmetrize(h.view());
        let curvature = symmetric_eigen(h.view())?.values.get(0).copied().unwrap_or(0.0).max(0.0);
        Ok(Self {
            h,
            f,
            positive_mask,
            instance_index,
            curvature,
        })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn objective(&self, z: ArrayView1<'_, f64>) -> f64 {
        0.5 * z.dot(&self.h.dot(&z)) + self.f.dot(&z)
    }

    pub fn gradient(&self, z: ArrayView1<'_, f64>) -> Array1<f64> {
        self.h.dot(&z) + &self.f
    }

    /// `‖z − P(z − ∇q(z))‖_∞`; zero exactly at KKT points.
    pub fn kkt_residual(&self, z: ArrayView1<'_, f64>) -> f64 {
        let g = self.gradient(z);
        let step = &z - &g;
        let p = project_feasible(step.view(), &self.positive_mask);
        z.iter().zip(p.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, z: ArrayView1<'_, f64>) -> bool {
        is_feasible(z, &self.positive_mask)
    }
}

/// `K = MˢUUᵀMˢᵀ + 11ᵀ`, symmetrized against rounding.
pub fn label_kernel(u: ArrayView2<'_, f64>, m_seen: ArrayView2<'_, f64>) -> Array2<f64> {
    let a = m_seen.dot(&u);
    let k = a.dot(&a.t()) + 1.0;
    symmetrize(k.view())
}

/// Builds the QP for row `i` with that row of `Ψ` treated as zero.
pub fn assemble_row_qp(
    i: usize,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    psi: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    m_seen: ArrayView2<'_, f64>,
    beta: f64,
) -> Result<RowQP> {
    if !(beta > 0.0) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    let (n, ls) = y.dim();
    if x.nrows() != n || psi.dim() != (n, ls) || i >= n {
        return Err(Error::arg(format!(
            "row QP inputs disagree: X {:?}, Y {:?}, Psi {:?}, row {i}",
            x.dim(),
            y.dim(),
            psi.dim()
        )));
    }
    if m_seen.nrows() != ls || m_seen.ncols() != u.nrows() {
        return Err(Error::arg(format!("M^s {:?} does not fit U {:?}", m_seen.dim(), u.dim())));
    }
    let kernel = label_kernel(u, m_seen);
    let xi = x.row(i);
    // Ψᵀ X Xᵢᵀ without row i
    let gram = x.dot(&xi);
    let mut cross = Array1::<f64>::zeros(ls);
    for (j, (g, row)) in gram.iter().zip(psi.outer_iter()).enumerate() {
        if j != i {
            cross.scaled_add(*g, &row);
        }
    }
    let kcurv = symmetric_eigen(kernel.view())?.values[0].max(0.0);
    Ok(row_qp_from_kernel(i, &kernel, kcurv, xi.dot(&xi), cross.view(), y.row(i), beta))
}

/// Row QP from a precomputed kernel and its top eigenvalue; `cross` is
/// `Σ_{j≠i} (XⱼXᵢᵀ) Ψⱼ`.
pub(crate) fn row_qp_from_kernel(
    i: usize,
    kernel: &Array2<f64>,
    kernel_curvature: f64,
    sq_norm: f64,
    cross: ArrayView1<'_, f64>,
    y_row: ArrayView1<'_, f64>,
    beta: f64,
) -> RowQP {
    let scale = sq_norm / beta;
    let h = kernel * scale;
    let mut f = kernel.dot(&cross) / beta;
    for (fc, &yc) in f.iter_mut().zip(y_row.iter()) {
        *fc += 1.0 - 2.0 * yc;
    }
    RowQP {
        h,
        f,
        positive_mask: y_row.iter().map(|&v| v == 1.0).collect(),
        instance_index: i,
        curvature: scale * kernel_curvature,
    }
}

pub fn is_feasible(z: ArrayView1<'_, f64>, positive: &[bool]) -> bool {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (&v, &p) in z.iter().zip(positive) {
        if p {
            if v < 0.0 {
                return false;
            }
            pos += v;
        } else {
            if v > 0.0 {
                return false;
            }
            neg -= v;
        }
    }
    pos <= 1.0 && neg <= 1.0
}

/// Euclidean projection onto the feasible set.
pub fn project_feasible(v: ArrayView1<'_, f64>, positive: &[bool]) -> Array1<f64> {
    let pos_idx: Vec<usize> = (0..v.len()).filter(|&c| positive[c]).collect();
    let neg_idx: Vec<usize> = (0..v.len()).filter(|&c| !positive[c]).collect();
    let mut out = Array1::zeros(v.len());
    let pos: Vec<f64> = pos_idx.iter().map(|&c| v[c]).collect();
    for (&c, p) in pos_idx.iter().zip(project_capped_simplex(&pos)) {
        out[c] = p;
    }
    let neg: Vec<f64> = neg_idx.iter().map(|&c| -v[c]).collect();
    for (&c, p) in neg_idx.iter().zip(project_capped_simplex(&neg)) {
        out[c] = -p;
    }
    out
}

/// Projection onto `{w ≥ 0, Σw ≤ 1}`. The output satisfies both
/// constraints exactly in floating point.
pub fn project_capped_simplex(v: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= 1.0 {
        return clamped;
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k as f64 + 1.0);
        if s - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    enforce_cap(&mut w);
    w
}

/// Trims rounding excess so that `Σw ≤ 1` holds exactly for a
/// nonnegative `w`.
fn enforce_cap(w: &mut [f64]) {
    let mut slack = 1.0;
    for _ in 0..64 {
        let total: f64 = w.iter().sum();
        if total <= 1.0 {
            return;
        }
        let big = (0..w.len()).fold(0, |b, j| if w[j] > w[b] { j } else { b });
        w[big] = (w[big] - (total - 1.0) * slack).max(0.0);
        slack *= 2.0;
    }
}

/// Snaps a nearly feasible point onto the feasible set with exact
/// constraint satisfaction.
fn make_feasible(z: &mut Array1<f64>, positive: &[bool]) {
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&v, &p) in z.iter().zip(positive) {
        if p {
            pos.push(v.max(0.0));
        } else {
            neg.push((-v).max(0.0));
        }
    }
    enforce_cap(&mut pos);
    enforce_cap(&mut neg);
    let (mut a, mut b) = (pos.into_iter(), neg.into_iter());
    for (v, &p) in z.iter_mut().zip(positive) {
        *v = if p { a.next().unwrap_or(0.0) } else { -b.next().unwrap_or(0.0) };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Array1<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn solve_row_qp(qp: &RowQP, tolerance: f64) -> Result<Array1<f64>> {
    solve_row_qp_with(qp, tolerance, DEFAULT_MAX_ITERATIONS).map(|s| s.z)
}

pub fn solve_row_qp_with(qp: &RowQP, tolerance: f64, max_iterations: usize) -> Result<QpSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::arg(format!("QP tolerance must be positive, got {tolerance}")));
    }
    let n = qp.len();
    let mask = &qp.positive_mask;
    if !mask.iter().any(|&p| p) || mask.iter().all(|&p| p) {
        return Err(Error::arg(format!(
            "instance {} needs at least one positive and one negative label",
            qp.instance_index
        )));
    }

    if qp.curvature <= 0.0 {
        let z = linear_vertex(qp);
        let residual = qp.kkt_residual(z.view());
        return Ok(QpSolution { z, residual, iterations: 0 });
    }

    let step = 1.0 / qp.curvature;
    let mut z = Array1::<f64>::zeros(n);
    let mut y = z.clone();
    let mut t = 1.0f64;
    let mut best = QpSolution {
        residual: qp.kkt_residual(z.view()),
        z: z.clone(),
        iterations: 0,
    };
    if best.residual <= tolerance {
        return Ok(best);
    }
    let mut fz = qp.objective(z.view());
    let mut last_signature = signature(&z, mask);
    let mut stable = 0usize;

    for it in 1..=max_iterations {
        let g = qp.gradient(y.view());
        let z_next = project_feasible((&y - &(g * step)).view(), mask);
        let f_next = qp.objective(z_next.view());
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if f_next > fz {
            if t == 1.0 {
                // a plain gradient step no longer descends: z is stationary
                // up to rounding, so finish on its face
                break;
            }
            // restart momentum from the last iterate
            y = z.clone();
            t = 1.0;
            continue;
        }
        y = &z_next + &((&z_next - &z) * ((t - 1.0) / t_next));
        t = t_next;
        z = z_next;
        fz = f_next;

        let residual = qp.kkt_residual(z.view());
        if residual < best.residual {
            best = QpSolution {
                z: z.clone(),
                residual,
                iterations: it,
            };
        }
        if residual <= tolerance {
            return Ok(QpSolution { z, residual, iterations: it });
        }

        let sig = signature(&z, mask);
        if sig == last_signature {
            stable += 1;
        } else {
            stable = 0;
            last_signature = sig;
        }
        if stable == 2 || it % 100 == 0 {
            if let Some(cand) = refine(qp, &z) {
                let r = qp.kkt_residual(cand.view());
                if r <= tolerance && qp.objective(cand.view()) <= fz + 1e-12 * (1.0 + fz.abs()) {
                    return Ok(QpSolution {
                        z: cand,
                        residual: r,
                        iterations: it,
                    });
                }
            }
        }
    }
    if let Some(cand) = refine(qp, &best.z) {
        let r = qp.kkt_residual(cand.view());
        if r <= tolerance {
            return Ok(QpSolution {
                z: cand,
                residual: r,
                iterations: best.iterations,
            });
        }
    }
    Err(Error::QpNotConverged {
        instance: qp.instance_index,
        iterations: max_iterations,
        residual: best.residual,
        best: best.z,
    })
}

/// Active-set fingerprint: which coordinates sit on their sign bound and
/// which sum caps are tight.
fn signature(z: &Array1<f64>, mask: &[bool]) -> (Vec<bool>, bool, bool) {
    let zeros = z.iter().map(|&v| v == 0.0).collect();
    let (pos, neg) = group_sums(z, mask);
    (zeros, pos >= 1.0 - 1e-12, neg >= 1.0 - 1e-12)
}

fn group_sums(z: &Array1<f64>, mask: &[bool]) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (&v, &p) in z.iter().zip(mask) {
        if p {
            pos += v;
        } else {
            neg -= v;
        }
    }
    (pos, neg)
}

/// Minimizer of a linear objective over the feasible set, used when `H`
/// vanishes.
fn linear_vertex(qp: &RowQP) -> Array1<f64> {
    let mut z = Array1::zeros(qp.len());
    let mut best_pos: Option<usize> = None;
    let mut best_neg: Option<usize> = None;
    for (c, &fc) in qp.f.iter().enumerate() {
        if qp.positive_mask[c] {
            if fc < 0.0 && best_pos.map_or(true, |b| fc < qp.f[b]) {
                best_pos = Some(c);
            }
        } else if fc > 0.0 && best_neg.map_or(true, |b| fc > qp.f[b]) {
            best_neg = Some(c);
        }
    }
    if let Some(c) = best_pos {
        z[c] = 1.0;
    }
    if let Some(c) = best_neg {
        z[c] = -1.0;
    }
    z
}

#[derive(Clone, Copy)]
enum Bound {
    Coord(usize),
    Cap(usize),
}

/// Primal active-set refinement from a feasible `z`. Works in sign-flipped
/// coordinates `w = s∘z`, where both label groups become the capped
/// simplex `{w ≥ 0, Σw ≤ 1}`. Singular faces are handled by stepping
/// along zero-curvature descent directions until a constraint blocks.
fn refine(qp: &RowQP, z: &Array1<f64>) -> Option<Array1<f64>> {
    let n = z.len();
    let mask = &qp.positive_mask;
    let sign: Array1<f64> = mask.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let group = |c: usize| usize::from(!mask[c]);
    let hw = {
        let mut h = qp.h.clone();
        for i in 0..n {
            for j in 0..n {
                h[[i, j]] *= sign[i] * sign[j];
            }
        }
        h
    };
    let fw = &qp.f * &sign;
    let mut w = z * &sign;
    let mut at_zero: Vec<bool> = w.iter().map(|&v| v <= 0.0).collect();
    let mut capped = [false; 2];
    for c in 0..n {
        if at_zero[c] {
            w[c] = 0.0;
        }
    }
    for g in 0..2 {
        let total: f64 = (0..n).filter(|&c| group(c) == g).map(|c| w[c]).sum();
        capped[g] = total >= 1.0 - 1e-12;
    }
    let hscale = qp.h.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    // set after a full unblocked Newton step: the face minimum is reached
    let mut settled = false;

    for _ in 0..(8 * n + 32) {
        let grad = hw.dot(&w) + &fw;
        let gscale = 1.0 + grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut basis: Vec<Array1<f64>> = Vec::new();
        for g in 0..2 {
            let free: Vec<usize> = (0..n).filter(|&c| group(c) == g && !at_zero[c]).collect();
            if capped[g] {
                for j in 1..free.len() {
                    let mut v = Array1::zeros(n);
                    let norm = ((j * (j + 1)) as f64).sqrt();
                    for &c in &free[..j] {
                        v[c] = 1.0 / norm;
                    }
                    v[free[j]] = -(j as f64) / norm;
                    basis.push(v);
                }
            } else {
                for &c in &free {
                    let mut v = Array1::zeros(n);
                    v[c] = 1.0;
                    basis.push(v);
                }
            }
        }

        // step direction on the current face
        let mut direction: Option<(Array1<f64>, bool)> = None;
        if !settled && !basis.is_empty() {
            let k = basis.len();
            let mut b = Array2::<f64>::zeros((n, k));
            for (j, v) in basis.iter().enumerate() {
                b.column_mut(j).assign(v);
            }
            let rh = b.t().dot(&hw.dot(&b));
            let rg = b.t().dot(&grad);
            let eig = symmetric_eigen(rh.view()).ok()?;
            let cutoff = 1e-11 * hscale * k as f64;
            let mut newton = Array1::<f64>::zeros(k);
            let mut flat = Array1::<f64>::zeros(k);
            for (j, &lam) in eig.values.iter().enumerate() {
                let v = eig.vectors.column(j);
                let coef = v.dot(&rg);
                if lam > cutoff {
                    newton.scaled_add(-coef / lam, &v);
                } else {
                    flat.scaled_add(-coef, &v);
                }
            }
            if flat.iter().any(|v| v.abs() > 1e-13 * gscale) {
                direction = Some((b.dot(&flat), true));
            } else {
                let p = b.dot(&newton);
                if p.iter().any(|v| v.abs() > 1e-15) {
                    direction = Some((p, false));
                }
            }
        }

        match direction {
            Some((p, unbounded)) => {
                let mut alpha = if unbounded { f64::INFINITY } else { 1.0 };
                let mut blocker: Option<Bound> = None;
                for c in 0..n {
                    if !at_zero[c] && p[c] < 0.0 {
                        let ratio = w[c] / -p[c];
                        if ratio < alpha {
                            alpha = ratio;
                            blocker = Some(Bound::Coord(c));
                        }
                    }
                }
                for g in 0..2 {
                    if capped[g] {
                        continue;
                    }
                    let (mut total, mut rate) = (0.0, 0.0);
                    for c in (0..n).filter(|&c| group(c) == g) {
                        total += w[c];
                        rate += p[c];
                    }
                    if rate > 0.0 {
                        let ratio = ((1.0 - total) / rate).max(0.0);
                        if ratio < alpha {
                            alpha = ratio;
                            blocker = Some(Bound::Cap(g));
                        }
                    }
                }
                if !alpha.is_finite() {
                    return None;
                }
                w.scaled_add(alpha, &p);
                settled = blocker.is_none();
                match blocker {
                    Some(Bound::Coord(c)) => {
                        at_zero[c] = true;
                        w[c] = 0.0;
                    }
                    Some(Bound::Cap(g)) => capped[g] = true,
                    None => {}
                }
                for c in 0..n {
                    if w[c] < 0.0 {
                        w[c] = 0.0;
                        at_zero[c] = true;
                    }
                }
            }
            None => {
                // stationary on the face: check multiplier signs
                let mut worst: Option<(f64, Bound)> = None;
                let mut nu = [0.0; 2];
                for g in 0..2 {
                    if !capped[g] {
                        continue;
                    }
                    let free: Vec<usize> = (0..n).filter(|&c| group(c) == g && !at_zero[c]).collect();
                    if free.is_empty() {
                        capped[g] = false;
                        continue;
                    }
                    nu[g] = -free.iter().map(|&c| grad[c]).sum::<f64>() / free.len() as f64;
                    if nu[g] < worst.map_or(0.0, |(v, _)| v) {
                        worst = Some((nu[g], Bound::Cap(g)));
                    }
                }
                for c in 0..n {
                    if at_zero[c] {
                        let mu = grad[c] + nu[group(c)];
                        if mu < worst.map_or(0.0, |(v, _)| v) {
                            worst = Some((mu, Bound::Coord(c)));
                        }
                    }
                }
                match worst {
                    Some((v, which)) if v < -1e-14 * gscale => {
                        settled = false;
                        match which {
                            Bound::Coord(c) => at_zero[c] = false,
                            Bound::Cap(g) => capped[g] = false,
                        }
                    }
                    _ => {
                        let mut out = w * &sign;
                        make_feasible(&mut out, mask);
                        return Some(out);
                    }
                }
            }
        }
    }
    None
}

/// Exact minimizer by enumerating every active set of the sign and cap
/// constraints. Exponential in the label count; a verification oracle
/// for small instances only.
pub fn oracle_solve_row_qp(qp: &RowQP) -> Result<Array1<f64>> {
    const RIDGE: f64 = 1e-10;
    const FEAS_TOL: f64 = 1e-9;
    let n = qp.len();
    if n > 6 {
        return Err(Error::arg(format!("oracle refuses {n} labels (limit 6)")));
    }
    let mask = &qp.positive_mask;
    let mut best: Option<(f64, Array1<f64>)> = None;
    for fixed in 0u32..(1 << n) {
        for caps in 0u32..4 {
            let pos_cap = caps & 1 != 0;
            let neg_cap = caps & 2 != 0;
            let mut rows: Vec<(Array1<f64>, f64)> = Vec::new();
            for c in 0..n {
                if fixed & (1 << c) != 0 {
                    let mut a = Array1::zeros(n);
                    a[c] = 1.0;
                    rows.push((a, 0.0));
                }
            }
            if pos_cap {
                rows.push((Array1::from_iter(mask.iter().map(|&p| if p { 1.0 } else { 0.0 })), 1.0));
            }
            if neg_cap {
                rows.push((Array1::from_iter(mask.iter().map(|&p| if p { 0.0 } else { -1.0 })), 1.0));
            }
            let k = rows.len();
            let mut kkt = Array2::<f64>::zeros((n + k, n + k));
            let mut rhs = Array1::<f64>::zeros(n + k);
            kkt.slice_mut(s![..n, ..n]).assign(&qp.h);
            for c in 0..n {
                kkt[[c, c]] += RIDGE;
                rhs[c] = -qp.f[c];
            }
            for (r, (a, b)) in rows.iter().enumerate() {
                kkt.slice_mut(s![n + r, ..n]).assign(a);
                kkt.slice_mut(s![..n, n + r]).assign(a);
                rhs[n + r] = *b;
            }
            let Some(sol) = solve(kkt.view(), rhs.view(), 1e-13) else {
                continue;
            };
            let z = sol.slice(s![..n]).to_owned();
            if !nearly_feasible(&z, mask, FEAS_TOL) {
                continue;
            }
            let obj = qp.objective(z.view());
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, z));
            }
        }
    }
    best.map(|(_, z)| z)
        .ok_or_else(|| Error::Numerical("oracle found no feasible active set".into()))
}

fn nearly_feasible(z: &Array1<f64>, mask: &[bool], tol: f64) -> bool {
    let (pos, neg) = group_sums(z, mask);
    z.iter()
        .zip(mask)
        .all(|(&v, &p)| if p { v >= -tol } else { v <= tol })
        && pos <= 1.0 + tol
        && neg <= 1.0 + tol
}
