//! Alternating min-max training.
//!
//! For fixed `U` the inner problem over the dual matrix `Ψ` (n×Lˢ) is a
//! concave quadratic maximization whose constraints separate by row; one
//! coordinate pass solves each row's QP exactly, in ascending instance
//! order, against the current values of all other rows. For fixed `Ψ` the
//! outer minimization over orthonormal `U` is a trace maximization solved
//! by the top-`r` eigenvectors of
//!
//! ```text
//! S = (1/2β) MˢᵀΨᵀXXᵀΨMˢ − (γ/2) MᵀQM − (λ/2) MᵀQᴬM.
//! ```
//!
//! Both `U` and `Ψ` start at zero. The primal projection is recovered as
//! `W = XᵀΨMˢU / β` and `W0 = −XᵀΨ1 / β`.

use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::eigen::{symmetric_eigen, top_r_eigenvectors};
use crate::error::{Error, Result};
use crate::linalg::{orthonormality_error, symmetrize};
use crate::model::{validate, Dataset, LabelSpace, ModelParams};
use crate::qp::{label_kernel, row_qp_from_kernel, solve_row_qp_with};
use crate::regularizers::{
    build_normalized_laplacian, build_transfer_q, eval_penalty, pushed_through, AuxLaplacian, TransferQ,
};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub r: usize,
    pub max_outer_iterations: usize,
    /// Coordinate passes over `Ψ` between consecutive `U` updates.
    pub passes_per_outer: usize,
    /// Stop once `|Δdual| / (1 + |dual|)` drops below this.
    pub dual_tolerance: f64,
    pub qp_tolerance: f64,
    pub qp_max_iterations: usize,
    /// Reserved for randomized variants; training itself is deterministic.
    pub seed: u64,
    /// Return the iterate with the best monitor score rather than the last.
    pub keep_best_iterate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 0.0,
            lambda: 0.0,
            r: 1,
            max_outer_iterations: 50,
            passes_per_outer: 1,
            dual_tolerance: 1e-6,
            qp_tolerance: 1e-10,
            qp_max_iterations: crate::qp::DEFAULT_MAX_ITERATIONS,
            seed: 0,
            keep_best_iterate: false,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::Config("max_outer_iterations must be at least 1".into()));
        }
        if self.passes_per_outer == 0 {
            return Err(Error::Config("passes_per_outer must be at least 1".into()));
        }
        if !(self.qp_tolerance > 0.0) {
            return Err(Error::Config("qp_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Everything the solver reads but never mutates.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// All label embeddings, seen rows first.
    pub m: Array2<f64>,
    pub seen_count: usize,
    pub q: TransferQ,
    pub q_aux: Option<AuxLaplacian>,
    /// `MᵀQM`
    pub mqm: Array2<f64>,
    /// `MᵀQᴬM`
    pub maqm: Option<Array2<f64>>,
}

impl TrainingData {
    pub fn new(dataset: &Dataset, labels: &LabelSpace, similarity: Option<&SimilarityMatrix>) -> Result<Self> {
        validate(dataset, labels).into_result()?;
        let q = build_transfer_q(labels.seen_count, labels.unseen_count())?;
        let q_aux = match similarity {
            Some(sim) => {
                if sim.values.nrows() != labels.len() {
                    return Err(Error::shape("similarity matrix", (labels.len(), labels.len()), sim.values.dim()));
                }
                Some(build_normalized_laplacian(sim.values.view())?)
            }
            None => None,
        };
        let m = labels.embeddings.clone();
        let mqm = symmetrize(pushed_through(q.q.view(), m.view()).view());
        let maqm = q_aux
            .as_ref()
            .map(|a| symmetrize(pushed_through(a.q_aux.view(), m.view()).view()));
        Ok(Self {
            x: dataset.features.clone(),
            y: dataset.labels.clone(),
            m,
            seen_count: labels.seen_count,
            q,
            q_aux,
            mqm,
            maqm,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m_seen(&self) -> ArrayView2<'_, f64> {
        self.m.slice(s![..self.seen_count, ..])
    }

    pub fn embedding_dim(&self) -> usize {
        self.m.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub psi: Array2<f64>,
    pub u: Array2<f64>,
    pub outer_iteration: usize,
    pub dual_history: Vec<f64>,
}

impl DualState {
    /// The all-zero starting point.
    pub fn zeros(n: usize, seen_count: usize, m: usize, r: usize) -> Self {
        Self {
            psi: Array2::zeros((n, seen_count)),
            u: Array2::zeros((m, r)),
            outer_iteration: 0,
            dual_history: Vec::new(),
        }
    }

    /// Checks the sign and sum-cap constraints of every row exactly.
    pub fn is_feasible(&self, y: ArrayView2<'_, f64>) -> bool {
        self.psi.outer_iter().zip(y.outer_iter()).all(|(row, yr)| {
            let mask: Vec<bool> = yr.iter().map(|&v| v == 1.0).collect();
            crate::qp::is_feasible(row, &mask)
        })
    }
}

fn check_state(state: &DualState, data: &TrainingData) -> Result<()> {
    if state.psi.dim() != data.y.dim() {
        return Err(Error::shape("Psi", data.y.dim(), state.psi.dim()));
    }
    if state.u.nrows() != data.embedding_dim() {
        return Err(Error::shape("U rows", data.embedding_dim(), state.u.nrows()));
    }
    Ok(())
}

/// The min-max objective at `(Ψ, U)`:
///
/// ```text
/// tr(Ψᵀ(2Y − 11ᵀ)) + (γ/2)tr(UᵀMᵀQMU) + (λ/2)tr(UᵀMᵀQᴬMU)
///   − (1/2β) tr(ΨᵀXXᵀΨ(MˢUUᵀMˢᵀ + 11ᵀ))
/// ```
pub fn dual_objective(state: &DualState, data: &TrainingData, config: &TrainConfig) -> Result<f64> {
    check_state(state, data)?;
    let linear: f64 = state
        .psi
        .iter()
        .zip(data.y.iter())
        .map(|(p, y)| p * (2.0 * y - 1.0))
        .sum();
    let penalty = eval_penalty(
        state.u.view(),
        data.m.view(),
        &data.q,
        data.q_aux.as_ref(),
        config.gamma,
        config.lambda,
    )?;
    let p = data.x.t().dot(&state.psi);
    let pa = p.dot(&data.m_seen()).dot(&state.u);
    let p1 = p.sum_axis(Axis(1));
    let quad = pa.iter().map(|v| v * v).sum::<f64>() + p1.dot(&p1);
    Ok(linear + penalty - quad / (2.0 * config.beta))
}

/// Slack-form primal objective: summed calibrated separation hinges plus
/// `(β/2)(‖W‖² + ‖W0‖²)` and the label-structure penalty.
pub fn primal_objective(model: &ModelParams, data: &TrainingData) -> Result<f64> {
    model.check()?;
    if model.d() != data.x.ncols() || model.m() != data.embedding_dim() {
        return Err(Error::arg(format!(
            "model (d={}, m={}) does not match data (d={}, m={})",
            model.d(),
            model.m(),
            data.x.ncols(),
            data.embedding_dim()
        )));
    }
    let scores = data.x.dot(&model.w).dot(&data.m_seen().dot(&model.u).t());
    let thresholds = data.x.dot(&model.w0);
    let mut loss = 0.0;
    for ((f, &f0), y) in scores.outer_iter().zip(thresholds.iter()).zip(data.y.outer_iter()) {
        let mut xi = 0.0f64;
        let mut eta = 0.0f64;
        for (&fc, &yc) in f.iter().zip(y.iter()) {
            if yc == 1.0 {
                xi = xi.max(1.0 + f0 - fc);
            } else {
                eta = eta.max(1.0 + fc - f0);
            }
        }
        loss += xi + eta;
    }
    let reg = 0.5 * model.beta * (model.w.iter().map(|v| v * v).sum::<f64>() + model.w0.dot(&model.w0));
    let penalty = eval_penalty(
        model.u.view(),
        data.m.view(),
        &data.q,
        data.q_aux.as_ref(),
        model.gamma,
        model.lambda,
    )?;
    Ok(loss + reg + penalty)
}

/// One Gauss–Seidel sweep over the rows of `Ψ` with `U` held fixed.
pub fn coordinate_pass(state: DualState, data: &TrainingData, config: &TrainConfig) -> Result<DualState> {
    coordinate_pass_observed(state, data, config, |_, _| {})
}

/// [`coordinate_pass`] calling `observe(i, Ψ)` after row `i` is written.
pub fn coordinate_pass_observed(
    mut state: DualState,
    data: &TrainingData,
    config: &TrainConfig,
    mut observe: impl FnMut(usize, &Array2<f64>),
) -> Result<DualState> {
    check_state(&state, data)?;
    let kernel = label_kernel(state.u.view(), data.m_seen());
    let kernel_curvature = symmetric_eigen(kernel.view())?.values[0].max(0.0);
    // V = XᵀΨ, kept in sync with Ψ as rows change
    let mut v = data.x.t().dot(&state.psi);
    for i in 0..data.n() {
        let xi = data.x.row(i);
        let sq_norm = xi.dot(&xi);
        let old = state.psi.row(i).to_owned();
        let cross = v.t().dot(&xi) - &(&old * sq_norm);
        let qp = row_qp_from_kernel(i, &kernel, kernel_curvature, sq_norm, cross.view(), data.y.row(i), config.beta);
        let sol = solve_row_qp_with(&qp, config.qp_tolerance, config.qp_max_iterations)?;
        let delta = &sol.z - &old;
        for (k, &xk) in xi.iter().enumerate() {
            if xk != 0.0 {
                v.row_mut(k).scaled_add(xk, &delta);
            }
        }
        state.psi.row_mut(i).assign(&sol.z);
        observe(i, &state.psi);
    }
    Ok(state)
}

/// `S = (1/2β) MˢᵀΨᵀXXᵀΨMˢ − (γ/2) MᵀQM − (λ/2) MᵀQᴬM`, symmetrized.
#[allow(clippy::too_many_arguments)]
pub fn build_s(
    psi: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    m: ArrayView2<'_, f64>,
    m_seen: ArrayView2<'_, f64>,
    q: &TransferQ,
    q_aux: Option<&AuxLaplacian>,
    beta: f64,
    gamma: f64,
    lambda: f64,
) -> Result<Array2<f64>> {
    if !(beta > 0.0) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    if psi.nrows() != x.nrows() || psi.ncols() != m_seen.nrows() || m.ncols() != m_seen.ncols() {
        return Err(Error::arg(format!(
            "Psi {:?}, X {:?}, M^s {:?} and M {:?} disagree",
            psi.dim(),
            x.dim(),
            m_seen.dim(),
            m.dim()
        )));
    }
    let mqm = pushed_through(q.q.view(), m);
    let maqm = q_aux.map(|a| pushed_through(a.q_aux.view(), m));
    Ok(s_from_parts(psi, x, m_seen, &mqm, maqm.as_ref(), beta, gamma, lambda))
}

#[allow(clippy::too_many_arguments)]
fn s_from_parts(
    psi: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    m_seen: ArrayView2<'_, f64>,
    mqm: &Array2<f64>,
    maqm: Option<&Array2<f64>>,
    beta: f64,
    gamma: f64,
    lambda: f64,
) -> Array2<f64> {
    let pm = x.t().dot(&psi).dot(&m_seen);
    let mut s = pm.t().dot(&pm) / (2.0 * beta);
    s.scaled_add(-0.5 * gamma, mqm);
    if let Some(a) = maqm {
        s.scaled_add(-0.5 * lambda, a);
    }
    symmetrize(s.view())
}

/// Replaces `U` by the top-`r` eigenvectors of `S` for the current `Ψ`.
pub fn update_u(mut state: DualState, data: &TrainingData, config: &TrainConfig) -> Result<DualState> {
    check_state(&state, data)?;
    if config.r > data.embedding_dim() {
        return Err(Error::Config(format!(
            "r = {} exceeds embedding dimension {}",
            config.r,
            data.embedding_dim()
        )));
    }
    let s = s_from_parts(
        state.psi.view(),
        data.x.view(),
        data.m_seen(),
        &data.mqm,
        data.maqm.as_ref(),
        config.beta,
        config.gamma,
        config.lambda,
    );
    state.u = top_r_eigenvectors(s.view(), config.r)?.vectors;
    Ok(state)
}

/// `W = XᵀΨMˢU / β`, `W0 = −XᵀΨ1 / β`.
pub fn recover_primal(
    psi: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    m_seen: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    beta: f64,
) -> Result<(Array2<f64>, Array1<f64>)> {
    if !(beta > 0.0) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    if psi.nrows() != x.nrows() || psi.ncols() != m_seen.nrows() || m_seen.ncols() != u.nrows() {
        return Err(Error::arg(format!(
            "Psi {:?}, X {:?}, M^s {:?} and U {:?} disagree",
            psi.dim(),
            x.dim(),
            m_seen.dim(),
            u.dim()
        )));
    }
    let p = x.t().dot(&psi);
    let w = p.dot(&m_seen).dot(&u) / beta;
    let w0 = p.sum_axis(Axis(1)) / -beta;
    Ok((w, w0))
}

pub fn model_from_state(state: &DualState, data: &TrainingData, config: &TrainConfig) -> Result<ModelParams> {
    let (w, w0) = recover_primal(state.psi.view(), data.x.view(), data.m_seen(), state.u.view(), config.beta)?;
    Ok(ModelParams {
        w,
        w0,
        u: state.u.clone(),
        beta: config.beta,
        gamma: config.gamma,
        lambda: config.lambda,
        r: config.r,
    })
}

/// One line of the per-iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub dual_objective: f64,
    pub primal_objective: f64,
    pub psi_norm: f64,
    pub orthonormality_error: f64,
    /// Wall-clock seconds since training started. Log output only.
    pub elapsed_secs: f64,
    pub monitor: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ModelParams,
    pub state: DualState,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
}

pub fn train(
    dataset: &Dataset,
    labels: &LabelSpace,
    similarity: Option<&SimilarityMatrix>,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    train_monitored(dataset, labels, similarity, config, None)
}

/// Trains from the zero initialization. When a `monitor` is given it is
/// evaluated on every iterate's model (higher is better) and recorded in
/// the trace; with `keep_best_iterate` the best-scoring iterate is
/// returned.
pub fn train_monitored(
    dataset: &Dataset,
    labels: &LabelSpace,
    similarity: Option<&SimilarityMatrix>,
    config: &TrainConfig,
    mut monitor: Option<&mut dyn FnMut(&ModelParams) -> f64>,
) -> Result<TrainOutput> {
    config.check()?;
    if config.lambda > 0.0 && similarity.is_none() {
        return Err(Error::Config("lambda > 0 requires an auxiliary similarity matrix".into()));
    }
    if config.r > labels.dim() {
        return Err(Error::Config(format!("r = {} exceeds embedding dimension {}", config.r, labels.dim())));
    }
    let data = TrainingData::new(dataset, labels, similarity)?;
    let start = Instant::now();
    let mut state = DualState::zeros(data.n(), data.seen_count, data.embedding_dim(), config.r);
    let mut previous = dual_objective(&state, &data, config)?;
    let mut trace = Vec::new();
    let mut best: Option<(f64, ModelParams, DualState)> = None;
    let mut converged = false;

    for iteration in 1..=config.max_outer_iterations {
        for _ in 0..config.passes_per_outer {
            state = coordinate_pass(state, &data, config)?;
        }
        state = update_u(state, &data, config)?;
        state.outer_iteration = iteration;
        let dual = dual_objective(&state, &data, config)?;
        state.dual_history.push(dual);
        let model = model_from_state(&state, &data, config)?;
        let primal = primal_objective(&model, &data)?;
        let score = monitor.as_mut().map(|f| f(&model));
        let record = TraceRecord {
            iteration,
            dual_objective: dual,
            primal_objective: primal,
            psi_norm: state.psi.iter().map(|v| v * v).sum::<f64>().sqrt(),
            orthonormality_error: orthonormality_error(state.u.view()),
            elapsed_secs: start.elapsed().as_secs_f64(),
            monitor: score,
        };
        log::debug!(
            "iter {iteration}: dual {dual:.10e} primal {primal:.10e} |psi| {:.6e}",
            record.psi_norm
        );
        trace.push(record);
        if config.keep_best_iterate {
            if let Some(sc) = score {
                if best.as_ref().map_or(true, |(b, _, _)| sc > *b) {
                    best = Some((sc, model.clone(), state.clone()));
                }
            }
        }
        let change = (dual - previous).abs() / (1.0 + dual.abs());
        previous = dual;
        if change < config.dual_tolerance {
            converged = true;
            break;
        }
    }

    let (model, state) = match best {
        Some((_, model, state)) => (model, state),
        None => {
            let model = model_from_state(&state, &data, config)?;
            (model, state)
        }
    };
    Ok(TrainOutput {
        model,
        state,
        trace,
        converged,
    })
}
