//! Per-node regression functions: ridge, weighted ridge, ELM and linear ε-SVR.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_spd, Matrix};

/// `f(x) = w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn zero(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            intercept: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.eval(x))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.weights, &self.weights)
    }
}

/// Single-hidden-layer network with a fixed random sigmoid layer and a
/// ridge-fitted linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    /// `M x D`.
    pub hidden_weights: Matrix,
    pub hidden_bias: Vec<f64>,
    pub output: LinearModel,
}

impl ElmModel {
    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    fn hidden_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (m, b) in self.hidden_bias.iter().enumerate() {
            out.push(sigmoid(dot(self.hidden_weights.row(m), x) + b));
        }
    }

    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.n_hidden());
        self.hidden_into(x, &mut h);
        h
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.output.eval(&self.hidden(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.hidden_weights.cols(), x.len())?;
        Ok(self.eval(x))
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    crate::losses::sigmoid(v)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
}

impl SvrParams {
    pub fn new(c: f64, epsilon: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Config(format!("SVR C must be positive, got {c}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!(
                "SVR epsilon must be non-negative, got {epsilon}"
            )));
        }
        Ok(Self { c, epsilon })
    }
}

/// A fitted node function. `PerClass` holds one linear model per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeModel {
    Zero,
    Linear(LinearModel),
    Elm(ElmModel),
    PerClass(Vec<LinearModel>),
}

impl NodeModel {
    /// Adds this model's output(s) to `out` (width 1, or J for `PerClass`).
    #[inline]
    pub fn add_output(&self, x: &[f64], out: &mut [f64]) {
        match self {
            NodeModel::Zero => {}
            NodeModel::Linear(m) => out[0] += m.eval(x),
            NodeModel::Elm(m) => out[0] += m.eval(x),
            NodeModel::PerClass(ms) => {
                for (o, m) in out.iter_mut().zip(ms) {
                    *o += m.eval(x);
                }
            }
        }
    }

    /// Squared norm of the penalised coefficients (output layer for ELM,
    /// summed over classes for `PerClass`).
    pub fn penalty_norm_sq(&self) -> f64 {
        match self {
            NodeModel::Zero => 0.0,
            NodeModel::Linear(m) => m.norm_sq(),
            NodeModel::Elm(m) => m.output.norm_sq(),
            NodeModel::PerClass(ms) => ms.iter().map(LinearModel::norm_sq).sum(),
        }
    }

    /// Input dimension, if the model has one.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            NodeModel::Zero => None,
            NodeModel::Linear(m) => Some(m.dim()),
            NodeModel::Elm(m) => Some(m.hidden_weights.cols()),
            NodeModel::PerClass(ms) => ms.first().map(LinearModel::dim),
        }
    }
}

fn check_finite(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    Ok(())
}

/// Weighted ridge on the rows `rows` of `x`. `y` and `w` are aligned with `rows`.
///
/// Minimises `Σ wₙ (yₙ − w·xₙ − b)² + λ‖w‖²` with an unpenalised intercept,
/// by centering on the weighted means and solving the normal equations.
pub(crate) fn ridge_indexed(x: &Matrix, rows: &[usize], y: &[f64], w: Option<&[f64]>, lambda: f64) -> LinearModel {
    let d = x.cols();
    let weight = |k: usize| w.map_or(1.0, |w| w[k]);
    let total: f64 = (0..rows.len()).map(weight).sum();
    let mut x_mean = vec![0.0; d];
    let mut y_mean = 0.0;
    for (k, &i) in rows.iter().enumerate() {
        let wk = weight(k);
        for (m, v) in x_mean.iter_mut().zip(x.row(i)) {
            *m += wk * v;
        }
        y_mean += wk * y[k];
    }
    for m in &mut x_mean {
        *m /= total;
    }
    y_mean /= total;

    let mut a = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut xc = vec![0.0; d];
    for (k, &i) in rows.iter().enumerate() {
        let wk = weight(k);
        if wk == 0.0 {
            continue;
        }
        for ((c, v), m) in xc.iter_mut().zip(x.row(i)).zip(&x_mean) {
            *c = v - m;
        }
        let yc = y[k] - y_mean;
        for p in 0..d {
            let wp = wk * xc[p];
            if wp == 0.0 {
                continue;
            }
            rhs[p] += wp * yc;
            let row = &mut a[p * d..p * d + p + 1];
            for (q, cell) in row.iter_mut().enumerate() {
                *cell += wp * xc[q];
            }
        }
    }
    for p in 0..d {
        a[p * d + p] += lambda;
        for q in 0..p {
            a[q * d + p] = a[p * d + q];
        }
    }
    let weights = solve_spd(&a, &rhs);
    let intercept = y_mean - dot(&weights, &x_mean);
    LinearModel { weights, intercept }
}

/// Ridge regression, `min Σ(yₙ − w·xₙ − b)² + λ‖w‖²`.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    check_dim(x.rows(), y.len())?;
    check_finite(x, y)?;
    if x.rows() == 0 {
        return Err(Error::InvalidData("ridge needs at least one sample".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(ridge_indexed(x, &rows, y, None, lambda))
}

/// Weighted ridge regression, `min Σ wₙ(yₙ − w·xₙ − b)² + λ‖w‖²`.
pub fn fit_weighted_ridge(x: &Matrix, y: &[f64], weights: &[f64], lambda: f64) -> Result<LinearModel> {
    check_dim(x.rows(), y.len())?;
    check_dim(x.rows(), weights.len())?;
    check_finite(x, y)?;
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidData("weights must be finite and non-negative".into()));
    }
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidData("all sample weights are zero".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(ridge_indexed(x, &rows, y, Some(weights), lambda))
}

/// Draws an `M x D` hidden layer with weights and biases uniform on `[-1, 1]`.
pub fn random_hidden_layer<R: Rng + ?Sized>(dim: usize, n_hidden: usize, rng: &mut R) -> (Matrix, Vec<f64>) {
    let weights: Vec<f64> = (0..n_hidden * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let bias: Vec<f64> = (0..n_hidden).map(|_| rng.random_range(-1.0..=1.0)).collect();
    (Matrix::new(n_hidden, dim, weights).expect("shape"), bias)
}

pub(crate) fn elm_indexed<R: Rng + ?Sized>(
    x: &Matrix,
    rows: &[usize],
    y: &[f64],
    lambda: f64,
    n_hidden: usize,
    rng: &mut R,
) -> ElmModel {
    let (hidden_weights, hidden_bias) = random_hidden_layer(x.cols(), n_hidden, rng);
    let mut model = ElmModel {
        hidden_weights,
        hidden_bias,
        output: LinearModel::zero(n_hidden),
    };
    let mut h = Matrix::zeros(rows.len(), n_hidden);
    let mut buf = Vec::with_capacity(n_hidden);
    for (k, &i) in rows.iter().enumerate() {
        model.hidden_into(x.row(i), &mut buf);
        h.row_mut(k).copy_from_slice(&buf);
    }
    let all: Vec<usize> = (0..rows.len()).collect();
    model.output = ridge_indexed(&h, &all, y, None, lambda);
    model
}

/// Extreme learning machine: random sigmoid hidden layer of `n_hidden`
/// nodes, output layer fitted by ridge regression with penalty `lambda`.
pub fn fit_elm<R: Rng + ?Sized>(x: &Matrix, y: &[f64], lambda: f64, n_hidden: usize, rng: &mut R) -> Result<ElmModel> {
    check_dim(x.rows(), y.len())?;
    check_finite(x, y)?;
    if n_hidden == 0 {
        return Err(Error::Config("ELM needs at least one hidden node".into()));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidData("ELM needs at least one sample".into()));
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(elm_indexed(x, &rows, y, lambda, n_hidden, rng))
}

/// Iteration budget of the SVR subgradient solver.
pub const SVR_ITERATIONS: usize = 2000;

/// Primal ε-SVR objective `½‖w‖² + C Σ max(0, |yₙ − w·xₙ − b| − ε)`.
pub fn svr_objective(x: &Matrix, y: &[f64], model: &LinearModel, params: SvrParams) -> f64 {
    let hinge: f64 = (0..x.rows())
        .map(|i| ((y[i] - model.eval(x.row(i))).abs() - params.epsilon).max(0.0))
        .sum();
    0.5 * model.norm_sq() + params.c * hinge
}

/// Result of the SVR solver: the model and the objective of the solver's
/// incumbent after every iteration.
#[derive(Debug, Clone)]
pub struct SvrFit {
    pub model: LinearModel,
    pub objective_trace: Vec<f64>,
}

pub(crate) fn svr_indexed(
    x: &Matrix,
    rows: &[usize],
    y: &[f64],
    params: SvrParams,
    iterations: usize,
    keep_trace: bool,
) -> SvrFit {
    let d = x.cols();
    let n = rows.len();
    let SvrParams { c, epsilon } = params;
    let y_mean = y.iter().sum::<f64>() / n as f64;

    // Step scale: distance-to-optimum estimate over subgradient bound. Features
    // are expected on a [0, 1] scale so |w| is of the order of the label spread.
    let spread = y.iter().map(|v| (v - y_mean).abs()).fold(0.0, f64::max);
    let radius = 2.0 * spread + 1e-3;
    let mean_sq_norm = rows.iter().map(|&i| dot(x.row(i), x.row(i))).sum::<f64>() / n as f64;
    let grad_bound = c * n as f64 * (1.0 + mean_sq_norm).sqrt() + radius;
    let step0 = radius / grad_bound;

    let mut w = vec![0.0; d];
    let mut b = y_mean;
    let mut best_w = w.clone();
    let mut best_b = b;
    let mut best_obj = f64::INFINITY;
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    let mut avg_count = 0usize;
    let mut grad_w = vec![0.0; d];
    let mut trace = Vec::with_capacity(if keep_trace { iterations } else { 0 });

    let objective = |w: &[f64], b: f64| -> f64 {
        let mut hinge = 0.0;
        for (k, &i) in rows.iter().enumerate() {
            let r = y[k] - dot(w, x.row(i)) - b;
            hinge += (r.abs() - epsilon).max(0.0);
        }
        0.5 * dot(w, w) + c * hinge
    };

    for t in 1..=iterations {
        grad_w.copy_from_slice(&w);
        let mut grad_b = 0.0;
        let mut hinge = 0.0;
        for (k, &i) in rows.iter().enumerate() {
            let xi = x.row(i);
            let r = y[k] - dot(&w, xi) - b;
            let excess = r.abs() - epsilon;
            if excess > 0.0 {
                hinge += excess;
                let s = c * r.signum();
                for (g, v) in grad_w.iter_mut().zip(xi) {
                    *g -= s * v;
                }
                grad_b -= s;
            }
        }
        let obj = 0.5 * dot(&w, &w) + c * hinge;
        if obj < best_obj {
            best_obj = obj;
            best_w.copy_from_slice(&w);
            best_b = b;
        }
        if keep_trace {
            trace.push(best_obj);
        }
        let step = step0 / (t as f64).sqrt();
        for (wi, g) in w.iter_mut().zip(&grad_w) {
            *wi -= step * g;
        }
        b -= step * grad_b;
        if 2 * t > iterations {
            for (a, wi) in avg_w.iter_mut().zip(&w) {
                *a += wi;
            }
            avg_b += b;
            avg_count += 1;
        }
    }
    if avg_count > 0 {
        for a in &mut avg_w {
            *a /= avg_count as f64;
        }
        avg_b /= avg_count as f64;
        let obj = objective(&avg_w, avg_b);
        if obj < best_obj {
            best_obj = obj;
            best_w = avg_w;
            best_b = avg_b;
        }
    }
    let final_obj = objective(&best_w, best_b);
    if keep_trace {
        trace.push(final_obj.min(best_obj));
    }
    SvrFit {
        model: LinearModel {
            weights: best_w,
            intercept: best_b,
        },
        objective_trace: trace,
    }
}

/// Linear ε-SVR by averaged subgradient descent with a fixed iteration budget.
///
/// Starts from `w = 0, b = mean(y)` and returns the best of the visited and
/// averaged iterates, so the returned objective never exceeds the starting one.
pub fn fit_linear_svr(x: &Matrix, y: &[f64], params: SvrParams) -> Result<LinearModel> {
    fit_linear_svr_traced(x, y, params).map(|f| f.model)
}

pub fn fit_linear_svr_traced(x: &Matrix, y: &[f64], params: SvrParams) -> Result<SvrFit> {
    check_dim(x.rows(), y.len())?;
    check_finite(x, y)?;
    if x.rows() == 0 {
        return Err(Error::InvalidData("SVR needs at least one sample".into()));
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(svr_indexed(x, &rows, y, params, SVR_ITERATIONS, true))
}
