//! Losses, their derivatives, LogitBoost working responses and leaf impurity.
//!
//! Model outputs are stored row-major with `task.n_outputs()` columns: one
//! value per sample for regression and binary tasks, `J` logits per sample
//! for multiclass.

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::node_models::LinearModel;

/// Smallest curvature / working weight: `2ε` with `ε` the machine epsilon.
pub const MIN_WEIGHT: f64 = 2.0 * f64::EPSILON;

/// Bound on the magnitude of clipped pseudo-responses.
pub const Y_MAX: f64 = 4.0;

/// Fraction of lowest working weights dropped before a node fit.
pub const WEIGHT_QUANTILE: f64 = 0.05;

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// `log(1 + e^v)` without overflow.
#[inline]
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Per-sample loss: squared error, binary cross-entropy on a logit, or
/// multiclass cross-entropy on `J` logits. `label` is the target value or
/// class index.
pub fn sample_loss(task: Task, label: f64, output: &[f64]) -> f64 {
    match task {
        Task::Regression => {
            let r = label - output[0];
            r * r
        }
        // -y log σ(F) - (1-y) log(1-σ(F)) = softplus(F) - y F
        Task::Binary => softplus(output[0]) - label * output[0],
        Task::Multiclass(_) => {
            let max = output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + output.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - output[label as usize]
        }
    }
}

/// First and second derivatives of the loss with respect to the model
/// outputs, laid out like the outputs (`n x k`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub n_outputs: usize,
}

impl GradHess {
    pub fn n_samples(&self) -> usize {
        self.g.len() / self.n_outputs
    }
}

fn check_lengths(task: Task, labels: &[f64], outputs: &[f64]) -> Result<()> {
    if let Task::Multiclass(j) = task {
        if j < 3 {
            return Err(Error::InvalidData(format!("multiclass needs J > 2, got {j}")));
        }
    }
    let k = task.n_outputs();
    if outputs.len() != labels.len() * k {
        return Err(Error::DimensionMismatch {
            expected: labels.len() * k,
            found: outputs.len(),
        });
    }
    Ok(())
}

/// Derivatives of one sample's loss, written into `g` and `h` (width k).
#[inline]
pub(crate) fn sample_grad_hess(task: Task, label: f64, output: &[f64], g: &mut [f64], h: &mut [f64]) {
    match task {
        Task::Regression => {
            g[0] = 2.0 * (output[0] - label);
            h[0] = 2.0;
        }
        Task::Binary => {
            let p = sigmoid(output[0]);
            g[0] = p - label;
            h[0] = (p * (1.0 - p)).max(MIN_WEIGHT);
        }
        Task::Multiclass(_) => {
            g.copy_from_slice(output);
            softmax_in_place(g);
            let class = label as usize;
            for (j, (gj, hj)) in g.iter_mut().zip(h.iter_mut()).enumerate() {
                let p = *gj;
                *hj = (p * (1.0 - p)).max(MIN_WEIGHT);
                if j == class {
                    *gj = p - 1.0;
                }
            }
        }
    }
}

/// Gradients and (floored) hessians for every sample.
pub fn grad_hess(task: Task, labels: &[f64], outputs: &[f64]) -> Result<GradHess> {
    check_lengths(task, labels, outputs)?;
    let k = task.n_outputs();
    let mut g = vec![0.0; outputs.len()];
    let mut h = vec![0.0; outputs.len()];
    for (i, &y) in labels.iter().enumerate() {
        let r = i * k..(i + 1) * k;
        sample_grad_hess(task, y, &outputs[r.clone()], &mut g[r.clone()], &mut h[r]);
    }
    Ok(GradHess { g, h, n_outputs: k })
}

/// Largest deviation between the analytic derivatives and centered finite
/// differences: `g` against differences of the loss, `h` against differences
/// of the analytic gradient.
pub fn finite_diff_check(task: Task, labels: &[f64], outputs: &[f64], delta: f64) -> Result<f64> {
    let gh = grad_hess(task, labels, outputs)?;
    let k = task.n_outputs();
    let mut worst: f64 = 0.0;
    let mut g_plus = vec![0.0; k];
    let mut g_minus = vec![0.0; k];
    let mut scratch = vec![0.0; k];
    for (i, &y) in labels.iter().enumerate() {
        let base = &outputs[i * k..(i + 1) * k];
        let mut shifted = base.to_vec();
        for j in 0..k {
            shifted[j] = base[j] + delta;
            let lp = sample_loss(task, y, &shifted);
            sample_grad_hess(task, y, &shifted, &mut g_plus, &mut scratch);
            shifted[j] = base[j] - delta;
            let lm = sample_loss(task, y, &shifted);
            sample_grad_hess(task, y, &shifted, &mut g_minus, &mut scratch);
            shifted[j] = base[j];

            let g_fd = (lp - lm) / (2.0 * delta);
            let h_fd = (g_plus[j] - g_minus[j]) / (2.0 * delta);
            worst = worst
                .max((gh.g[i * k + j] - g_fd).abs())
                .max((gh.h[i * k + j] - h_fd.max(MIN_WEIGHT)).abs());
        }
    }
    Ok(worst)
}

/// Samples kept for a node fit, with their clipped pseudo-responses and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingSet {
    /// Positions into the input sample list.
    pub indices: Vec<usize>,
    pub z: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WorkingSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Linear-interpolation percentile of `values` (the usual numpy default).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[inline]
fn clip(z: f64) -> f64 {
    z.clamp(-Y_MAX, Y_MAX)
}

/// Builds a working set from per-sample targets (`y ∈ {0,1}`) and probabilities.
/// With `filter`, samples whose weight does not exceed the 5th percentile of
/// all weights are dropped; if that drops everything, the unfiltered set is kept.
fn working_set_from(targets: &[f64], probs: &[f64], filter: bool) -> WorkingSet {
    let n = targets.len();
    let mut z = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for (&y, &p) in targets.iter().zip(probs) {
        let weight = (p * (1.0 - p)).max(MIN_WEIGHT);
        z.push(clip((y - p) / weight));
        w.push(weight);
    }
    let keep: Vec<usize> = if filter && n > 0 {
        let q = percentile(&w, WEIGHT_QUANTILE);
        let kept: Vec<usize> = (0..n).filter(|&i| w[i] > q).collect();
        if kept.is_empty() {
            (0..n).collect()
        } else {
            kept
        }
    } else {
        (0..n).collect()
    };
    WorkingSet {
        z: keep.iter().map(|&i| z[i]).collect(),
        weights: keep.iter().map(|&i| w[i]).collect(),
        indices: keep,
    }
}

/// LogitBoost working set for a binary node: `p = σ(F)`,
/// `z = clip((y − p) / (p(1 − p)))`, `w = max(p(1 − p), 2ε)`.
pub fn working_set_binary(labels: &[f64], outputs: &[f64], filter: bool) -> WorkingSet {
    let probs: Vec<f64> = outputs.iter().map(|&f| sigmoid(f)).collect();
    working_set_from(labels, &probs, filter)
}

/// Per-class working sets for a multiclass node, using softmax probabilities.
/// `outputs` is `n x J`; filtering is applied independently per class.
pub fn working_set_multiclass(labels: &[f64], outputs: &[f64], n_classes: usize, filter: bool) -> Vec<WorkingSet> {
    let n = labels.len();
    let mut probs = outputs.to_vec();
    for i in 0..n {
        softmax_in_place(&mut probs[i * n_classes..(i + 1) * n_classes]);
    }
    (0..n_classes)
        .map(|j| {
            let targets: Vec<f64> = labels
                .iter()
                .map(|&y| if y as usize == j { 1.0 } else { 0.0 })
                .collect();
            let p: Vec<f64> = (0..n).map(|i| probs[i * n_classes + j]).collect();
            working_set_from(&targets, &p, filter)
        })
        .collect()
}

/// `f_j ← (J−1)/J · (f_j − (1/J) Σᵢ fᵢ)`, applied to coefficients and intercepts.
pub fn center_multiclass(models: &[LinearModel]) -> Result<Vec<LinearModel>> {
    let j = models.len();
    if j < 3 {
        return Err(Error::InvalidData(format!("centering needs J >= 3 models, got {j}")));
    }
    let d = models[0].dim();
    if let Some(m) = models.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.dim(),
        });
    }
    let jf = j as f64;
    let scale = (jf - 1.0) / jf;
    let mut mean = LinearModel::zero(d);
    for m in models {
        for (a, b) in mean.weights.iter_mut().zip(&m.weights) {
            *a += b / jf;
        }
        mean.intercept += m.intercept / jf;
    }
    Ok(models
        .iter()
        .map(|m| LinearModel {
            weights: m
                .weights
                .iter()
                .zip(&mean.weights)
                .map(|(a, b)| scale * (a - b))
                .collect(),
            intercept: scale * (m.intercept - mean.intercept),
        })
        .collect())
}

/// Leaf impurity: RMSE times the sample count for regression, mean
/// cross-entropy times the sample count for classification.
/// `labels` and `outputs` cover only the leaf's samples.
pub fn leaf_impurity(task: Task, labels: &[f64], outputs: &[f64]) -> f64 {
    let n = labels.len();
    if n == 0 {
        return 0.0;
    }
    let k = task.n_outputs();
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| sample_loss(task, y, &outputs[i * k..(i + 1) * k]))
        .sum();
    match task {
        Task::Regression => (total / n as f64).sqrt() * n as f64,
        _ => total,
    }
}
