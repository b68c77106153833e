//! BoostTree induction and prediction.
//!
//! The tree starts as a single root carrying the zero model. At every step
//! the open leaf with the highest impurity is considered for a split. Split
//! points are ranked by the bias-only second-order gain computed from the
//! gradients and hessians of the loss at the leaf's current path ensemble.
//! The two child models are then fitted (ridge, ELM or SVR on residuals for
//! regression; weighted ridge on LogitBoost working responses for
//! classification) and the split is kept only if the gain stays positive
//! after subtracting the children's coefficient penalties.
//!
//! Minimum leaf sizes and regularisation strengths are drawn at random from
//! a [`ParameterPool`] rather than tuned.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::losses::{self, GradHess};
use crate::node_models::{self, LinearModel, NodeModel, SvrParams};

/// Constant in the parent term of the split gain, keeping its denominator
/// away from zero.
pub const PARENT_HESS_EPS: f64 = 0.0001;

/// Number of evenly spaced thresholds tried on a feature with more distinct values.
pub const MAX_THRESHOLDS: usize = 100;

/// Candidate hyperparameter values sampled per node (and per tree for `max_num_leaf`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPool {
    pub min_samples_leaf: Vec<usize>,
    pub lambda: Vec<f64>,
    pub elm_hidden: Vec<usize>,
    pub svr_c: Vec<f64>,
    pub svr_epsilon: Vec<f64>,
    pub max_num_leaf: Vec<usize>,
}

impl Default for ParameterPool {
    fn default() -> Self {
        Self {
            min_samples_leaf: (5..=15).collect(),
            lambda: vec![0.0001, 0.001, 0.01, 0.1],
            elm_hidden: vec![10, 20, 30, 40],
            svr_c: vec![0.1, 1.0, 2.0, 5.0, 10.0],
            svr_epsilon: vec![0.1, 0.2, 0.4, 0.8],
            max_num_leaf: vec![5, 10, 15, 20],
        }
    }
}

impl ParameterPool {
    /// Default pool for a node kind; ELM uses a narrower λ set.
    pub fn for_kind(kind: NodeKind) -> Self {
        let mut pool = Self::default();
        if kind == NodeKind::Elm {
            pool.lambda = vec![0.001, 0.01, 0.1];
        }
        pool
    }

    pub fn validate(&self, kind: NodeKind) -> Result<()> {
        fn nonempty<T>(v: &[T], name: &str) -> Result<()> {
            if v.is_empty() {
                return Err(Error::Config(format!("parameter pool {name} is empty")));
            }
            Ok(())
        }
        nonempty(&self.min_samples_leaf, "min_samples_leaf")?;
        if self.min_samples_leaf.contains(&0) {
            return Err(Error::Config("min_samples_leaf values must be positive".into()));
        }
        match kind {
            NodeKind::Ridge | NodeKind::Elm => {
                nonempty(&self.lambda, "lambda")?;
                if self.lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
                    return Err(Error::Config("lambda values must be positive".into()));
                }
                if kind == NodeKind::Elm {
                    nonempty(&self.elm_hidden, "elm_hidden")?;
                    if self.elm_hidden.contains(&0) {
                        return Err(Error::Config("elm_hidden values must be positive".into()));
                    }
                }
            }
            NodeKind::Svr => {
                nonempty(&self.svr_c, "svr_c")?;
                nonempty(&self.svr_epsilon, "svr_epsilon")?;
                for &c in &self.svr_c {
                    SvrParams::new(c, 0.0)?;
                }
                for &e in &self.svr_epsilon {
                    SvrParams::new(1.0, e)?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn pick<T: Copy, R: Rng + ?Sized>(pool: &[T], rng: &mut R) -> T {
    pool[rng.random_range(0..pool.len())]
}

/// Node function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Ridge,
    Elm,
    Svr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub node_kind: NodeKind,
    pub max_num_leaf: Option<usize>,
    /// Draw λ_L, λ_R for every threshold scanned (`true`) or once per node.
    pub resample_per_threshold: bool,
    /// Drop working-set samples at or below the 5th weight percentile.
    pub filter_low_weights: bool,
}

impl TreeConfig {
    pub fn new(node_kind: NodeKind) -> Self {
        Self {
            node_kind,
            max_num_leaf: None,
            resample_per_threshold: true,
            filter_low_weights: true,
        }
    }
}

/// Regularisation of one child: a ridge/ELM λ, or an SVR `C` whose
/// penalty coefficient is `1 / (2C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularizer {
    Lambda(f64),
    SvrC(f64),
}

impl Regularizer {
    pub fn coefficient(self) -> f64 {
        match self {
            Regularizer::Lambda(l) => l,
            Regularizer::SvrC(c) => 1.0 / (2.0 * c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left: Regularizer,
    pub right: Regularizer,
    pub n_left: usize,
    pub n_right: usize,
}

/// Bias-only second-order split gain:
/// `½[G_L²/(H_L+λ_L) + G_R²/(H_R+λ_R) − (G_L+G_R)²/(H_L+H_R+0.0001)]`.
#[inline]
pub fn split_gain_bias(
    g_left: f64,
    h_left: f64,
    g_right: f64,
    h_right: f64,
    lambda_left: f64,
    lambda_right: f64,
) -> f64 {
    let g = g_left + g_right;
    let h = h_left + h_right;
    0.5 * (g_left * g_left / (h_left + lambda_left) + g_right * g_right / (h_right + lambda_right)
        - g * g / (h + PARENT_HESS_EPS))
}

/// Gain of a split once the child models are fitted: the bias-only gain minus
/// each child's coefficient penalty (`λ‖w‖²`, or `‖w‖²/(2C)` for SVR).
pub fn split_gain_full(
    bias_gain: f64,
    left: &NodeModel,
    right: &NodeModel,
    left_reg: Regularizer,
    right_reg: Regularizer,
) -> f64 {
    bias_gain - left_reg.coefficient() * left.penalty_norm_sq() - right_reg.coefficient() * right.penalty_norm_sq()
}

/// Candidate thresholds for ascending-sorted `values`: the distinct values
/// when there are at most 100 of them, otherwise 100 evenly spaced values
/// from the minimum to the maximum inclusive.
pub fn enumerate_thresholds(sorted: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in sorted {
        if distinct.last() != Some(&v) {
            distinct.push(v);
            if distinct.len() > MAX_THRESHOLDS {
                break;
            }
        }
    }
    if distinct.len() <= MAX_THRESHOLDS {
        return distinct;
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let step = (hi - lo) / (MAX_THRESHOLDS - 1) as f64;
    let mut out: Vec<f64> = (0..MAX_THRESHOLDS).map(|i| lo + step * i as f64).collect();
    out[MAX_THRESHOLDS - 1] = hi;
    out
}

fn draw_regularizer<R: Rng + ?Sized>(kind: NodeKind, pool: &ParameterPool, rng: &mut R) -> Regularizer {
    match kind {
        NodeKind::Ridge | NodeKind::Elm => Regularizer::Lambda(pick(&pool.lambda, rng)),
        NodeKind::Svr => Regularizer::SvrC(pick(&pool.svr_c, rng)),
    }
}

/// Scans `ceil(√D)` random features for the split with the largest positive
/// bias-only gain. `rows` are row indices into `x`; `gh` is aligned with
/// `rows`. For multiclass the gain is summed over classes.
pub fn find_best_split<R: Rng + ?Sized>(
    x: &Matrix,
    rows: &[usize],
    gh: &GradHess,
    pool: &ParameterPool,
    kind: NodeKind,
    resample_per_threshold: bool,
    rng: &mut R,
) -> Option<SplitCandidate> {
    let n = rows.len();
    let k = gh.n_outputs;
    let min_left = pick(&pool.min_samples_leaf, rng);
    let min_right = pick(&pool.min_samples_leaf, rng);
    let node_regs = if resample_per_threshold {
        None
    } else {
        Some((draw_regularizer(kind, pool, rng), draw_regularizer(kind, pool, rng)))
    };
    let d = x.cols();
    let n_feat = ((d as f64).sqrt().ceil() as usize).clamp(1, d);
    let mut features = index::sample(rng, d, n_feat).into_vec();
    features.sort_unstable();

    if n < min_left + min_right {
        return None;
    }

    let mut g_total = vec![0.0; k];
    let mut h_total = vec![0.0; k];
    for p in 0..n {
        for c in 0..k {
            g_total[c] += gh.g[p * k + c];
            h_total[c] += gh.h[p * k + c];
        }
    }

    let mut best: Option<SplitCandidate> = None;
    let mut best_gain = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut sorted = vec![0.0; n];
    let mut g_left = vec![0.0; k];
    let mut h_left = vec![0.0; k];
    for &f in &features {
        order.sort_by(|&a, &b| x.get(rows[a], f).total_cmp(&x.get(rows[b], f)).then(a.cmp(&b)));
        for (s, &p) in sorted.iter_mut().zip(&order) {
            *s = x.get(rows[p], f);
        }
        let thresholds = enumerate_thresholds(&sorted);
        g_left.iter_mut().for_each(|v| *v = 0.0);
        h_left.iter_mut().for_each(|v| *v = 0.0);
        let mut ptr = 0;
        for &s in &thresholds {
            while ptr < n && sorted[ptr] <= s {
                let p = order[ptr];
                for c in 0..k {
                    g_left[c] += gh.g[p * k + c];
                    h_left[c] += gh.h[p * k + c];
                }
                ptr += 1;
            }
            let n_left = ptr;
            let n_right = n - ptr;
            if n_left < min_left || n_right < min_right {
                continue;
            }
            let (left_reg, right_reg) = match node_regs {
                Some(r) => r,
                None => (draw_regularizer(kind, pool, rng), draw_regularizer(kind, pool, rng)),
            };
            let (ll, lr) = (left_reg.coefficient(), right_reg.coefficient());
            let gain: f64 = (0..k)
                .map(|c| {
                    split_gain_bias(
                        g_left[c],
                        h_left[c],
                        g_total[c] - g_left[c],
                        h_total[c] - h_left[c],
                        ll,
                        lr,
                    )
                })
                .sum();
            if gain > best_gain {
                best_gain = gain;
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: s,
                    gain,
                    left: left_reg,
                    right: right_reg,
                    n_left,
                    n_right,
                });
            }
        }
    }
    best
}

/// Hyperparameters of a single node fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeParams {
    pub regularizer: Regularizer,
    /// Hidden nodes (ELM only).
    pub n_hidden: usize,
    /// Tube half-width (SVR only).
    pub epsilon: f64,
}

impl NodeParams {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            regularizer: Regularizer::Lambda(lambda),
            n_hidden: 0,
            epsilon: 0.0,
        }
    }
}

/// Fits a node model on `rows` of `x` given the labels of those rows and the
/// outputs (`rows.len() x task.n_outputs()`) of the path ensemble above the node.
#[allow(clippy::too_many_arguments)]
pub fn fit_node_model<R: Rng + ?Sized>(
    task: Task,
    kind: NodeKind,
    x: &Matrix,
    rows: &[usize],
    labels: &[f64],
    parent_outputs: &[f64],
    params: NodeParams,
    filter_low_weights: bool,
    rng: &mut R,
) -> Result<NodeModel> {
    if rows.is_empty() {
        return Err(Error::InvalidData("node has no samples".into()));
    }
    let k = task.n_outputs();
    if labels.len() != rows.len() || parent_outputs.len() != rows.len() * k {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            found: labels.len(),
        });
    }
    let lambda = params.regularizer.coefficient();
    match task {
        Task::Regression => {
            let residuals: Vec<f64> = labels.iter().zip(parent_outputs).map(|(y, f)| y - f).collect();
            Ok(match (kind, params.regularizer) {
                (NodeKind::Ridge, _) => {
                    NodeModel::Linear(node_models::ridge_indexed(x, rows, &residuals, None, lambda))
                }
                (NodeKind::Elm, _) => NodeModel::Elm(node_models::elm_indexed(
                    x,
                    rows,
                    &residuals,
                    lambda,
                    params.n_hidden.max(1),
                    rng,
                )),
                (NodeKind::Svr, Regularizer::SvrC(c)) => {
                    let svr = SvrParams::new(c, params.epsilon)?;
                    NodeModel::Linear(
                        node_models::svr_indexed(x, rows, &residuals, svr, node_models::SVR_ITERATIONS, false).model,
                    )
                }
                (NodeKind::Svr, Regularizer::Lambda(_)) => {
                    return Err(Error::Config("SVR nodes need a C regularizer".into()))
                }
            })
        }
        Task::Binary => {
            require_ridge(kind)?;
            let ws = losses::working_set_binary(labels, parent_outputs, filter_low_weights);
            Ok(NodeModel::Linear(fit_working_set(x, rows, &ws, lambda)))
        }
        Task::Multiclass(j) => {
            require_ridge(kind)?;
            let sets = losses::working_set_multiclass(labels, parent_outputs, j, filter_low_weights);
            let models: Vec<LinearModel> = sets.iter().map(|ws| fit_working_set(x, rows, ws, lambda)).collect();
            Ok(NodeModel::PerClass(losses::center_multiclass(&models)?))
        }
    }
}

fn require_ridge(kind: NodeKind) -> Result<()> {
    if kind != NodeKind::Ridge {
        return Err(Error::Config(format!("{kind:?} node models support regression only")));
    }
    Ok(())
}

fn fit_working_set(x: &Matrix, rows: &[usize], ws: &losses::WorkingSet, lambda: f64) -> LinearModel {
    let kept: Vec<usize> = ws.indices.iter().map(|&p| rows[p]).collect();
    node_models::ridge_indexed(x, &kept, &ws.z, Some(&ws.weights), lambda)
}

// ---------------------------------------------------------------------------
// Tree
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub model: NodeModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Internal-node record. Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub children: Box<[TreeNode; 2]>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn count_leaves(&self) -> usize {
        let mut stack = vec![self];
        let mut leaves = 0;
        while let Some(node) = stack.pop() {
            match &node.split {
                None => leaves += 1,
                Some(s) => stack.extend(s.children.iter()),
            }
        }
        leaves
    }

    pub fn depth(&self) -> usize {
        match &self.split {
            None => 0,
            Some(s) => 1 + s.children[0].depth().max(s.children[1].depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTree {
    pub root: TreeNode,
    pub task: Task,
    pub node_kind: NodeKind,
    pub n_features: usize,
    pub num_leaf: usize,
    pub max_num_leaf: Option<usize>,
}

impl BoostTree {
    pub fn n_outputs(&self) -> usize {
        self.task.n_outputs()
    }

    /// Sums the node outputs along the path of `x` into `out` (zeroed first).
    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut node = &self.root;
        loop {
            node.model.add_output(x, out);
            match &node.split {
                None => break,
                Some(s) => {
                    node = if x[s.feature] <= s.threshold {
                        &s.children[0]
                    } else {
                        &s.children[1]
                    };
                }
            }
        }
    }

    /// Raw output: a value (regression), a logit (binary) or `J` logits.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.n_outputs()];
        self.predict_into(x, &mut out);
        Ok(out)
    }
}

/// Diagnostics recorded while growing a tree.
#[derive(Debug, Clone, Default)]
pub struct GrowthTrace {
    /// Path-ensemble output per training sample (`n x k`) at the end of growth.
    pub training_outputs: Vec<f64>,
    /// Gain of every accepted split, in acceptance order.
    pub accepted_gains: Vec<f64>,
    /// Total training loss before any split and after each accepted split.
    pub loss_history: Vec<f64>,
    /// Total coefficient penalty `Σ λ_m ‖w_m‖²` after each entry of `loss_history`.
    pub penalty_history: Vec<f64>,
}

struct GrowNode {
    model: NodeModel,
    split: Option<(usize, f64, usize, usize)>,
    positions: Vec<usize>,
    impurity: f64,
    open: bool,
}

/// Grows a BoostTree on every row of `ds`.
pub fn grow<R: Rng + ?Sized>(
    ds: &Dataset,
    pool: &ParameterPool,
    config: &TreeConfig,
    rng: &mut R,
) -> Result<BoostTree> {
    let rows: Vec<usize> = (0..ds.n_samples()).collect();
    grow_on_rows(ds.features(), ds.labels(), ds.task(), &rows, pool, config, rng).map(|(t, _)| t)
}

/// Grows a BoostTree on `rows` of `x` (repeats allowed, as in a bootstrap
/// replica) and returns it together with its growth trace.
#[allow(clippy::too_many_arguments)]
pub fn grow_on_rows<R: Rng + ?Sized>(
    x: &Matrix,
    labels: &[f64],
    task: Task,
    rows: &[usize],
    pool: &ParameterPool,
    config: &TreeConfig,
    rng: &mut R,
) -> Result<(BoostTree, GrowthTrace)> {
    if rows.is_empty() {
        return Err(Error::InvalidData("cannot grow a tree on zero samples".into()));
    }
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: labels.len(),
        });
    }
    pool.validate(config.node_kind)?;
    if task.is_classification() {
        require_ridge(config.node_kind)?;
    }
    if config.max_num_leaf == Some(0) {
        return Err(Error::Config("max_num_leaf must be at least 1".into()));
    }
    let k = task.n_outputs();
    let n = rows.len();
    let y: Vec<f64> = rows.iter().map(|&r| labels[r]).collect();
    let mut outputs = vec![0.0; n * k];

    let total_loss = |outputs: &[f64]| -> f64 {
        (0..n)
            .map(|p| losses::sample_loss(task, y[p], &outputs[p * k..(p + 1) * k]))
            .sum()
    };
    let mut trace = GrowthTrace {
        loss_history: vec![total_loss(&outputs)],
        penalty_history: vec![0.0],
        ..Default::default()
    };
    let mut penalty = 0.0;

    let all: Vec<usize> = (0..n).collect();
    let mut nodes = vec![GrowNode {
        model: NodeModel::Zero,
        split: None,
        impurity: losses::leaf_impurity(task, &y, &outputs),
        positions: all,
        open: true,
    }];
    let mut num_leaf = 1;

    loop {
        if config.max_num_leaf.is_some_and(|m| num_leaf >= m) {
            break;
        }
        // Highest impurity among open leaves; earliest created wins ties.
        let mut chosen: Option<usize> = None;
        for (id, node) in nodes.iter().enumerate() {
            if node.open && chosen.is_none_or(|c| node.impurity > nodes[c].impurity) {
                chosen = Some(id);
            }
        }
        let Some(id) = chosen else { break };
        nodes[id].open = false;

        let positions = std::mem::take(&mut nodes[id].positions);
        let leaf_rows: Vec<usize> = positions.iter().map(|&p| rows[p]).collect();
        let leaf_y: Vec<f64> = positions.iter().map(|&p| y[p]).collect();
        let mut leaf_out = Vec::with_capacity(positions.len() * k);
        for &p in &positions {
            leaf_out.extend_from_slice(&outputs[p * k..(p + 1) * k]);
        }
        let gh = losses::grad_hess(task, &leaf_y, &leaf_out)?;

        let Some(cand) = find_best_split(
            x,
            &leaf_rows,
            &gh,
            pool,
            config.node_kind,
            config.resample_per_threshold,
            rng,
        ) else {
            nodes[id].positions = positions;
            continue;
        };

        let mut left_idx = Vec::with_capacity(cand.n_left);
        let mut right_idx = Vec::with_capacity(cand.n_right);
        for (local, &r) in leaf_rows.iter().enumerate() {
            if x.get(r, cand.feature) <= cand.threshold {
                left_idx.push(local);
            } else {
                right_idx.push(local);
            }
        }
        let child_params = |reg: Regularizer, rng: &mut R| -> NodeParams {
            let mut p = NodeParams {
                regularizer: reg,
                n_hidden: 0,
                epsilon: 0.0,
            };
            match config.node_kind {
                NodeKind::Ridge => {}
                NodeKind::Elm => p.n_hidden = pick(&pool.elm_hidden, rng),
                NodeKind::Svr => p.epsilon = pick(&pool.svr_epsilon, rng),
            }
            p
        };
        let left_params = child_params(cand.left, rng);
        let right_params = child_params(cand.right, rng);

        let fit_child = |local: &[usize], params: NodeParams, rng: &mut R| -> Result<NodeModel> {
            let r: Vec<usize> = local.iter().map(|&l| leaf_rows[l]).collect();
            let yy: Vec<f64> = local.iter().map(|&l| leaf_y[l]).collect();
            let mut ff = Vec::with_capacity(local.len() * k);
            for &l in local {
                ff.extend_from_slice(&leaf_out[l * k..(l + 1) * k]);
            }
            fit_node_model(
                task,
                config.node_kind,
                x,
                &r,
                &yy,
                &ff,
                params,
                config.filter_low_weights,
                rng,
            )
        };
        let left_model = fit_child(&left_idx, left_params, rng)?;
        let right_model = fit_child(&right_idx, right_params, rng)?;
        let gain = split_gain_full(cand.gain, &left_model, &right_model, cand.left, cand.right);
        if !(gain > 0.0) {
            nodes[id].positions = positions;
            continue;
        }

        penalty += cand.left.coefficient() * left_model.penalty_norm_sq()
            + cand.right.coefficient() * right_model.penalty_norm_sq();
        let mut make_child = |local: Vec<usize>, model: NodeModel| -> GrowNode {
            let child_positions: Vec<usize> = local.iter().map(|&l| positions[l]).collect();
            let mut child_y = Vec::with_capacity(child_positions.len());
            let mut child_out = Vec::with_capacity(child_positions.len() * k);
            for &p in &child_positions {
                let out = &mut outputs[p * k..(p + 1) * k];
                model.add_output(x.row(rows[p]), out);
                child_y.push(y[p]);
                child_out.extend_from_slice(out);
            }
            GrowNode {
                impurity: losses::leaf_impurity(task, &child_y, &child_out),
                model,
                split: None,
                positions: child_positions,
                open: true,
            }
        };
        let left = make_child(left_idx, left_model);
        let right = make_child(right_idx, right_model);
        let left_id = nodes.len();
        nodes.push(left);
        nodes.push(right);
        nodes[id].split = Some((cand.feature, cand.threshold, left_id, left_id + 1));
        num_leaf += 1;

        trace.accepted_gains.push(gain);
        trace.loss_history.push(total_loss(&outputs));
        trace.penalty_history.push(penalty);
    }

    trace.training_outputs = outputs;
    let root = assemble(&mut nodes, 0);
    let tree = BoostTree {
        root,
        task,
        node_kind: config.node_kind,
        n_features: x.cols(),
        num_leaf,
        max_num_leaf: config.max_num_leaf,
    };
    debug_assert_eq!(tree.root.count_leaves(), num_leaf);
    Ok((tree, trace))
}

/// Converts the growth arena into nested nodes, dropping cached samples.
fn assemble(nodes: &mut [GrowNode], id: usize) -> TreeNode {
    let model = std::mem::replace(&mut nodes[id].model, NodeModel::Zero);
    let split = nodes[id].split.map(|(feature, threshold, l, r)| Split {
        feature,
        threshold,
        children: Box::new([assemble(nodes, l), assemble(nodes, r)]),
    });
    TreeNode { model, split }
}
