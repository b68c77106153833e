//! BoostForest: bagged BoostTrees (or CART trees) with per-tree parameter sampling.
//!
//! Tree `i` draws all of its randomness (bootstrap replica, pool samples,
//! feature subsets, ELM hidden layers) from a ChaCha8 stream keyed by
//! `(master_seed, i)`, so the trained forest does not depend on how many
//! worker threads were used or in which order trees finished.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boosttree::{self, pick, BoostTree, NodeKind, ParameterPool, TreeConfig};
use crate::cart::{self, CartParams, CartTree};
use crate::data::{self, Dataset, InputLayout, PreprocessState, Task};
use crate::error::{Error, Result};
use crate::losses;

/// Base learner family of a forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseKind {
    #[serde(rename = "boosttree-ridge")]
    BoostTreeRidge,
    #[serde(rename = "boosttree-elm")]
    BoostTreeElm,
    #[serde(rename = "boosttree-svr")]
    BoostTreeSvr,
    #[serde(rename = "cart")]
    Cart,
}

impl BaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::BoostTreeRidge => "boosttree-ridge",
            BaseKind::BoostTreeElm => "boosttree-elm",
            BaseKind::BoostTreeSvr => "boosttree-svr",
            BaseKind::Cart => "cart",
        }
    }

    pub fn node_kind(self) -> Option<NodeKind> {
        match self {
            BaseKind::BoostTreeRidge => Some(NodeKind::Ridge),
            BaseKind::BoostTreeElm => Some(NodeKind::Elm),
            BaseKind::BoostTreeSvr => Some(NodeKind::Svr),
            BaseKind::Cart => None,
        }
    }
}

impl fmt::Display for BaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boosttree-ridge" => Ok(BaseKind::BoostTreeRidge),
            "boosttree-elm" => Ok(BaseKind::BoostTreeElm),
            "boosttree-svr" => Ok(BaseKind::BoostTreeSvr),
            "cart" => Ok(BaseKind::Cart),
            other => Err(Error::Config(format!("unknown base learner {other:?}"))),
        }
    }
}

/// How classification trees are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Average the per-tree class probabilities.
    Probability,
    /// Fraction of trees voting for each class.
    HardVote,
}

/// Per-tree candidate values for CART base learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartPool {
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for CartPool {
    fn default() -> Self {
        Self {
            max_depth: vec![4, 6, 8],
            min_samples_leaf: vec![5, 10, 15],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub base: BaseKind,
    pub n_estimators: usize,
    pub pool: ParameterPool,
    pub cart_pool: CartPool,
    /// Fixed leaf budget for every tree. When `None`, ELM and SVR trees draw
    /// one from `pool.max_num_leaf` and ridge trees are unbounded.
    pub max_num_leaf: Option<usize>,
    pub aggregation: Aggregation,
    pub filter_low_weights: bool,
    pub resample_per_threshold: bool,
    /// Train each tree on a bootstrap replica (`false` uses the data as is).
    pub bootstrap: bool,
    /// CART trees consider `ceil(√D)` random features per node.
    pub cart_feature_subsample: bool,
    /// Worker thread cap; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ForestConfig {
    pub fn new(base: BaseKind) -> Self {
        Self {
            base,
            n_estimators: 100,
            pool: ParameterPool::for_kind(base.node_kind().unwrap_or(NodeKind::Ridge)),
            cart_pool: CartPool::default(),
            max_num_leaf: None,
            aggregation: Aggregation::Probability,
            filter_low_weights: true,
            resample_per_threshold: true,
            bootstrap: true,
            cart_feature_subsample: true,
            threads: None,
        }
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.max_num_leaf == Some(0) {
            return Err(Error::Config("max_num_leaf must be at least 1".into()));
        }
        match self.base.node_kind() {
            Some(kind) => {
                self.pool.validate(kind)?;
                if task.is_classification() && kind != NodeKind::Ridge {
                    return Err(Error::Config(format!("{} supports regression only", self.base)));
                }
                if self.max_num_leaf.is_none()
                    && kind != NodeKind::Ridge
                    && (self.pool.max_num_leaf.is_empty() || self.pool.max_num_leaf.contains(&0))
                {
                    return Err(Error::Config("max_num_leaf pool must hold positive values".into()));
                }
            }
            None => {
                if self.cart_pool.max_depth.is_empty() || self.cart_pool.min_samples_leaf.is_empty() {
                    return Err(Error::Config("CART parameter pools must be nonempty".into()));
                }
                if self.cart_pool.min_samples_leaf.contains(&0) {
                    return Err(Error::Config("CART min_samples_leaf must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    BoostTree(BoostTree),
    Cart(CartTree),
}

impl Learner {
    pub fn num_leaves(&self) -> usize {
        match self {
            Learner::BoostTree(t) => t.num_leaf,
            Learner::Cart(t) => t.root.count_leaves(),
        }
    }

    /// Per-tree prediction on a preprocessed row: `[value]` for regression,
    /// class probabilities otherwise.
    pub fn predict_processed(&self, task: Task, x: &[f64]) -> Vec<f64> {
        match self {
            Learner::Cart(t) => t.leaf_value(x).to_vec(),
            Learner::BoostTree(t) => {
                let mut out = vec![0.0; task.n_outputs()];
                t.predict_into(x, &mut out);
                match task {
                    Task::Regression => out,
                    Task::Binary => {
                        let p = losses::sigmoid(out[0]);
                        vec![1.0 - p, p]
                    }
                    Task::Multiclass(_) => {
                        losses::softmax_in_place(&mut out);
                        out
                    }
                }
            }
        }
    }
}

/// Forest output for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Mean tree output in z-normalised label units.
    Value(f64),
    Class {
        class: usize,
        probabilities: Vec<f64>,
    },
}

impl Prediction {
    /// Regression value, or the predicted class index as a float.
    pub fn as_f64(&self) -> f64 {
        match self {
            Prediction::Value(v) => *v,
            Prediction::Class { class, .. } => *class as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub task: Task,
    pub base: BaseKind,
    pub aggregation: Aggregation,
    pub master_seed: u64,
    pub preprocess: PreprocessState,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// CSV layout of the training file, when trained from one.
    #[serde(default)]
    pub input_layout: Option<InputLayout>,
    pub learners: Vec<Learner>,
}

/// Fits preprocessing on `ds`, then trains `config.n_estimators` base learners.
pub fn train_forest(ds: &Dataset, config: &ForestConfig, master_seed: u64) -> Result<Forest> {
    config.validate(ds.task())?;
    if ds.n_samples() == 0 || !ds.has_labels() {
        return Err(Error::InvalidData("training data must be labeled and nonempty".into()));
    }
    let preprocess = data::fit_preprocess(ds)?;
    let processed = data::apply_preprocess(&preprocess, ds)?;
    let learners = train_learners(&processed, config, master_seed)?;
    Ok(Forest {
        task: ds.task(),
        base: config.base,
        aggregation: config.aggregation,
        master_seed,
        preprocess,
        feature_names: ds.feature_names().to_vec(),
        class_names: ds.class_names().to_vec(),
        input_layout: None,
        learners,
    })
}

/// Trains the base learners on an already preprocessed dataset.
pub fn train_learners(ds: &Dataset, config: &ForestConfig, master_seed: u64) -> Result<Vec<Learner>> {
    config.validate(ds.task())?;
    let job = || -> Result<Vec<Learner>> {
        (0..config.n_estimators)
            .into_par_iter()
            .map(|i| train_one(ds, config, master_seed, i))
            .collect()
    };
    match config.threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?
            .install(job),
    }
}

/// Random stream of tree `index`.
pub fn child_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

fn train_one(ds: &Dataset, config: &ForestConfig, master_seed: u64, index: usize) -> Result<Learner> {
    let mut rng = child_rng(master_seed, index);
    let n = ds.n_samples();
    let rows = if config.bootstrap {
        data::bootstrap_indices(n, &mut rng)
    } else {
        (0..n).collect()
    };
    match config.base.node_kind() {
        Some(kind) => {
            let max_num_leaf = match (config.max_num_leaf, kind) {
                (Some(m), _) => Some(m),
                (None, NodeKind::Ridge) => None,
                (None, _) => Some(pick(&config.pool.max_num_leaf, &mut rng)),
            };
            let tree_config = TreeConfig {
                node_kind: kind,
                max_num_leaf,
                resample_per_threshold: config.resample_per_threshold,
                filter_low_weights: config.filter_low_weights,
            };
            let (tree, _) = boosttree::grow_on_rows(
                ds.features(),
                ds.labels(),
                ds.task(),
                &rows,
                &config.pool,
                &tree_config,
                &mut rng,
            )?;
            Ok(Learner::BoostTree(tree))
        }
        None => {
            let d = ds.n_features();
            let params = CartParams {
                max_depth: Some(pick(&config.cart_pool.max_depth, &mut rng)),
                min_samples_leaf: pick(&config.cart_pool.min_samples_leaf, &mut rng),
                feature_subsample: config
                    .cart_feature_subsample
                    .then(|| ((d as f64).sqrt().ceil() as usize).max(1)),
            };
            let tree = cart::fit_cart_on_rows(ds.features(), ds.labels(), ds.task(), &rows, params, &mut rng)?;
            Ok(Learner::Cart(tree))
        }
    }
}

impl Forest {
    pub fn n_estimators(&self) -> usize {
        self.learners.len()
    }

    /// Width of a preprocessed row.
    pub fn n_processed_features(&self) -> usize {
        self.preprocess.n_output_columns()
    }

    pub fn mean_leaves(&self) -> f64 {
        self.learners.iter().map(Learner::num_leaves).sum::<usize>() as f64 / self.learners.len() as f64
    }

    /// Forest made of the first `k` learners. Because every tree depends only
    /// on its own index, this equals a forest trained with `n_estimators = k`.
    pub fn truncated(&self, k: usize) -> Result<Forest> {
        if k == 0 || k > self.learners.len() {
            return Err(Error::Config(format!(
                "cannot keep {k} of {} learners",
                self.learners.len()
            )));
        }
        let mut f = self.clone();
        f.learners.truncate(k);
        Ok(f)
    }

    /// Predicts a preprocessed row.
    pub fn predict_processed(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.n_processed_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_processed_features(),
                found: x.len(),
            });
        }
        let k = self.learners.len() as f64;
        match self.task {
            Task::Regression => {
                let sum: f64 = self.learners.iter().map(|l| l.predict_processed(self.task, x)[0]).sum();
                Ok(Prediction::Value(sum / k))
            }
            task => {
                let j = task.n_classes().unwrap_or(2);
                let mut probs = vec![0.0; j];
                for l in &self.learners {
                    let p = l.predict_processed(task, x);
                    match self.aggregation {
                        Aggregation::Probability => probs.iter_mut().zip(&p).for_each(|(a, b)| *a += b),
                        Aggregation::HardVote => probs[argmax(&p)] += 1.0,
                    }
                }
                probs.iter_mut().for_each(|p| *p /= k);
                Ok(Prediction::Class {
                    class: argmax(&probs),
                    probabilities: probs,
                })
            }
        }
    }

    /// Predicts a raw feature row (categorical cells as fit-time level indices).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let z = self.preprocess.transform_row(x)?;
        self.predict_processed(&z)
    }

    /// Predicts every row of a raw dataset.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<Prediction>> {
        let processed = data::apply_preprocess(&self.preprocess, &strip_labels(ds)?)?;
        let x = processed.features();
        (0..x.rows()).map(|i| self.predict_processed(x.row(i))).collect()
    }

    /// Converts a regression prediction back to raw label units.
    pub fn to_raw_units(&self, z: f64) -> f64 {
        self.preprocess.unscale_label(z)
    }
}

fn strip_labels(ds: &Dataset) -> Result<Dataset> {
    let mut out = Dataset::unlabeled(ds.features().clone(), ds.task())?
        .with_feature_names(ds.feature_names().to_vec())?
        .with_categories(ds.categories().to_vec())?;
    if ds.task().is_classification() && !ds.class_names().is_empty() {
        out = out.with_class_names(ds.class_names().to_vec())?;
    }
    Ok(out)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
