//! Repeated k-fold cross-validation, metrics, ranking and CSV reports.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boosttree::{NodeKind, ParameterPool};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::forest::{self, BaseKind, CartPool, Forest, ForestConfig, Prediction};

/// Fold assignment of every sample for every repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_repeats: usize,
    pub n_folds: usize,
    pub seed: u64,
    /// `assignments[r][i]` is the test fold of sample `i` in repeat `r`.
    pub assignments: Vec<Vec<usize>>,
}

impl CvPlan {
    /// `(train, test)` sample indices of one fold, each ascending.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments[repeat].iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self, repeat: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.assignments[repeat] {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffled fold assignment per repeat. With `stratify` labels, the members
/// of each class are dealt round-robin over the folds, continuing from where
/// the previous class stopped, so every class is spread within ±1 per fold
/// and overall fold sizes differ by at most one.
pub fn make_cv_plan(
    n: usize,
    n_repeats: usize,
    n_folds: usize,
    seed: u64,
    stratify: Option<&[usize]>,
) -> Result<CvPlan> {
    if n_folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    if n < n_folds {
        return Err(Error::Config(format!("cannot split {n} samples into {n_folds} folds")));
    }
    if n_repeats < 1 {
        return Err(Error::Config("need at least 1 repeat".into()));
    }
    if let Some(labels) = stratify {
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
    }
    let mut assignments = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut fold_of = vec![0; n];
        match stratify {
            None => {
                for (pos, &i) in order.iter().enumerate() {
                    fold_of[i] = pos % n_folds;
                }
            }
            Some(labels) => {
                let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for &i in &order {
                    by_class.entry(labels[i]).or_default().push(i);
                }
                let mut offset = 0;
                for members in by_class.values() {
                    for (t, &i) in members.iter().enumerate() {
                        fold_of[i] = (offset + t) % n_folds;
                    }
                    offset = (offset + members.len()) % n_folds;
                }
            }
        }
        assignments.push(fold_of);
    }
    Ok(CvPlan {
        n_repeats,
        n_folds,
        seed,
        assignments,
    })
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: b, found: a });
    }
    if a == 0 {
        return Err(Error::InvalidData("metric of zero samples".into()));
    }
    Ok(())
}

/// Fraction of predictions equal to the truth.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Rank of every score (1 = best); tied scores share the mean of their positions.
pub fn rank_algorithms(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Name of the metric reported for a task.
pub fn metric_name(task: Task) -> &'static str {
    if task.is_classification() {
        "accuracy"
    } else {
        "rmse"
    }
}

/// Accuracy (classification) or RMSE in the forest's z-normalised label units
/// (regression) of `forest` on the labeled raw dataset `test`.
pub fn evaluate(forest: &Forest, test: &Dataset) -> Result<f64> {
    let preds = forest.predict_dataset(test)?;
    score(forest, &preds, test)
}

fn score(forest: &Forest, preds: &[Prediction], test: &Dataset) -> Result<f64> {
    if test.task().is_classification() {
        let p: Vec<usize> = preds.iter().map(|p| p.as_f64() as usize).collect();
        let t: Vec<usize> = (0..test.n_samples()).map(|i| test.class_of(i)).collect();
        accuracy(&p, &t)
    } else {
        let p: Vec<f64> = preds.iter().map(Prediction::as_f64).collect();
        let t: Vec<f64> = test
            .labels()
            .iter()
            .map(|&y| forest.preprocess.scale_label(y))
            .collect();
        rmse(&p, &t)
    }
}

/// A named training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm {
    pub name: String,
    pub config: ForestConfig,
}

impl Algorithm {
    pub fn new(name: impl Into<String>, config: ForestConfig) -> Self {
        Self {
            name: name.into(),
            config,
        }
    }

    /// Default BoostForest (or CARForest) with the given base learner.
    pub fn forest(base: BaseKind) -> Self {
        let name = match base {
            BaseKind::BoostTreeRidge => "boostforest",
            BaseKind::BoostTreeElm => "boostforest-elm",
            BaseKind::BoostTreeSvr => "boostforest-svr",
            BaseKind::Cart => "carforest",
        };
        Self::new(name, ForestConfig::new(base))
    }

    /// One CART tree of depth 6 and minimum leaf size 10 on the full training fold.
    pub fn single_cart() -> Self {
        let config = ForestConfig {
            n_estimators: 1,
            bootstrap: false,
            cart_feature_subsample: false,
            cart_pool: CartPool {
                max_depth: vec![6],
                min_samples_leaf: vec![10],
            },
            ..ForestConfig::new(BaseKind::Cart)
        };
        Self::new("cart", config)
    }

    /// A BoostTree that can never split: it predicts the zero model (class 0
    /// at probability 1/2 for binary data, the training mean for regression).
    pub fn constant_baseline() -> Self {
        let config = ForestConfig {
            n_estimators: 1,
            bootstrap: false,
            pool: ParameterPool {
                min_samples_leaf: vec![usize::MAX / 4],
                ..ParameterPool::for_kind(NodeKind::Ridge)
            },
            ..ForestConfig::new(BaseKind::BoostTreeRidge)
        };
        Self::new("constant", config)
    }
}

/// Cross-validation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanParams {
    pub n_repeats: usize,
    pub n_folds: usize,
    pub seed: u64,
    /// Stratify folds by class for classification data.
    pub stratify: bool,
    /// Worker thread cap; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl PlanParams {
    /// Five repeats of 2-fold cross-validation.
    pub fn five_by_two(seed: u64) -> Self {
        Self {
            n_repeats: 5,
            n_folds: 2,
            seed,
            stratify: true,
            threads: None,
        }
    }
}

/// Seed shared by every algorithm trained on fold `(repeat, fold)`.
pub fn fold_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ repeat as u64) ^ fold as u64)
}

pub fn plan_for(ds: &Dataset, params: &PlanParams) -> Result<CvPlan> {
    let labels: Option<Vec<usize>> = (params.stratify && ds.task().is_classification())
        .then(|| (0..ds.n_samples()).map(|i| ds.class_of(i)).collect());
    make_cv_plan(
        ds.n_samples(),
        params.n_repeats,
        params.n_folds,
        params.seed,
        labels.as_deref(),
    )
}

fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => job(),
        Some(0) => Err(Error::Config("threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?
            .install(job),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub dataset: String,
    pub algorithm: String,
    pub repeat: usize,
    pub fold: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub algorithm: String,
    pub mean: f64,
    pub std: f64,
    pub rank: f64,
}

/// Fold-level results keyed by `(dataset, algorithm, repeat, fold)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    rows: BTreeMap<(String, String, usize, usize), FoldRow>,
    /// Algorithm order of first insertion, used for report ordering.
    algorithms: Vec<String>,
    datasets: Vec<String>,
}

impl ResultTable {
    pub fn insert(&mut self, row: FoldRow) {
        if !self.algorithms.contains(&row.algorithm) {
            self.algorithms.push(row.algorithm.clone());
        }
        if !self.datasets.contains(&row.dataset) {
            self.datasets.push(row.dataset.clone());
        }
        let key = (row.dataset.clone(), row.algorithm.clone(), row.repeat, row.fold);
        self.rows.insert(key, row);
    }

    /// Rows in `(dataset, algorithm, repeat, fold)` order of first appearance.
    pub fn rows(&self) -> Vec<&FoldRow> {
        let mut out = Vec::with_capacity(self.rows.len());
        for d in &self.datasets {
            for a in &self.algorithms {
                out.extend(
                    self.rows
                        .range((d.clone(), a.clone(), 0, 0)..=(d.clone(), a.clone(), usize::MAX, usize::MAX))
                        .map(|(_, r)| r),
                );
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mean, sample standard deviation and per-dataset rank of every
    /// `(dataset, algorithm)` pair.
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for d in &self.datasets {
            let mut rows: Vec<AggregateRow> = Vec::new();
            let mut higher_is_better = true;
            for a in &self.algorithms {
                let values: Vec<f64> = self
                    .rows
                    .range((d.clone(), a.clone(), 0, 0)..=(d.clone(), a.clone(), usize::MAX, usize::MAX))
                    .map(|(_, r)| {
                        higher_is_better = r.metric == "accuracy";
                        r.value
                    })
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(&values);
                rows.push(AggregateRow {
                    dataset: d.clone(),
                    algorithm: a.clone(),
                    mean,
                    std,
                    rank: 0.0,
                });
            }
            let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
            for (r, rank) in rows.iter_mut().zip(rank_algorithms(&means, higher_is_better)) {
                r.rank = rank;
            }
            out.extend(rows);
        }
        out
    }

    /// Mean of one `(dataset, algorithm)` pair.
    pub fn mean(&self, dataset: &str, algorithm: &str) -> Option<f64> {
        self.aggregates()
            .into_iter()
            .find(|r| r.dataset == dataset && r.algorithm == algorithm)
            .map(|r| r.mean)
    }

    /// CSV with header `dataset,algorithm,repeat,fold,metric,value`.
    pub fn fold_csv(&self) -> Result<String> {
        write_csv(self.rows().into_iter())
    }

    /// CSV with header `dataset,algorithm,mean,std,rank`.
    pub fn aggregate_csv(&self) -> Result<String> {
        write_csv(self.aggregates().iter())
    }
}

/// Mean and sample (n − 1) standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_csv<T: Serialize>(rows: impl Iterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidData(format!("cannot write CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

/// Runs every algorithm on every dataset under repeated k-fold CV. Preprocessing
/// is fitted on each training fold only. All algorithms see the same folds and
/// the same per-fold seed.
pub fn run_benchmark(
    datasets: &[(String, Dataset)],
    algorithms: &[Algorithm],
    params: &PlanParams,
) -> Result<ResultTable> {
    for (_, ds) in datasets {
        for a in algorithms {
            a.config.validate(ds.task())?;
        }
    }
    with_threads(params.threads, || {
        let mut table = ResultTable {
            algorithms: algorithms.iter().map(|a| a.name.clone()).collect(),
            datasets: datasets.iter().map(|(name, _)| name.clone()).collect(),
            ..Default::default()
        };
        for (name, ds) in datasets {
            let plan = plan_for(ds, params)?;
            let jobs: Vec<(usize, usize, usize)> = (0..plan.n_repeats)
                .flat_map(|r| (0..plan.n_folds).flat_map(move |f| (0..algorithms.len()).map(move |a| (r, f, a))))
                .collect();
            let rows: Vec<FoldRow> = jobs
                .par_iter()
                .map(|&(r, f, a)| {
                    let (train, test) = plan.split(r, f);
                    let config = ForestConfig {
                        threads: None,
                        ..algorithms[a].config.clone()
                    };
                    let forest = forest::train_forest(&ds.subset(&train), &config, fold_seed(params.seed, r, f))?;
                    Ok(FoldRow {
                        dataset: name.clone(),
                        algorithm: algorithms[a].name.clone(),
                        repeat: r,
                        fold: f,
                        metric: metric_name(ds.task()).to_string(),
                        value: evaluate(&forest, &ds.subset(&test))?,
                    })
                })
                .collect::<Result<_>>()?;
            for row in rows {
                table.insert(row);
            }
        }
        Ok(table)
    })
}

/// Hyperparameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    NEstimators,
    MaxNumLeaf,
}

impl std::str::FromStr for Knob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_estimators" => Ok(Knob::NEstimators),
            "max_num_leaf" => Ok(Knob::MaxNumLeaf),
            other => Err(Error::Config(format!(
                "unknown knob {other:?} (expected n_estimators or max_num_leaf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub mean: f64,
    pub std: f64,
}

/// Mean and standard deviation of the CV metric for every knob value. All
/// values use the same folds and fold seeds. For `n_estimators` the largest
/// forest is trained once per fold and its prefixes are evaluated, which is
/// identical to training each size separately.
pub fn sweep_curve(
    ds: &Dataset,
    algorithm: &Algorithm,
    knob: Knob,
    values: &[usize],
    params: &PlanParams,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) || values[0] == 0 {
        return Err(Error::Config("sweep values must be positive and increasing".into()));
    }
    algorithm.config.validate(ds.task())?;
    let plan = plan_for(ds, params)?;
    let folds: Vec<(usize, usize)> = (0..plan.n_repeats)
        .flat_map(|r| (0..plan.n_folds).map(move |f| (r, f)))
        .collect();
    // scores[fold][value]
    let scores: Vec<Vec<f64>> = with_threads(params.threads, || {
        folds
            .par_iter()
            .map(|&(r, f)| {
                let (train, test) = plan.split(r, f);
                let (train, test) = (ds.subset(&train), ds.subset(&test));
                let seed = fold_seed(params.seed, r, f);
                let base = ForestConfig {
                    threads: None,
                    ..algorithm.config.clone()
                };
                match knob {
                    Knob::NEstimators => {
                        let config = ForestConfig {
                            n_estimators: *values.last().unwrap(),
                            ..base
                        };
                        let full = forest::train_forest(&train, &config, seed)?;
                        values
                            .iter()
                            .map(|&k| evaluate(&full.truncated(k)?, &test))
                            .collect::<Result<Vec<f64>>>()
                    }
                    Knob::MaxNumLeaf => values
                        .iter()
                        .map(|&m| {
                            let config = ForestConfig {
                                max_num_leaf: Some(m),
                                ..base.clone()
                            };
                            evaluate(&forest::train_forest(&train, &config, seed)?, &test)
                        })
                        .collect::<Result<Vec<f64>>>(),
                }
            })
            .collect()
    })?;
    Ok(values
        .iter()
        .enumerate()
        .map(|(v, &value)| {
            let col: Vec<f64> = scores.iter().map(|s| s[v]).collect();
            let (mean, std) = mean_std(&col);
            SweepRow { value, mean, std }
        })
        .collect())
}

/// CSV with header `value,mean,std`.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    write_csv(rows.iter())
}
