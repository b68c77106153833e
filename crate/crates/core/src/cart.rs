//! Classical CART trees: greedy binary splits by Gini impurity reduction
//! (classification) or variance reduction (regression), with constant leaves.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartNode {
    /// Class frequencies (classification) or `[mean]` (regression).
    pub value: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<CartSplit>,
}

/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartSplit {
    pub feature: usize,
    pub threshold: f64,
    pub children: Box<[CartNode; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Number of features drawn at random at every node; `None` uses all.
    pub feature_subsample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub root: CartNode,
    pub task: Task,
    pub n_features: usize,
    pub params: CartParams,
}

impl CartNode {
    pub fn depth(&self) -> usize {
        match &self.split {
            None => 0,
            Some(s) => 1 + s.children[0].depth().max(s.children[1].depth()),
        }
    }

    pub fn count_leaves(&self) -> usize {
        match &self.split {
            None => 1,
            Some(s) => s.children[0].count_leaves() + s.children[1].count_leaves(),
        }
    }
}

impl CartTree {
    /// Leaf statistic of `x` without a dimension check.
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut node = &self.root;
        while let Some(s) = &node.split {
            node = if x[s.feature] <= s.threshold {
                &s.children[0]
            } else {
                &s.children[1]
            };
        }
        &node.value
    }

    /// Class probabilities or a one-element vector holding the mean.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(self.leaf_value(x).to_vec())
    }
}

/// Fits a CART tree on every row of `ds`.
pub fn fit_cart<R: Rng + ?Sized>(ds: &Dataset, params: CartParams, rng: &mut R) -> Result<CartTree> {
    let rows: Vec<usize> = (0..ds.n_samples()).collect();
    fit_cart_on_rows(ds.features(), ds.labels(), ds.task(), &rows, params, rng)
}

/// Fits a CART tree on `rows` of `x` (repeats allowed).
pub fn fit_cart_on_rows<R: Rng + ?Sized>(
    x: &Matrix,
    labels: &[f64],
    task: Task,
    rows: &[usize],
    params: CartParams,
    rng: &mut R,
) -> Result<CartTree> {
    if rows.is_empty() {
        return Err(Error::InvalidData("cannot fit CART on zero samples".into()));
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::Config("min_samples_leaf must be positive".into()));
    }
    let grower = Grower {
        x,
        labels,
        n_classes: task.n_classes(),
        params,
    };
    let root = grower.grow(rows.to_vec(), 0, rng);
    Ok(CartTree {
        root,
        task,
        n_features: x.cols(),
        params,
    })
}

struct Grower<'a> {
    x: &'a Matrix,
    labels: &'a [f64],
    n_classes: Option<usize>,
    params: CartParams,
}

/// Running sufficient statistics of a sample set.
#[derive(Clone)]
struct Stats {
    n: f64,
    sum: f64,
    sum_sq: f64,
    counts: Vec<f64>,
}

impl Stats {
    fn new(n_classes: Option<usize>) -> Self {
        Self {
            n: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
            counts: vec![0.0; n_classes.unwrap_or(0)],
        }
    }

    fn add(&mut self, y: f64, sign: f64) {
        self.n += sign;
        if self.counts.is_empty() {
            self.sum += sign * y;
            self.sum_sq += sign * y * y;
        } else {
            self.counts[y as usize] += sign;
        }
    }

    /// Sample count times impurity: Gini `n(1 − Σp²)` or the sum of squared deviations.
    fn weighted_impurity(&self) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        if self.counts.is_empty() {
            (self.sum_sq - self.sum * self.sum / self.n).max(0.0)
        } else {
            self.n - self.counts.iter().map(|c| c * c).sum::<f64>() / self.n
        }
    }
}

impl Grower<'_> {
    fn stats(&self, rows: &[usize]) -> Stats {
        let mut s = Stats::new(self.n_classes);
        for &r in rows {
            s.add(self.labels[r], 1.0);
        }
        s
    }

    fn leaf_value(&self, rows: &[usize]) -> Vec<f64> {
        let s = self.stats(rows);
        if s.counts.is_empty() {
            vec![s.sum / s.n]
        } else {
            s.counts.iter().map(|c| c / s.n).collect()
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.labels[rows[0]];
        rows.iter().all(|&r| self.labels[r] == first)
    }

    fn grow<R: Rng + ?Sized>(&self, rows: Vec<usize>, depth: usize, rng: &mut R) -> CartNode {
        let value = self.leaf_value(&rows);
        let can_split = self.params.max_depth.is_none_or(|d| depth < d)
            && rows.len() >= 2 * self.params.min_samples_leaf
            && !self.is_pure(&rows);
        let split = if can_split { self.best_split(&rows, rng) } else { None };
        let Some((feature, threshold)) = split else {
            return CartNode { value, split: None };
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.x.get(r, feature) <= threshold);
        let children = Box::new([self.grow(left, depth + 1, rng), self.grow(right, depth + 1, rng)]);
        CartNode {
            value,
            split: Some(CartSplit {
                feature,
                threshold,
                children,
            }),
        }
    }

    /// Best `(feature, midpoint threshold)` by impurity reduction.
    fn best_split<R: Rng + ?Sized>(&self, rows: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let d = self.x.cols();
        let features: Vec<usize> = match self.params.feature_subsample {
            Some(m) if m < d => {
                let mut f = index::sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let total = self.stats(rows);
        let parent = total.weighted_impurity();
        let min_leaf = self.params.min_samples_leaf;
        let n = rows.len();
        let mut best: Option<(usize, f64)> = None;
        let mut best_reduction = f64::NEG_INFINITY;
        let mut order = rows.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let mut left = Stats::new(self.n_classes);
            let mut right = total.clone();
            for i in 0..n - 1 {
                let y = self.labels[order[i]];
                left.add(y, 1.0);
                right.add(y, -1.0);
                let (a, b) = (self.x.get(order[i], f), self.x.get(order[i + 1], f));
                if a == b || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let reduction = parent - left.weighted_impurity() - right.weighted_impurity();
                if reduction > best_reduction {
                    best_reduction = reduction;
                    let mid = a + (b - a) / 2.0;
                    best = Some((f, if mid < b { mid } else { a }));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(max_depth: Option<usize>, min_leaf: usize) -> CartParams {
        CartParams {
            max_depth,
            min_samples_leaf: min_leaf,
            feature_subsample: None,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let x = Matrix::new(5, 1, vec![0.0, 0.1, 0.2, 0.3, 0.4]).unwrap();
        let ds = Dataset::new(x, vec![1.0; 5], Task::Binary).unwrap();
        let t = fit_cart(&ds, params(None, 1), &mut rng()).unwrap();
        assert!(t.root.split.is_none());
        assert_eq!(t.predict(&[0.7]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn depth_one_splits_inside_the_gap() {
        let xs = vec![0.0, 0.1, 0.2, 0.3, 0.7, 0.8, 0.9, 1.0];
        let y = vec![1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0];
        let ds = Dataset::new(Matrix::new(8, 1, xs).unwrap(), y, Task::Regression).unwrap();
        let t = fit_cart(&ds, params(Some(1), 1), &mut rng()).unwrap();
        let s = t.root.split.as_ref().unwrap();
        assert!(s.threshold > 0.3 && s.threshold < 0.7);
        assert_eq!(t.predict(&[0.1]).unwrap(), vec![1.0]);
        assert_eq!(t.predict(&[0.95]).unwrap(), vec![5.0]);
    }

    #[test]
    fn depth_zero_is_majority_or_mean() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let ds = Dataset::new(x.clone(), vec![0.0, 1.0, 1.0, 1.0], Task::Binary).unwrap();
        let t = fit_cart(&ds, params(Some(0), 1), &mut rng()).unwrap();
        assert_eq!(t.root.value, vec![0.25, 0.75]);
        let ds = Dataset::new(x, vec![2.0, 4.0, 6.0, 8.0], Task::Regression).unwrap();
        let t = fit_cart(&ds, params(Some(0), 1), &mut rng()).unwrap();
        assert_eq!(t.predict(&[9.0]).unwrap(), vec![5.0]);
        assert!(t.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn respects_min_leaf_and_depth() {
        let n = 200;
        let x: Vec<f64> = (0..n).map(|i| ((i * 37) % n) as f64 / n as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (10.0 * v).sin()).collect();
        let ds = Dataset::new(Matrix::new(n, 1, x).unwrap(), y, Task::Regression).unwrap();
        let t = fit_cart(&ds, params(Some(4), 7), &mut rng()).unwrap();
        assert!(t.root.depth() <= 4);
        fn check(node: &CartNode, rows: Vec<usize>, ds: &Dataset, min: usize) {
            assert!(rows.len() >= min);
            if let Some(s) = &node.split {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&i| ds.features().get(i, s.feature) <= s.threshold);
                check(&s.children[0], l, ds, min);
                check(&s.children[1], r, ds, min);
            }
        }
        check(&t.root, (0..n).collect(), &ds, 7);
    }
}
