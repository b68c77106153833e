//! Python bindings: train, predict, save and load forests, and run
//! cross-validation on in-memory data.

use std::path::PathBuf;

use boostforest::data::{self, CsvSchema, Dataset, Task, TaskKind};
use boostforest::error::Error;
use boostforest::eval::{self, Algorithm, PlanParams};
use boostforest::forest::{self, Aggregation, BaseKind, ForestConfig, Prediction};
use boostforest::linalg::Matrix;
use boostforest::model_file;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn task_kind(task: &str) -> PyResult<TaskKind> {
    match task {
        "reg" | "regression" => Ok(TaskKind::Regression),
        "binary" => Ok(TaskKind::Binary),
        "multiclass" => Ok(TaskKind::Multiclass),
        other => Err(PyValueError::new_err(format!(
            "unknown task {other:?} (expected reg, binary or multiclass)"
        ))),
    }
}

fn base_kind(base: &str) -> PyResult<BaseKind> {
    base.parse::<BaseKind>().map_err(to_py)
}

fn matrix(x: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&x).map_err(to_py)
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>, task: &str) -> PyResult<Dataset> {
    let task = match task_kind(task)? {
        TaskKind::Regression => Task::Regression,
        TaskKind::Binary => Task::Binary,
        TaskKind::Multiclass => {
            let j = y.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
            Task::Multiclass(j)
        }
    };
    Dataset::new(matrix(x)?, y, task).map_err(to_py)
}

fn config(
    base: &str,
    n_estimators: usize,
    max_leaves: Option<usize>,
    hard_vote: bool,
    threads: Option<usize>,
) -> PyResult<ForestConfig> {
    Ok(ForestConfig {
        n_estimators,
        max_num_leaf: max_leaves,
        aggregation: if hard_vote {
            Aggregation::HardVote
        } else {
            Aggregation::Probability
        },
        threads,
        ..ForestConfig::new(base_kind(base)?)
    })
}

/// A trained BoostForest or CARForest.
#[pyclass(frozen, module = "boostforest")]
struct Forest {
    inner: forest::Forest,
}

#[pymethods]
impl Forest {
    /// Trains a forest. `task` is `reg`, `binary` or `multiclass`; class
    /// labels are integers starting at 0.
    #[staticmethod]
    #[pyo3(signature = (x, y, task, *, base="boosttree-ridge", n_estimators=100, seed=0, max_leaves=None, hard_vote=false, threads=None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        task: &str,
        base: &str,
        n_estimators: usize,
        seed: u64,
        max_leaves: Option<usize>,
        hard_vote: bool,
        threads: Option<usize>,
    ) -> PyResult<Self> {
        let ds = dataset(x, y, task)?;
        let cfg = config(base, n_estimators, max_leaves, hard_vote, threads)?;
        let inner = py.detach(|| forest::train_forest(&ds, &cfg, seed)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Reads a model file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: model_file::load_model(&path).map_err(to_py)?,
        })
    }

    /// Writes a model file.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        model_file::save_model(&self.inner, &path).map_err(to_py)
    }

    /// Regression values in label units, or predicted class indices.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        x.iter()
            .map(|row| {
                let p = self.inner.predict(row).map_err(to_py)?;
                Ok(match p {
                    Prediction::Value(z) => self.inner.to_raw_units(z),
                    Prediction::Class { class, .. } => class as f64,
                })
            })
            .collect()
    }

    /// Class probabilities per row (classification only).
    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        x.iter()
            .map(|row| match self.inner.predict(row).map_err(to_py)? {
                Prediction::Class { probabilities, .. } => Ok(probabilities),
                Prediction::Value(_) => Err(PyValueError::new_err("predict_proba needs a classification forest")),
            })
            .collect()
    }

    #[getter]
    fn n_estimators(&self) -> usize {
        self.inner.n_estimators()
    }

    #[getter]
    fn mean_leaves(&self) -> f64 {
        self.inner.mean_leaves()
    }

    #[getter]
    fn base(&self) -> &'static str {
        self.inner.base.as_str()
    }

    fn __repr__(&self) -> String {
        format!(
            "Forest(base={:?}, n_estimators={}, mean_leaves={:.1})",
            self.inner.base.as_str(),
            self.inner.n_estimators(),
            self.inner.mean_leaves()
        )
    }
}

/// Loads a CSV file and returns `(x, y)`. The label is the last column
/// unless `label_col` names or indexes another one.
#[pyfunction]
#[pyo3(signature = (path, task, label_col=None))]
fn load_csv(path: PathBuf, task: &str, label_col: Option<String>) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut schema = CsvSchema::new(task_kind(task)?);
    schema.label = label_col.map(|c| c.parse().unwrap_or_else(|e: std::convert::Infallible| match e {}));
    let ds = data::load_csv(&path, &schema).map_err(to_py)?;
    let x = (0..ds.n_samples()).map(|i| ds.features().row(i).to_vec()).collect();
    Ok((x, ds.labels().to_vec()))
}

/// Repeated k-fold cross-validation of one or more base learners. Returns
/// one dict per algorithm with `algorithm`, `metric`, `mean`, `std` and `rank`.
#[pyfunction]
#[pyo3(signature = (x, y, task, bases, *, seed, n_estimators=100, repeats=5, folds=2, threads=None))]
#[allow(clippy::too_many_arguments)]
fn cross_validate<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    task: &str,
    bases: Vec<String>,
    seed: u64,
    n_estimators: usize,
    repeats: usize,
    folds: usize,
    threads: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let ds = dataset(x, y, task)?;
    let metric = eval::metric_name(ds.task());
    let algorithms: Vec<Algorithm> = bases
        .iter()
        .map(|b| Ok(Algorithm::new(b.clone(), config(b, n_estimators, None, false, None)?)))
        .collect::<PyResult<_>>()?;
    let params = PlanParams {
        n_repeats: repeats,
        n_folds: folds,
        threads,
        ..PlanParams::five_by_two(seed)
    };
    let table = py
        .detach(|| eval::run_benchmark(&[("data".to_string(), ds)], &algorithms, &params))
        .map_err(to_py)?;
    table
        .aggregates()
        .into_iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("algorithm", row.algorithm)?;
            d.set_item("metric", metric)?;
            d.set_item("mean", row.mean)?;
            d.set_item("std", row.std)?;
            d.set_item("rank", row.rank)?;
            Ok(d)
        })
        .collect()
}

#[pymodule(name = "boostforest")]
fn boostforest_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Forest>()?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
