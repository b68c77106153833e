//! Datasets, CSV ingestion, preprocessing and bootstrap resampling.
//!
//! Categorical columns are held as indices into a per-column level dictionary
//! until [`fit_preprocess`]/[`apply_preprocess`] expand them into one-hot blocks.
//! Numeric columns are min-max scaled to `[0, 1]` and regression labels are
//! z-normalised with the population standard deviation.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::linalg::Matrix;

/// Learning task. `Multiclass(j)` carries the number of classes, `j > 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Binary,
    Multiclass(usize),
}

impl Task {
    /// Width of a raw model output: one logit/value, or one logit per class.
    pub fn n_outputs(self) -> usize {
        match self {
            Task::Regression | Task::Binary => 1,
            Task::Multiclass(j) => j,
        }
    }

    pub fn n_classes(self) -> Option<usize> {
        match self {
            Task::Regression => None,
            Task::Binary => Some(2),
            Task::Multiclass(j) => Some(j),
        }
    }

    pub fn is_classification(self) -> bool {
        !matches!(self, Task::Regression)
    }

    pub fn kind(self) -> TaskKind {
        match self {
            Task::Regression => TaskKind::Regression,
            Task::Binary => TaskKind::Binary,
            Task::Multiclass(_) => TaskKind::Multiclass,
        }
    }
}

/// Task without the class count, as requested on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<f64>,
    task: Task,
    feature_names: Vec<String>,
    /// Level dictionary per column; `Some` marks a categorical column whose
    /// feature values are indices into the dictionary.
    categories: Vec<Option<Vec<String>>>,
    class_names: Vec<String>,
}

fn check_labels(labels: &[f64], task: Task) -> Result<()> {
    for (i, &y) in labels.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::InvalidData(format!("label {i} is not finite")));
        }
        if let Some(j) = task.n_classes() {
            if y < 0.0 || y.fract() != 0.0 || y as usize >= j {
                return Err(Error::InvalidData(format!(
                    "label {i} = {y} is not a class index in 0..{j}"
                )));
            }
        }
    }
    Ok(())
}

impl Dataset {
    /// Labeled dataset. Class labels are indices stored as `f64`.
    pub fn new(features: Matrix, labels: Vec<f64>, task: Task) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::InvalidData("dataset needs N >= 1 and D >= 1".into()));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Task::Multiclass(j) = task {
            if j < 3 {
                return Err(Error::InvalidData(format!(
                    "multiclass task needs more than 2 classes, got {j}"
                )));
            }
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        check_labels(&labels, task)?;
        let d = features.cols();
        let class_names = task
            .n_classes()
            .map(|j| (0..j).map(|c| c.to_string()).collect())
            .unwrap_or_default();
        Ok(Self {
            features,
            labels,
            task,
            feature_names: (0..d).map(|j| format!("x{j}")).collect(),
            categories: vec![None; d],
            class_names,
        })
    }

    /// Dataset without labels, used for prediction inputs.
    pub fn unlabeled(features: Matrix, task: Task) -> Result<Self> {
        let n = features.rows();
        let mut ds = Self::new(features, vec![0.0; n], task)?;
        ds.labels.clear();
        Ok(ds)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Marks columns as categorical. Values in those columns must be indices
    /// into the supplied level dictionaries.
    pub fn with_categories(mut self, categories: Vec<Option<Vec<String>>>) -> Result<Self> {
        if categories.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: categories.len(),
            });
        }
        for (j, levels) in categories.iter().enumerate() {
            if let Some(levels) = levels {
                for i in 0..self.n_samples() {
                    let v = self.features.get(i, j);
                    if v < 0.0 || v.fract() != 0.0 || v as usize >= levels.len() {
                        return Err(Error::InvalidData(format!(
                            "categorical value {v} at ({i},{j}) outside its {} levels",
                            levels.len()
                        )));
                    }
                }
            }
        }
        self.categories = categories;
        Ok(self)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if Some(names.len()) != self.task.n_classes() {
            return Err(Error::InvalidData(format!(
                "{} class names for task {:?}",
                names.len(),
                self.task
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn has_labels(&self) -> bool {
        !self.labels.is_empty()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn categories(&self) -> &[Option<Vec<String>>] {
        &self.categories
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn is_categorical(&self, col: usize) -> bool {
        self.categories[col].is_some()
    }

    #[inline]
    pub fn class_of(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Rows `indices` in order; repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: if self.has_labels() {
                indices.iter().map(|&i| self.labels[i]).collect()
            } else {
                Vec::new()
            },
            task: self.task,
            feature_names: self.feature_names.clone(),
            categories: self.categories.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Column addressed by 0-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub task: TaskKind,
    /// Label column; `None` means the last column.
    pub label: Option<ColumnRef>,
    pub categorical: Vec<ColumnRef>,
    /// `None` detects a header from the first row.
    pub has_header: Option<bool>,
}

impl CsvSchema {
    pub fn new(task: TaskKind) -> Self {
        Self {
            task,
            label: None,
            categorical: Vec::new(),
            has_header: None,
        }
    }
}

/// Raw string cells of a CSV file, header split off.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn n_columns(&self) -> usize {
        self.header
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.rows.first().map(Vec::len))
            .unwrap_or(0)
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "?" || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a comma-delimited file into string cells. Rows must all have the
/// same width. A header is taken when `has_header` says so or, if `None`, when
/// the first row contains a non-numeric cell in a column whose second-row cell
/// is numeric.
pub fn read_table(path: &Path, has_header: Option<bool>) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    let width = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::RaggedRow {
                row: i,
                expected: width,
                found: r.len(),
            });
        }
    }
    let header = match has_header {
        Some(h) => h,
        None => {
            rows.len() >= 2
                && rows[0]
                    .iter()
                    .zip(&rows[1])
                    .any(|(a, b)| !is_missing(a) && parse_number(a).is_none() && parse_number(b).is_some())
        }
    };
    let header = if header { Some(rows.remove(0)) } else { None };
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(RawTable { header, rows })
}

fn resolve(col: &ColumnRef, header: Option<&[String]>, width: usize) -> Result<usize> {
    match col {
        ColumnRef::Index(i) if *i < width => Ok(*i),
        ColumnRef::Index(i) => Err(Error::Config(format!(
            "column index {i} out of range for {width} columns"
        ))),
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::Config(format!("no column named {name:?}"))),
    }
}

/// Sorted distinct labels: numerically when every label parses, else lexically.
fn class_dictionary(cells: &[&str]) -> Vec<String> {
    let distinct: BTreeSet<&str> = cells.iter().copied().collect();
    let mut names: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    if names.iter().all(|n| parse_number(n).is_some()) {
        names.sort_by(|a, b| parse_number(a).unwrap().total_cmp(&parse_number(b).unwrap()));
    }
    names
}

/// Column layout of a loaded CSV, kept so that prediction inputs can be read
/// the same way as the training file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputLayout {
    pub n_columns: usize,
    pub label_col: usize,
    pub categorical_cols: Vec<usize>,
    pub has_header: bool,
}

/// Loads a labeled dataset from CSV.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    load_csv_with_layout(path, schema).map(|(ds, _)| ds)
}

pub fn load_csv_with_layout(path: &Path, schema: &CsvSchema) -> Result<(Dataset, InputLayout)> {
    let table = read_table(path, schema.has_header)?;
    let width = table.n_columns();
    let header = table.header.as_deref();
    let label_col = match &schema.label {
        Some(c) => resolve(c, header, width)?,
        None => width - 1,
    };
    let mut categorical_cols = schema
        .categorical
        .iter()
        .map(|c| resolve(c, header, width))
        .collect::<Result<Vec<_>>>()?;
    categorical_cols.sort_unstable();
    categorical_cols.dedup();
    if categorical_cols.contains(&label_col) {
        return Err(Error::Config("label column cannot be categorical".into()));
    }
    let layout = InputLayout {
        n_columns: width,
        label_col,
        categorical_cols,
        has_header: table.header.is_some(),
    };
    if width < 2 {
        return Err(Error::InvalidData(
            "need at least one feature column and a label".into(),
        ));
    }

    let label_cells: Vec<&str> = table.rows.iter().map(|r| r[label_col].as_str()).collect();
    for (i, c) in label_cells.iter().enumerate() {
        if is_missing(c) {
            return Err(Error::MissingValue { row: i, col: label_col });
        }
    }
    let (task, labels, class_names) = match schema.task {
        TaskKind::Regression => {
            let labels = label_cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    parse_number(c).ok_or_else(|| Error::NonNumeric {
                        row: i,
                        col: label_col,
                        value: c.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (Task::Regression, labels, Vec::new())
        }
        kind => {
            let names = class_dictionary(&label_cells);
            let task = match kind {
                TaskKind::Binary if names.len() <= 2 => Task::Binary,
                TaskKind::Binary => {
                    return Err(Error::InvalidData(format!(
                        "binary task but {} distinct labels",
                        names.len()
                    )))
                }
                _ if names.len() >= 3 => Task::Multiclass(names.len()),
                _ => {
                    return Err(Error::InvalidData(format!(
                        "multiclass task needs more than 2 classes, found {}",
                        names.len()
                    )))
                }
            };
            let labels = label_cells
                .iter()
                .map(|c| names.iter().position(|n| n == c).unwrap() as f64)
                .collect();
            let mut names = names;
            if task == Task::Binary && names.len() < 2 {
                names.push(format!("{}#other", names.first().cloned().unwrap_or_default()));
            }
            (task, labels, names)
        }
    };
    let (features, names, categories) = parse_features(&table, &layout)?;
    let mut ds = Dataset::new(features, labels, task)?
        .with_feature_names(names)?
        .with_categories(categories)?;
    if task.is_classification() {
        ds = ds.with_class_names(class_names)?;
    }
    Ok((ds, layout))
}

/// Feature matrix, column names and per-column category levels.
pub type ParsedFeatures = (Matrix, Vec<String>, Vec<Option<Vec<String>>>);

/// Parses every non-label column of `table` under `layout`.
/// If the table is one column narrower than the layout, it is taken to lack
/// the label column.
pub fn parse_features(table: &RawTable, layout: &InputLayout) -> Result<ParsedFeatures> {
    let width = table.n_columns();
    let has_label = if width == layout.n_columns {
        true
    } else if width + 1 == layout.n_columns {
        false
    } else {
        return Err(Error::DimensionMismatch {
            expected: layout.n_columns,
            found: width,
        });
    };
    // Map from output feature position to table column.
    let feature_cols: Vec<usize> = (0..layout.n_columns)
        .filter(|&c| c != layout.label_col)
        .map(|c| if !has_label && c > layout.label_col { c - 1 } else { c })
        .collect();
    let is_cat: Vec<bool> = (0..layout.n_columns)
        .filter(|&c| c != layout.label_col)
        .map(|c| layout.categorical_cols.contains(&c))
        .collect();
    let n = table.rows.len();
    let d = feature_cols.len();
    let mut features = Matrix::zeros(n, d);
    let mut categories: Vec<Option<Vec<String>>> = vec![None; d];
    for (j, (&col, &cat)) in feature_cols.iter().zip(&is_cat).enumerate() {
        if cat {
            let cells: BTreeSet<&str> = table.rows.iter().map(|r| r[col].as_str()).collect();
            let levels: Vec<String> = cells.into_iter().map(str::to_string).collect();
            for (i, r) in table.rows.iter().enumerate() {
                if is_missing(&r[col]) {
                    return Err(Error::MissingValue { row: i, col });
                }
                let idx = levels.iter().position(|l| *l == r[col]).unwrap();
                features.set(i, j, idx as f64);
            }
            categories[j] = Some(levels);
        } else {
            for (i, r) in table.rows.iter().enumerate() {
                let cell = &r[col];
                if is_missing(cell) {
                    return Err(Error::MissingValue { row: i, col });
                }
                let v = parse_number(cell).ok_or_else(|| Error::NonNumeric {
                    row: i,
                    col,
                    value: cell.clone(),
                })?;
                features.set(i, j, v);
            }
        }
    }
    let names = match &table.header {
        Some(h) => feature_cols.iter().map(|&c| h[c].clone()).collect(),
        None => feature_cols.iter().map(|&c| format!("x{c}")).collect(),
    };
    Ok((features, names, categories))
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnTransform {
    /// `(v - min) / (max - min)` clipped to `[0, 1]`; a constant column maps to 0.
    MinMax { min: f64, max: f64 },
    /// One output column per fit-time level; unseen levels map to all zeros.
    OneHot { levels: Vec<String> },
}

impl ColumnTransform {
    fn width(&self) -> usize {
        match self {
            ColumnTransform::MinMax { .. } => 1,
            ColumnTransform::OneHot { levels } => levels.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScaling {
    pub mean: f64,
    /// Population standard deviation (denominator N).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub columns: Vec<ColumnTransform>,
    pub label: Option<LabelScaling>,
}

impl PreprocessState {
    pub fn n_input_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn n_output_columns(&self) -> usize {
        self.columns.iter().map(ColumnTransform::width).sum()
    }

    /// Output column range of every one-hot encoded input column.
    pub fn one_hot_ranges(&self) -> Vec<(usize, std::ops::Range<usize>)> {
        let mut start = 0;
        let mut out = Vec::new();
        for (j, c) in self.columns.iter().enumerate() {
            let w = c.width();
            if matches!(c, ColumnTransform::OneHot { .. }) {
                out.push((j, start..start + w));
            }
            start += w;
        }
        out
    }

    pub fn scale_label(&self, y: f64) -> f64 {
        match self.label {
            Some(s) => (y - s.mean) / s.std,
            None => y,
        }
    }

    pub fn unscale_label(&self, z: f64) -> f64 {
        match self.label {
            Some(s) => z * s.std + s.mean,
            None => z,
        }
    }

    /// Transforms one raw row. Categorical cells are read as indices into
    /// `levels` (per column) or, when `levels` is `None`, into the fit-time levels.
    fn transform_into(&self, raw: &[f64], levels: Option<&[Option<Vec<String>>]>, out: &mut Vec<f64>) {
        for (j, (t, &v)) in self.columns.iter().zip(raw).enumerate() {
            match t {
                ColumnTransform::MinMax { min, max } => {
                    out.push(if max > min {
                        ((v - min) / (max - min)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    });
                }
                ColumnTransform::OneHot { levels: fit_levels } => {
                    let pos = match levels.and_then(|l| l[j].as_ref()) {
                        Some(dict) => dict
                            .get(v as usize)
                            .and_then(|name| fit_levels.iter().position(|l| l == name)),
                        None => {
                            let k = v as usize;
                            (v >= 0.0 && v.fract() == 0.0 && k < fit_levels.len()).then_some(k)
                        }
                    };
                    let start = out.len();
                    out.resize(start + fit_levels.len(), 0.0);
                    if let Some(p) = pos {
                        out[start + p] = 1.0;
                    }
                }
            }
        }
    }

    /// Transforms a raw feature row (categorical cells given as fit-time level indices).
    pub fn transform_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: raw.len(),
            });
        }
        let mut out = Vec::with_capacity(self.n_output_columns());
        self.transform_into(raw, None, &mut out);
        Ok(out)
    }
}

/// Learns the feature and label transforms from `ds`.
pub fn fit_preprocess(ds: &Dataset) -> Result<PreprocessState> {
    let n = ds.n_samples();
    let x = ds.features();
    let mut columns = Vec::with_capacity(ds.n_features());
    for j in 0..ds.n_features() {
        match &ds.categories()[j] {
            Some(dict) => {
                let present: BTreeSet<usize> = (0..n).map(|i| x.get(i, j) as usize).collect();
                let levels = present.into_iter().map(|k| dict[k].clone()).collect();
                columns.push(ColumnTransform::OneHot { levels });
            }
            None => {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..n {
                    min = min.min(x.get(i, j));
                    max = max.max(x.get(i, j));
                }
                columns.push(ColumnTransform::MinMax { min, max });
            }
        }
    }
    let label = match ds.task() {
        Task::Regression => {
            if !ds.has_labels() {
                return Err(Error::InvalidData("regression dataset has no labels".into()));
            }
            let y = ds.labels();
            let mean = y.iter().sum::<f64>() / n as f64;
            let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            if !(std > 0.0) {
                return Err(Error::InvalidData(
                    "regression labels are all identical (std = 0)".into(),
                ));
            }
            Some(LabelScaling { mean, std })
        }
        _ => None,
    };
    Ok(PreprocessState { columns, label })
}

/// Applies fitted transforms: one-hot expansion, `[0, 1]` scaling with
/// clipping, and (for labeled regression data) label z-normalisation.
pub fn apply_preprocess(state: &PreprocessState, ds: &Dataset) -> Result<Dataset> {
    if ds.n_features() != state.n_input_columns() {
        return Err(Error::DimensionMismatch {
            expected: state.n_input_columns(),
            found: ds.n_features(),
        });
    }
    for (j, t) in state.columns.iter().enumerate() {
        let cat = matches!(t, ColumnTransform::OneHot { .. });
        if cat != ds.is_categorical(j) {
            return Err(Error::InvalidData(format!(
                "column {j} categorical flag differs from the fitted layout"
            )));
        }
    }
    let n = ds.n_samples();
    let width = state.n_output_columns();
    let mut data = Vec::with_capacity(n * width);
    for i in 0..n {
        state.transform_into(ds.features().row(i), Some(ds.categories()), &mut data);
    }
    let features = Matrix::new(n, width, data)?;
    let mut names = Vec::with_capacity(width);
    for (j, t) in state.columns.iter().enumerate() {
        match t {
            ColumnTransform::MinMax { .. } => names.push(ds.feature_names()[j].clone()),
            ColumnTransform::OneHot { levels } => {
                for l in levels {
                    names.push(format!("{}={}", ds.feature_names()[j], l));
                }
            }
        }
    }
    let mut out = if ds.has_labels() {
        let labels = ds.labels().iter().map(|&y| state.scale_label(y)).collect();
        Dataset::new(features, labels, ds.task())?
    } else {
        Dataset::unlabeled(features, ds.task())?
    };
    out = out.with_feature_names(names)?;
    if ds.task().is_classification() {
        out = out.with_class_names(ds.class_names().to_vec())?;
    }
    Ok(out)
}

/// `n` indices drawn uniformly with replacement from `0..n`.
pub fn bootstrap_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bootstrap replica of `ds` with the same number of rows.
pub fn bootstrap<R: Rng + ?Sized>(ds: &Dataset, rng: &mut R) -> Dataset {
    let idx = bootstrap_indices(ds.n_samples(), rng);
    ds.subset(&idx)
}
