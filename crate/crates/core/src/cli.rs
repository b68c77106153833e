//! Command-line interface: `train`, `predict`, `cv` and `sweep`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 model-file
//! integrity error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::boosttree::NodeKind;
use crate::data::{self, ColumnRef, CsvSchema, Dataset, InputLayout, TaskKind};
use crate::error::{Error, ErrorClass, Result};
use crate::eval::{self, Algorithm, Knob, PlanParams};
use crate::forest::{self, Aggregation, BaseKind, ForestConfig, Prediction};
use crate::model_file;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "boostforest",
    version,
    about = "Train, apply and benchmark BoostForest models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest and write a model file.
    Train(TrainArgs),
    /// Predict a CSV file with a saved model.
    Predict(PredictArgs),
    /// Repeated k-fold cross-validation.
    Cv(CvArgs),
    /// Cross-validated metric as a function of one hyperparameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Reg,
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    #[value(name = "boosttree-ridge")]
    BoosttreeRidge,
    #[value(name = "boosttree-elm")]
    BoosttreeElm,
    #[value(name = "boosttree-svr")]
    BoosttreeSvr,
    Cart,
}

impl From<BaseArg> for BaseKind {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::BoosttreeRidge => BaseKind::BoostTreeRidge,
            BaseArg::BoosttreeElm => BaseKind::BoostTreeElm,
            BaseArg::BoosttreeSvr => BaseKind::BoostTreeSvr,
            BaseArg::Cart => BaseKind::Cart,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VoteArg {
    Prob,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KnobArg {
    #[value(name = "n_estimators")]
    NEstimators,
    #[value(name = "max_num_leaf")]
    MaxNumLeaf,
}

/// Input data and its schema.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column, by 0-based index or header name (default: last column).
    #[arg(long)]
    pub label_col: Option<String>,
    /// Comma-separated categorical columns, by index or header name.
    #[arg(long, value_delimiter = ',')]
    pub categorical_cols: Vec<String>,
    #[arg(long, value_enum)]
    pub task: TaskArg,
}

/// Model hyperparameters shared by `train`, `cv` and `sweep`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub n_estimators: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub pool_min_samples_leaf: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub pool_lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub pool_elm_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub pool_svr_c: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub pool_svr_eps: Option<Vec<f64>>,
    /// Candidate leaf budgets sampled per tree (ELM and SVR trees).
    #[arg(long, value_delimiter = ',')]
    pub pool_max_leaves: Option<Vec<usize>>,
    /// Fixed leaf budget for every tree.
    #[arg(long)]
    pub max_leaves: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Keep every working-set sample instead of dropping the lowest 5% weights.
    #[arg(long)]
    pub no_weight_filter: bool,
    #[arg(long, value_enum, default_value = "prob")]
    pub vote: VoteArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "boosttree-ridge")]
    pub base: BaseArg,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// One or more base learners, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "boosttree-ridge")]
    pub base: Vec<BaseArg>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    /// Output directory for `folds.csv` and `aggregate.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "boosttree-ridge")]
    pub base: BaseArg,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    #[arg(long, value_enum)]
    pub knob: KnobArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    /// Curve CSV to write (`value,mean,std`).
    #[arg(long)]
    pub out: PathBuf,
}

fn column(s: &str) -> ColumnRef {
    match s.parse() {
        Ok(c) => c,
        Err(never) => match never {},
    }
}

fn schema(args: &DataArgs) -> CsvSchema {
    let task = match args.task {
        TaskArg::Reg => TaskKind::Regression,
        TaskArg::Binary => TaskKind::Binary,
        TaskArg::Multiclass => TaskKind::Multiclass,
    };
    let mut schema = CsvSchema::new(task);
    schema.label = args.label_col.as_deref().map(column);
    schema.categorical = args.categorical_cols.iter().map(|c| column(c)).collect();
    schema
}

fn load(args: &DataArgs) -> Result<(Dataset, InputLayout)> {
    data::load_csv_with_layout(&args.data, &schema(args))
}

/// Builds a forest config from the flags, checking values the flags name.
pub fn forest_config(base: BaseKind, m: &ModelArgs) -> Result<ForestConfig> {
    let mut c = ForestConfig::new(base);
    if let Some(k) = m.n_estimators {
        if k < 1 {
            return Err(Error::Config("--n-estimators must be at least 1".into()));
        }
        c.n_estimators = k;
    }
    fn set<T: Clone>(target: &mut Vec<T>, value: &Option<Vec<T>>, flag: &str) -> Result<()> {
        if let Some(v) = value {
            if v.is_empty() {
                return Err(Error::Config(format!("{flag} needs at least one value")));
            }
            *target = v.clone();
        }
        Ok(())
    }
    set(
        &mut c.pool.min_samples_leaf,
        &m.pool_min_samples_leaf,
        "--pool-min-samples-leaf",
    )?;
    set(&mut c.pool.lambda, &m.pool_lambda, "--pool-lambda")?;
    set(&mut c.pool.elm_hidden, &m.pool_elm_hidden, "--pool-elm-hidden")?;
    set(&mut c.pool.svr_c, &m.pool_svr_c, "--pool-svr-c")?;
    set(&mut c.pool.svr_epsilon, &m.pool_svr_eps, "--pool-svr-eps")?;
    set(&mut c.pool.max_num_leaf, &m.pool_max_leaves, "--pool-max-leaves")?;
    if base == BaseKind::Cart {
        // CART pools are fixed; the leaf-size flag overrides the CART leaf pool.
        set(
            &mut c.cart_pool.min_samples_leaf,
            &m.pool_min_samples_leaf,
            "--pool-min-samples-leaf",
        )?;
    }
    let kind = base.node_kind().unwrap_or(NodeKind::Ridge);
    c.pool
        .validate(kind)
        .map_err(|e| Error::Config(format!("invalid --pool-* value: {e}")))?;
    if m.max_leaves == Some(0) {
        return Err(Error::Config("--max-leaves must be at least 1".into()));
    }
    c.max_num_leaf = m.max_leaves;
    if m.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    c.threads = m.threads;
    c.filter_low_weights = !m.no_weight_filter;
    c.aggregation = match m.vote {
        VoteArg::Prob => Aggregation::Probability,
        VoteArg::Hard => Aggregation::HardVote,
    };
    Ok(c)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    n_trees: usize,
    mean_leaves: f64,
    train_metric: f64,
    metric: &'a str,
    seed: u64,
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let config = forest_config(args.base.into(), &args.model)?;
    let (ds, layout) = load(&args.data)?;
    let mut forest = forest::train_forest(&ds, &config, args.seed)?;
    forest.input_layout = Some(layout);
    model_file::save_model(&forest, &args.out)?;
    let summary = TrainSummary {
        n_trees: forest.n_estimators(),
        mean_leaves: forest.mean_leaves(),
        train_metric: eval::evaluate(&forest, &ds)?,
        metric: eval::metric_name(ds.task()),
        seed: args.seed,
    };
    writeln!(out, "{}", serde_json::to_string(&summary).expect("plain struct")).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let forest = model_file::load_model(&args.model)?;
    let n_inputs = forest.preprocess.n_input_columns();
    let layout = forest.input_layout.clone().unwrap_or(InputLayout {
        n_columns: n_inputs + 1,
        label_col: n_inputs,
        categorical_cols: Vec::new(),
        has_header: false,
    });
    let table = data::read_table(&args.data, Some(layout.has_header))?;
    let (features, names, categories) = data::parse_features(&table, &layout)?;
    let ds = Dataset::unlabeled(features, forest.task)?
        .with_feature_names(names)?
        .with_categories(categories)?;
    let preds = forest.predict_dataset(&ds)?;

    let mut w = csv::Writer::from_path(&args.out)?;
    match forest.task.n_classes() {
        None => {
            w.write_record(["index", "prediction"])?;
            for (i, p) in preds.iter().enumerate() {
                let raw = forest.to_raw_units(p.as_f64());
                w.write_record([i.to_string(), raw.to_string()])?;
            }
        }
        Some(j) => {
            let mut header = vec!["index".to_string(), "class".to_string()];
            header.extend((0..j).map(|c| format!("p_{c}")));
            w.write_record(&header)?;
            for (i, p) in preds.iter().enumerate() {
                let Prediction::Class { class, probabilities } = p else {
                    unreachable!("classification forest")
                };
                let name = forest
                    .class_names
                    .get(*class)
                    .cloned()
                    .unwrap_or_else(|| class.to_string());
                let mut rec = vec![i.to_string(), name];
                rec.extend(probabilities.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&args.out, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_cv(args: &CvArgs, out: &mut dyn Write) -> Result<()> {
    let mut algorithms = Vec::new();
    for &b in &args.base {
        let base: BaseKind = b.into();
        let mut a = Algorithm::forest(base);
        a.config = forest_config(base, &args.model)?;
        if algorithms.iter().any(|x: &Algorithm| x.name == a.name) {
            return Err(Error::Config(format!("--base lists {base} twice")));
        }
        algorithms.push(a);
    }
    let (ds, _) = load(&args.data)?;
    let params = PlanParams {
        n_repeats: args.repeats,
        n_folds: args.folds,
        seed: args.seed,
        stratify: true,
        threads: args.model.threads,
    };
    let name = args
        .data
        .data
        .file_stem()
        .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    let table = eval::run_benchmark(&[(name, ds)], &algorithms, &params)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_file(&args.out.join("folds.csv"), &table.fold_csv()?)?;
    let aggregate = table.aggregate_csv()?;
    write_file(&args.out.join("aggregate.csv"), &aggregate)?;
    out.write_all(aggregate.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let base: BaseKind = args.base.into();
    let mut algorithm = Algorithm::forest(base);
    algorithm.config = forest_config(base, &args.model)?;
    let knob = match args.knob {
        KnobArg::NEstimators => Knob::NEstimators,
        KnobArg::MaxNumLeaf => Knob::MaxNumLeaf,
    };
    let (ds, _) = load(&args.data)?;
    let params = PlanParams {
        n_repeats: args.repeats,
        n_folds: args.folds,
        seed: args.seed,
        stratify: true,
        threads: args.model.threads,
    };
    let rows = eval::sweep_curve(&ds, &algorithm, knob, &args.values, &params)?;
    let csv = eval::sweep_csv(&rows)?;
    write_file(&args.out, &csv)?;
    out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::ModelIntegrity => EXIT_MODEL,
    }
}

/// Executes a parsed command.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
