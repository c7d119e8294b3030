//! Command-line front end: `train`, `project`, `evaluate` and `compare`.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{BaselineConfig, BaselineMethod, HeatSigma};
use crate::dataio::{self, Dataset, LabelColumn, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{self, Classifier, PairScope};
use crate::fsutil::write_atomic;
use crate::model::MethodConfig;
use crate::nlp::{EigenOrder, InitKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    PgmDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Nlp,
    Pca,
    Lpp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Smallest,
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Pca,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Nn,
    NearestLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    WithinClass,
    AllPairs,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct DataArgs {
    /// CSV file or image directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: DataFormat,
    /// Label column for CSV input: index, header name, `first` or `last`.
    #[arg(long, default_value = "last")]
    pub label_col: LabelColumn,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct HyperArgs {
    /// Neighbors per sample (NLP lines, LPP graph).
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "smallest")]
    pub eigen_order: OrderArg,
    #[arg(long, value_enum, default_value = "pca")]
    pub init: InitArg,
    /// LPP heat-kernel width, or `auto`.
    #[arg(long, default_value = "auto")]
    pub sigma: HeatSigma,
    /// Skip mean-centering before NLP training.
    #[arg(long)]
    pub no_center: bool,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SplitArgs {
    /// Fraction of each class used for training.
    #[arg(long)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw splits without per-class stratification.
    #[arg(long)]
    pub no_stratify: bool,
    #[arg(long, value_enum, default_value = "nn")]
    pub classifier: ClassifierArg,
    #[arg(long, value_enum, default_value = "within-class")]
    pub pair_scope: ScopeArg,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Fit a projection and write the model JSON plus its objective trace.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "nlp")]
        method: MethodArg,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Objective trace CSV; defaults to `<out stem>.trace.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Project a dataset with a saved model.
    Project {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated random-split evaluation of one method.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "nlp")]
        method: MethodArg,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Report JSON; the per-repeat CSV goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired comparison of several methods over a sweep of dimensions.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        methods: Vec<MethodArg>,
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Long-format CSV; a gnuplot table goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

/// A fully parsed invocation.
#[derive(Debug, Clone, PartialEq, Parser)]
#[command(
    name = "nlp",
    version,
    about = "Nearest line projection subspace learning"
)]
pub struct RunSpec {
    #[command(subcommand)]
    pub command: Command,
    /// Only print errors and requested results.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

fn push(args: &mut Vec<String>, flag: &str, value: impl ToString) {
    args.push(format!("--{flag}"));
    args.push(value.to_string());
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl DataArgs {
    fn emit(&self, args: &mut Vec<String>) {
        push(args, "data", self.data.display());
        push(args, "format", value_name(&self.format));
        push(args, "label-col", &self.label_col);
    }
}

impl HyperArgs {
    fn emit(&self, args: &mut Vec<String>) {
        push(args, "k", self.k);
        push(args, "max-iters", self.max_iters);
        push(args, "tol", format!("{:?}", self.tol));
        push(args, "eigen-order", value_name(&self.eigen_order));
        push(args, "init", value_name(&self.init));
        push(args, "sigma", self.sigma);
        if self.no_center {
            args.push("--no-center".into());
        }
    }
}

impl SplitArgs {
    fn emit(&self, args: &mut Vec<String>) {
        push(args, "train-frac", format!("{:?}", self.train_frac));
        push(args, "repeats", self.repeats);
        push(args, "seed", self.seed);
        if self.no_stratify {
            args.push("--no-stratify".into());
        }
        push(args, "classifier", value_name(&self.classifier));
        push(args, "pair-scope", value_name(&self.pair_scope));
    }

    fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_frac,
            seed: self.seed,
            repeats: self.repeats,
            stratified: !self.no_stratify,
        }
    }

    fn classifier(&self) -> Classifier {
        match self.classifier {
            ClassifierArg::Nn => Classifier::Nn,
            ClassifierArg::NearestLine => Classifier::NearestLine {
                scope: match self.pair_scope {
                    ScopeArg::WithinClass => PairScope::WithinClass,
                    ScopeArg::AllPairs => PairScope::AllPairs,
                },
            },
        }
    }
}

impl RunSpec {
    /// The explicit flag list that parses back into `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec!["nlp".to_string()];
        match &self.command {
            Command::Train {
                data,
                method,
                dim,
                hyper,
                seed,
                out,
                trace,
            } => {
                args.push("train".into());
                data.emit(&mut args);
                push(&mut args, "method", value_name(method));
                push(&mut args, "dim", dim);
                hyper.emit(&mut args);
                push(&mut args, "seed", seed);
                push(&mut args, "out", out.display());
                if let Some(t) = trace {
                    push(&mut args, "trace", t.display());
                }
            }
            Command::Project { data, model, out } => {
                args.push("project".into());
                data.emit(&mut args);
                push(&mut args, "model", model.display());
                push(&mut args, "out", out.display());
            }
            Command::Evaluate {
                data,
                method,
                dim,
                hyper,
                split,
                out,
            } => {
                args.push("evaluate".into());
                data.emit(&mut args);
                push(&mut args, "method", value_name(method));
                push(&mut args, "dim", dim);
                hyper.emit(&mut args);
                split.emit(&mut args);
                push(&mut args, "out", out.display());
            }
            Command::Compare {
                data,
                methods,
                dims,
                hyper,
                split,
                out,
            } => {
                args.push("compare".into());
                data.emit(&mut args);
                push(&mut args, "methods", join(methods, value_name));
                push(&mut args, "dims", join(dims, ToString::to_string));
                hyper.emit(&mut args);
                split.emit(&mut args);
                push(&mut args, "out", out.display());
            }
        }
        if self.quiet {
            args.push("--quiet".into());
        }
        for _ in 0..self.verbose {
            args.push("--verbose".into());
        }
        args
    }
}

fn method_config(
    method: MethodArg,
    dim: usize,
    hyper: &HyperArgs,
    seed: u64,
) -> Result<MethodConfig> {
    if dim < 1 {
        return Err(Error::InvalidConfig(format!(
            "d_prime must be >= 1 (got --dim {dim})"
        )));
    }
    if !(hyper.tol >= 0.0 && hyper.tol.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "--tol must be a finite nonnegative number, got {}",
            hyper.tol
        )));
    }
    Ok(match method {
        MethodArg::Nlp => MethodConfig::Nlp(TrainConfig {
            k: hyper.k,
            d_prime: dim,
            max_iters: hyper.max_iters,
            rel_tol: hyper.tol,
            eigen_order: match hyper.eigen_order {
                OrderArg::Smallest => EigenOrder::Smallest,
                OrderArg::Largest => EigenOrder::Largest,
            },
            init: match hyper.init {
                InitArg::Pca => InitKind::Pca,
                InitArg::Identity => InitKind::Identity,
            },
            seed,
            center: !hyper.no_center,
        }),
        MethodArg::Pca => MethodConfig::Baseline(BaselineConfig::pca(dim)),
        MethodArg::Lpp => MethodConfig::Baseline(BaselineConfig {
            method: BaselineMethod::Lpp,
            d_prime: dim,
            k: hyper.k,
            heat_sigma: hyper.sigma,
        }),
    })
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    match args.format {
        DataFormat::Csv => dataio::load_csv(&args.data, &args.label_col),
        DataFormat::PgmDir => dataio::load_pgm_dir(&args.data),
    }
}

/// `dir/stem.ext` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

/// One row per alternation, numbered from 1.
pub fn trace_csv(objective_trace: &[f64]) -> String {
    let mut out = String::from("iteration,objective\n");
    for (i, v) in objective_trace.iter().enumerate() {
        let _ = writeln!(out, "{},{v:?}", i + 1);
    }
    out
}

fn check_split(split: &SplitArgs) -> Result<()> {
    split.split_spec().validate()
}

/// Runs one parsed command. Results meant for the user go to `stdout`.
pub fn execute(spec: &RunSpec, stdout: &mut impl std::io::Write) -> Result<()> {
    let mut say = |line: String| {
        let _ = writeln!(stdout, "{line}");
    };
    match &spec.command {
        Command::Train {
            data,
            method,
            dim,
            hyper,
            seed,
            out,
            trace,
        } => {
            let config = method_config(*method, *dim, hyper, *seed)?;
            let ds = load_data(data)?;
            let model = eval::fit(&ds, &config)?;
            let trace_path = trace.clone().unwrap_or_else(|| sibling(out, ".trace.csv"));
            dataio::save_model(&model, out)?;
            write_atomic(&trace_path, trace_csv(&model.objective_trace).as_bytes())?;
            if !spec.quiet {
                say(format!(
                    "trained {} model: d = {}, d' = {}, {} iterations, converged = {}",
                    config.name(),
                    model.d(),
                    model.d_prime(),
                    model.iterations_run,
                    model.converged
                ));
            }
        }
        Command::Project { data, model, out } => {
            let model = dataio::load_model(model)?;
            let ds = load_data(data)?;
            let projected = model.project_samples(ds.samples())?;
            let result = Dataset::from_columns(projected, ds.labels().to_vec())?;
            dataio::save_csv(&result, out)?;
        }
        Command::Evaluate {
            data,
            method,
            dim,
            hyper,
            split,
            out,
        } => {
            let config = method_config(*method, *dim, hyper, split.seed)?;
            check_split(split)?;
            let ds = load_data(data)?;
            let report =
                eval::run_experiment(&ds, &config, &split.split_spec(), split.classifier())?;
            write_atomic(out, report.to_json().as_bytes())?;
            write_atomic(&sibling(out, ".csv"), report.to_csv().as_bytes())?;
            say(report.summary_line());
        }
        Command::Compare {
            data,
            methods,
            dims,
            hyper,
            split,
            out,
        } => {
            let mut distinct = methods.clone();
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(Error::InvalidConfig(
                    "compare needs at least 2 methods".into(),
                ));
            }
            if dims.is_empty() {
                return Err(Error::InvalidConfig(
                    "compare needs at least one --dims value".into(),
                ));
            }
            let configs = methods
                .iter()
                .map(|&m| {
                    dims.iter()
                        .map(|&d| method_config(m, d, hyper, split.seed))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            check_split(split)?;
            let ds = load_data(data)?;
            let spec_split = split.split_spec();

            let mut csv = String::from("method,d_prime,repeat,accuracy\n");
            let mut table: Vec<Vec<(f64, f64)>> = vec![Vec::new(); dims.len()];
            for row in &configs {
                for (di, config) in row.iter().enumerate() {
                    let report =
                        eval::run_experiment(&ds, config, &spec_split, split.classifier())?;
                    for (r, a) in report.per_repeat_accuracy.iter().enumerate() {
                        let _ = writeln!(csv, "{},{},{r},{a:?}", report.method, config.d_prime());
                    }
                    table[di].push((report.mean_accuracy, report.std_accuracy));
                    say(format!(
                        "{} d'={}: {}",
                        report.method,
                        config.d_prime(),
                        report.summary_line()
                    ));
                }
            }
            let mut dat = String::from("# d_prime");
            for m in methods {
                let name = value_name(m);
                let _ = write!(dat, " {name}_mean {name}_std");
            }
            dat.push('\n');
            for (di, d) in dims.iter().enumerate() {
                let _ = write!(dat, "{d}");
                for (mean, std) in &table[di] {
                    let _ = write!(dat, " {mean:.6} {std:.6}");
                }
                dat.push('\n');
            }
            write_atomic(out, csv.as_bytes())?;
            write_atomic(&sibling(out, ".dat"), dat.as_bytes())?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let spec = match RunSpec::try_parse_from(args) {
        Ok(s) => s,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = if spec.quiet {
        log::LevelFilter::Error
    } else {
        match spec.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let mut stdout = std::io::stdout().lock();
    match execute(&spec, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
