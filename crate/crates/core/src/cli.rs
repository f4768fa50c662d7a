//! The `cofe` command-line front-end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{run_experiment, Dataset, ExperimentConfig, DEFAULT_REPETITIONS, DEFAULT_SMOKERS_DOMAIN};
use crate::inference::{parse_query, query};
use crate::mln::{
    canonical_mln, cofe_with, mln_joint, mln_to_model, parse_mln, serialize_mln, CofeOptions, StrategyChoice,
};
use crate::model::{parse_model, serialize_model, Assignment, DEFAULT_ENUMERATION_CAP};
use crate::reduction::ReductionParams;

#[derive(Debug, Parser)]
#[command(
    name = "cofe",
    version,
    about = "Extract compact weighted formulas from parfactor models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce, extract and minimize a model into an `.mln` file.
    Extract(ExtractArgs),
    /// Run the noise-robustness experiment.
    Eval(EvalArgs),
    /// Answer `prv(c1,..)=v [| ev(..)=v, ...]` on a model or `.mln` file.
    Query(QueryArgs),
    /// Canonical conversion between the model and `.mln` formats.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Quantile,
    Cluster,
    None,
}

impl From<StrategyArg> for StrategyChoice {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Auto => StrategyChoice::Auto,
            StrategyArg::Quantile => StrategyChoice::Quantile,
            StrategyArg::Cluster => StrategyChoice::Cluster,
            StrategyArg::None => StrategyChoice::None,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Model file.
    pub input: PathBuf,
    /// Output `.mln` path; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Hellinger budget per parfactor.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// DBSCAN radius.
    #[arg(long, default_value_t = 0.1)]
    pub theta_d: f64,
    /// DBSCAN core threshold, counting the point itself.
    #[arg(long, default_value_t = 1)]
    pub theta_n: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    pub strategy: StrategyArg,
    /// Omit weight-0 formulas (the distribution is unchanged).
    #[arg(long)]
    pub drop_zero_weights: bool,
    /// Also write the reduced parfactor model here.
    #[arg(long)]
    pub reduced_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DatasetArg {
    Smokers,
    Artificial,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// smokers1, smokers2, art1 or art2; explicit flags override its values.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetArg>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub theta_d: Option<f64>,
    #[arg(long)]
    pub theta_n: Option<usize>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long, env = "COFE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    pub reps: usize,
    /// Persons in the smokers domain.
    #[arg(long, default_value_t = DEFAULT_SMOKERS_DOMAIN)]
    pub domain_size: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    /// Print the per-parfactor median distance table instead.
    #[arg(long)]
    pub fig3: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Model file, or an `.mln` file (answered by enumeration).
    pub input: PathBuf,
    pub query: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ConvertFormat {
    Mln,
    Model,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    /// Target format; defaults to the other one.
    #[arg(long, value_enum)]
    pub to: Option<ConvertFormat>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } => 2,
        Error::Validation(_) => 3,
        Error::ZeroEvidence => 4,
        Error::TooLarge { .. } | Error::Io(_) => 1,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn is_mln(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "mln")
}

/// Runs a parsed command. Results go to `stdout`, summaries to `stderr`.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Extract(a) => extract(a, stdout, stderr),
        Command::Eval(a) => eval(a, stdout),
        Command::Query(a) => run_query(a, stdout),
        Command::Convert(a) => convert(a, stdout),
    }
}

fn extract(a: ExtractArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let params = ReductionParams::new(a.epsilon, a.theta_d, a.theta_n)?;
    let model = parse_model(&read(&a.input)?)?;
    let opts = CofeOptions {
        strategy: a.strategy.into(),
        drop_zero_weights: a.drop_zero_weights,
    };
    let out = cofe_with(&model, &params, &opts)?;
    writeln!(
        stderr,
        "parfactor\tstrategy\tdistinct_before\tdistinct_after\tdistance\tformulas"
    )?;
    for p in &out.parfactors {
        writeln!(
            stderr,
            "{}\t{}\t{}\t{}\t{:.6}\t{}{}",
            p.name,
            p.reduction.strategy,
            p.distinct_before,
            p.distinct_after,
            p.reduction.distance,
            p.formula_lengths.len(),
            if p.minimal { "" } else { " (greedy cover)" }
        )?;
    }
    if let Some(path) = &a.reduced_model {
        emit(Some(path), &serialize_model(&out.reduced_model(&model)?), stdout)?;
    }
    emit(a.output.as_deref(), &serialize_mln(&out.mln), stdout)
}

fn eval(a: EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = match &a.preset {
        Some(p) => ExperimentConfig::preset(p)?,
        None => {
            let mut c = ExperimentConfig::preset("smokers1")?;
            c.name = "custom".into();
            c
        }
    };
    if let Some(d) = a.dataset {
        cfg.dataset = match d {
            DatasetArg::Smokers => Dataset::Smokers,
            DatasetArg::Artificial => Dataset::Artificial,
        };
    }
    if let Some(s) = a.sigma {
        cfg.sigma = s;
    }
    if let Some(e) = a.epsilon {
        cfg.params.epsilon = e;
    }
    if let Some(d) = a.theta_d {
        cfg.params.theta_d = d;
    }
    if let Some(n) = a.theta_n {
        cfg.params.theta_n = n;
    }
    if let Some(s) = a.strategy {
        cfg.strategy = s.into();
    }
    cfg.seed = a.seed;
    cfg.repetitions = a.reps;
    cfg.smokers_domain_size = a.domain_size;
    let report = run_experiment(&cfg)?;
    let text = if a.fig3 {
        report.fig3_table()
    } else {
        match a.format {
            ReportFormat::Json => report.to_json() + "\n",
            ReportFormat::Csv => report.to_csv()?,
        }
    };
    emit(a.output.as_deref(), &text, stdout)
}

fn run_query(a: QueryArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = read(&a.input)?;
    let p = if is_mln(&a.input) {
        let mln = parse_mln(&text)?;
        let q = parse_query(&a.query, mln.logvars(), mln.predicates())?;
        let joint = mln_joint(&mln, DEFAULT_ENUMERATION_CAP)?;
        let event = Assignment::from([q.target.clone()]);
        joint.conditional(&event, &q.evidence)?
    } else {
        let model = parse_model(&text)?;
        let q = parse_query(&a.query, model.logvars(), model.prvs())?;
        query(&model, &q)?
    };
    writeln!(stdout, "{p:.6}")?;
    Ok(())
}

fn convert(a: ConvertArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = read(&a.input)?;
    let from_mln = is_mln(&a.input);
    let to = a.to.unwrap_or(if from_mln {
        ConvertFormat::Model
    } else {
        ConvertFormat::Mln
    });
    let out = match (from_mln, to) {
        (false, ConvertFormat::Mln) => serialize_mln(&canonical_mln(&parse_model(&text)?)?),
        (false, ConvertFormat::Model) => serialize_model(&parse_model(&text)?),
        (true, ConvertFormat::Model) => serialize_model(&mln_to_model(&parse_mln(&text)?)?),
        (true, ConvertFormat::Mln) => serialize_mln(&parse_mln(&text)?),
    };
    emit(a.output.as_deref(), &out, stdout)
}
