//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed check or I/O error, 2 usage or
//! configuration error, 3 numerical abort.

use crate::model::{Model, Network};
use crate::output::write_atomic;
use crate::pde::{PdeProblem, ProblemName};
use crate::rankdiag::{rank_scan, RankError, DEFAULT_RANK_EPS};
use crate::train::{checkpoint_load, checkpoint_save, gradcheck, metrics_eval, TrainConfig, TrainError, Trainer};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const OUT_DIR_ENV: &str = "ACKAN_OUT_DIR";
pub const GRADCHECK_PARAM_TOL: f64 = 1e-5;
pub const GRADCHECK_JET_TOL: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "acpkan", version, about = "Chebyshev KAN physics-informed networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a PDE benchmark and write metrics CSV and checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint against the problem's reference solution.
    Eval(EvalArgs),
    /// Jacobian rank scan over random pure Chebyshev KAN stacks.
    RankScan(RankScanArgs),
    /// Fit the 1D test function with the small AC-PKAN.
    FitFunction(TrainArgs),
    /// Finite-difference check of loss gradients and input derivatives.
    Gradcheck(TrainArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// reaction, wave, cdr, poisson-het, poisson-geom or fit
    #[arg(long)]
    pub problem: Option<String>,
    /// acpkan or mlp
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with training settings; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (falls back to $ACKAN_OUT_DIR, then `.`)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Static unit weights instead of residual–gradient attention
    #[arg(long)]
    pub no_rga: bool,
    /// Use raw GRA scalars instead of their logarithm
    #[arg(long)]
    pub no_log: bool,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub beta_w: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub gra_stride: Option<usize>,
    /// Hidden width of the Chebyshev blocks
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Checkpoint to evaluate (defaults to the one `train` writes)
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RankScanArgs {
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 8)]
    pub degree: usize,
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Relative singular-value threshold
    #[arg(long = "eps-rank", alias = "eps", default_value_t = DEFAULT_RANK_EPS)]
    pub eps_rank: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            TrainError::Io(_) => CliError::Failed(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::InvalidConfig(_) | RankError::Dimension { .. } | RankError::EmptyStack => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl TrainArgs {
    /// Config file (if any) overlaid with command-line flags.
    pub fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                TrainConfig::from_toml(&text)?
            }
            None => TrainConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = p.clone();
        }
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if self.epochs.is_some() {
            cfg.epochs = self.epochs;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.no_rga {
            cfg.rga.enabled = false;
        }
        if self.no_log {
            cfg.rga.use_log = false;
        }
        if let Some(v) = self.eta {
            cfg.rga.eta = v;
        }
        if let Some(v) = self.beta_w {
            cfg.rga.beta_w = v;
        }
        if let Some(v) = self.eps {
            cfg.rga.eps = v;
        }
        if let Some(v) = self.gra_stride {
            cfg.rga.gra_stride = v;
        }
        if self.width.is_some() {
            cfg.d_hidden = self.width;
        }
        if self.degree.is_some() {
            cfg.degree = self.degree;
        }
        if self.depth.is_some() {
            cfg.depth = self.depth;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

pub fn metrics_path(dir: &Path, cfg: &TrainConfig) -> PathBuf {
    dir.join(format!("{}_{}_metrics.csv", cfg.problem, cfg.model))
}

pub fn checkpoint_path(dir: &Path, cfg: &TrainConfig) -> PathBuf {
    match &cfg.checkpoint {
        Some(p) => PathBuf::from(p),
        None => dir.join(format!("{}_{}.ckpt", cfg.problem, cfg.model)),
    }
}

fn format_metrics(rmae: f64, rrmse: f64) -> String {
    format!("rmae={rmae} rrmse={rrmse}")
}

fn run_training(cfg: TrainConfig, out_flag: Option<&Path>) -> Result<(), CliError> {
    let dir = out_dir(out_flag);
    ensure_dir(&dir)?;
    let epochs = cfg.epochs()?;
    let mut trainer = Trainer::new(cfg.clone())?;
    let log = trainer.run(epochs, |_| {})?;
    let csv_path = metrics_path(&dir, &cfg);
    write_file(&csv_path, &log.csv)?;
    if let Some(e) = log.error {
        return Err(e.into());
    }
    checkpoint_save(&trainer.model, &checkpoint_path(&dir, &cfg))?;
    match log.final_metrics() {
        Some(m) => println!("{}", format_metrics(m.rmae, m.rrmse)),
        None => println!("loss={}", log.rows.last().map_or(f64::NAN, |r| r.loss_total)),
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    run_training(args.resolve()?, args.out_dir.as_deref())
}

fn cmd_fit_function(args: &TrainArgs) -> Result<(), CliError> {
    if args.problem.as_deref().is_some_and(|p| p != ProblemName::Fit.as_str()) {
        return Err(CliError::Usage("fit-function always uses the `fit` problem".into()));
    }
    let mut args = args.clone();
    args.problem = Some(ProblemName::Fit.as_str().into());
    run_training(args.resolve()?, args.out_dir.as_deref())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let cfg = args.train.resolve()?;
    let dir = out_dir(args.train.out_dir.as_deref());
    let path = args.checkpoint.clone().unwrap_or_else(|| checkpoint_path(&dir, &cfg));
    let model: Model = checkpoint_load(&path)?;
    let problem = PdeProblem::build(cfg.problem_name()?, cfg.resolution()?, cfg.seed).map_err(TrainError::from)?;
    if model.d_in() != problem.dim() {
        return Err(CliError::Usage(format!(
            "checkpoint takes {} inputs but `{}` has {}",
            model.d_in(),
            problem.name,
            problem.dim()
        )));
    }
    let reference = problem.reference.as_ref().ok_or_else(|| TrainError::NoOracle(problem.name.to_string()))?;
    let m = metrics_eval(&model, reference)?;
    println!("{}", format_metrics(m.rmae, m.rrmse));
    Ok(())
}

fn cmd_rank_scan(args: &RankScanArgs) -> Result<(), CliError> {
    if !(args.eps_rank > 0.0 && args.eps_rank < 1.0) {
        return Err(CliError::Usage("--eps-rank must lie in (0, 1)".into()));
    }
    let report = rank_scan(args.width, args.degree, args.depth, args.trials, args.eps_rank, args.seed)?;
    let dir = out_dir(args.out_dir.as_deref());
    ensure_dir(&dir)?;
    write_file(&dir.join("rank_scan.csv"), &report.to_csv())?;
    for d in 1..=report.max_depth() {
        println!("depth={d} median_rank={}", report.median_rank(d).unwrap_or(0));
    }
    Ok(())
}

fn cmd_gradcheck(args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = args.resolve()?;
    if cfg.grid.is_none() {
        cfg.grid = Some(3);
    }
    let report = gradcheck(&cfg, 400, 5)?;
    println!(
        "param_max_rel={:e} jet_max_rel={:e} params={} points={}",
        report.param_max_rel, report.jet_max_rel, report.params_checked, report.points_checked
    );
    if report.param_max_rel < GRADCHECK_PARAM_TOL && report.jet_max_rel < GRADCHECK_JET_TOL {
        Ok(())
    } else {
        Err(CliError::Failed("gradient check exceeded tolerance".into()))
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::RankScan(a) => cmd_rank_scan(a),
        Command::FitFunction(a) => cmd_fit_function(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("acpkan").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_defaults() {
        let Command::Train(a) = parse(&["train", "--problem", "wave", "--no-log", "--eta", "0.01", "--width", "8"]).command
        else {
            panic!("expected train");
        };
        let cfg = a.resolve().unwrap();
        assert_eq!(cfg.problem, "wave");
        assert!(cfg.rga.enabled && !cfg.rga.use_log);
        assert_eq!(cfg.rga.eta, 0.01);
        assert_eq!(cfg.d_hidden, Some(8));
    }

    #[test]
    fn no_rga_only_disables_attention() {
        let Command::Train(a) = parse(&["train", "--no-rga"]).command else { panic!() };
        let cfg = a.resolve().unwrap();
        assert!(!cfg.rga.enabled && cfg.rga.use_log);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let Command::Train(a) = parse(&["train", "--problem", "heat"]).command else { panic!() };
        assert_eq!(a.resolve().unwrap_err().exit_code(), 2);
        assert!(Cli::try_parse_from(["acpkan", "train", "--bogus"]).is_err());
        assert_eq!(main_with_args(["acpkan", "train", "--bogus"]), 2);
    }

    #[test]
    fn rank_scan_accepts_eps_alias() {
        let Command::RankScan(a) = parse(&["rank-scan", "--eps", "1e-4"]).command else { panic!() };
        assert_eq!(a.eps_rank, 1e-4);
        assert_eq!((a.width, a.degree, a.depth, a.trials), (16, 8, 20, 50));
    }
}
