//! Full-batch training with AdamW and residual–gradient attention,
//! relative-error metrics, CSV logs and checkpoints.

mod adamw;
mod checkpoint;
mod gradcheck;

pub use adamw::AdamW;
pub use checkpoint::{checkpoint_from_str, checkpoint_load, checkpoint_save, checkpoint_to_string, CHECKPOINT_HEADER};
pub use gradcheck::{gradcheck, GradcheckReport};

use crate::autodiff::{Tape, Var};
use crate::model::{AcPkanConfig, AcPkanModel, MlpPinn, Model, ModelError, Network};
use crate::pde::{PdeError, PdeProblem, ProblemName, Reference, Resolution};
use crate::rga::{rga_total_loss, weighted_mse, RgaConfig, RgaError, RgaState};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("non-finite loss in term `{term}` at step {step}")]
    NonFinite { term: String, step: usize },
    #[error("reference solution is identically zero")]
    ZeroReference,
    #[error("problem `{0}` has no reference solution")]
    NoOracle(String),
    #[error("unknown model `{0}` (expected acpkan or mlp)")]
    UnknownModel(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Rga(#[from] RgaError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    AcPkan,
    Mlp,
}

impl FromStr for ModelKind {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "acpkan" => Ok(ModelKind::AcPkan),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(TrainError::UnknownModel(other.to_string())),
        }
    }
}

/// Training settings. Unset model sizes and budgets fall back to per-problem
/// desk defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub problem: String,
    pub model: String,
    pub d_model: Option<usize>,
    pub d_hidden: Option<usize>,
    pub depth: Option<usize>,
    pub degree: Option<usize>,
    pub mlp_hidden: Vec<usize>,
    pub epochs: Option<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub log_stride: usize,
    pub grid: Option<usize>,
    pub eval_grid: usize,
    pub circle_samples: usize,
    pub rga: RgaConfig,
    pub checkpoint: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            problem: "reaction".into(),
            model: "acpkan".into(),
            d_model: None,
            d_hidden: None,
            depth: None,
            degree: None,
            mlp_hidden: vec![48, 48, 48],
            epochs: None,
            lr: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            log_stride: 100,
            grid: None,
            eval_grid: 101,
            circle_samples: 64,
            rga: RgaConfig::default(),
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }

    pub fn problem_name(&self) -> Result<ProblemName, TrainError> {
        Ok(self.problem.parse()?)
    }

    pub fn model_kind(&self) -> Result<ModelKind, TrainError> {
        self.model.parse()
    }

    pub fn epochs(&self) -> Result<usize, TrainError> {
        let problem = self.problem_name()?;
        Ok(self.epochs.unwrap_or(if problem == ProblemName::Fit { 10_000 } else { 3_000 }))
    }

    pub fn resolution(&self) -> Result<Resolution, TrainError> {
        let grid = match self.grid {
            Some(g) => g,
            None => match self.problem_name()? {
                ProblemName::PoissonGeom => 21,
                _ => 11,
            },
        };
        Ok(Resolution { grid, eval_grid: self.eval_grid, circle_samples: self.circle_samples })
    }

    pub fn acpkan_config(&self, d_in: usize) -> AcPkanConfig {
        let fit = d_in == 1;
        AcPkanConfig {
            d_in,
            d_model: self.d_model.unwrap_or(if fit { 4 } else { 16 }),
            d_hidden: self.d_hidden.unwrap_or(if fit { 6 } else { 32 }),
            d_out: 1,
            depth: self.depth.unwrap_or(2),
            degree: self.degree.unwrap_or(8),
        }
    }

    /// RGA settings actually used; fitting always trains on the plain MSE.
    pub fn effective_rga(&self) -> Result<RgaConfig, TrainError> {
        let mut rga = self.rga.clone();
        if self.problem_name()? == ProblemName::Fit {
            rga.enabled = false;
        }
        Ok(rga)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.problem_name()?;
        self.model_kind()?;
        if self.epochs()? < 1 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.log_stride == 0 {
            return Err(TrainError::InvalidConfig("log_stride must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(TrainError::InvalidConfig("lr must be positive and weight_decay non-negative".into()));
        }
        self.effective_rga()?.validate()?;
        Ok(())
    }

    /// Freshly initialized model for a problem with `d_in` inputs.
    pub fn build_model(&self, d_in: usize) -> Result<Model, TrainError> {
        let mut model = match self.model_kind()? {
            ModelKind::AcPkan => Model::AcPkan(AcPkanModel::new(self.acpkan_config(d_in))?),
            ModelKind::Mlp => {
                let mut sizes = vec![d_in];
                sizes.extend(&self.mlp_hidden);
                sizes.push(1);
                Model::Mlp(MlpPinn::new(&sizes)?)
            }
        };
        model.init(&mut Rng::new(self.seed));
        Ok(model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub rmae: f64,
    pub rrmse: f64,
}

/// `rMAE = Σ|û−u| / Σ|u|`, `rRMSE = sqrt(Σ|û−u|² / Σ|u|²)`.
pub fn relative_errors(pred: &[f64], reference: &[f64]) -> Result<Metrics, TrainError> {
    assert_eq!(pred.len(), reference.len(), "prediction and reference lengths differ");
    let (mut abs, mut sq, mut ref_abs, mut ref_sq) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &u) in pred.iter().zip(reference) {
        abs += (p - u).abs();
        sq += (p - u) * (p - u);
        ref_abs += u.abs();
        ref_sq += u * u;
    }
    if ref_abs == 0.0 {
        return Err(TrainError::ZeroReference);
    }
    Ok(Metrics { rmae: abs / ref_abs, rrmse: (sq / ref_sq).sqrt() })
}

pub fn metrics_eval(net: &dyn Network, reference: &Reference) -> Result<Metrics, TrainError> {
    let pred: Vec<f64> = reference.points.iter().map(|p| net.eval(p)[0]).collect();
    relative_errors(&pred, &reference.values)
}

/// Scalars logged for one optimization step. Losses are measured before the
/// update, metrics after it.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss_total: f64,
    pub term_losses: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub rba_means: Vec<f64>,
    pub metrics: Option<Metrics>,
}

/// Per-term losses (RBA-weighted, GRA-unweighted) and their parameter gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct TermGradients {
    pub losses: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub problem: PdeProblem,
    pub model: Model,
    pub rga: RgaState,
    pub adam: AdamW,
    pub step: usize,
    tape: Tape,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let problem = PdeProblem::build(config.problem_name()?, config.resolution()?, config.seed)?;
        let model = config.build_model(problem.dim())?;
        Trainer::with_model(config, problem, model)
    }

    pub fn with_model(config: TrainConfig, problem: PdeProblem, model: Model) -> Result<Self, TrainError> {
        config.validate()?;
        if model.d_in() != problem.dim() || model.d_out() != 1 {
            return Err(TrainError::InvalidConfig(format!(
                "model maps {} → {} but problem `{}` needs {} → 1",
                model.d_in(),
                model.d_out(),
                problem.name,
                problem.dim()
            )));
        }
        let rga = RgaState::new(config.effective_rga()?, &problem.term_sizes())?;
        let adam = AdamW::new(model.param_count(), config.lr, config.weight_decay);
        Ok(Trainer { config, problem, model, rga, adam, step: 0, tape: Tape::new() })
    }

    /// Pointwise residuals of one term on a fresh tape.
    pub fn term_residuals(&mut self, term: usize) -> Result<(Vec<Var>, Vec<f64>), TrainError> {
        self.tape.clear();
        let base = self.model.register(&mut self.tape);
        let mut vars = Vec::with_capacity(self.problem.terms[term].len());
        for c in &self.problem.terms[term].constraints {
            let r = self.problem.constraint_residual(&self.model, &mut self.tape, base, c);
            vars.push(r.map_err(|e| self.non_finite_or(e, term))?);
        }
        let abs = vars.iter().map(|&v| self.tape.value(v).abs()).collect();
        Ok((vars, abs))
    }

    /// Domain errors inside the network only arise from non-finite values.
    fn non_finite_or(&self, e: PdeError, term: usize) -> TrainError {
        match e {
            PdeError::Model(ModelError::Autodiff(crate::autodiff::AutodiffError::Domain { .. })) => {
                TrainError::NonFinite { term: self.problem.terms[term].name.clone(), step: self.step }
            }
            other => other.into(),
        }
    }

    /// RBA update followed by per-term loss and gradient for every term.
    pub fn term_gradients(&mut self) -> Result<TermGradients, TrainError> {
        let n = self.problem.terms.len();
        let mut losses = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for k in 0..n {
            let (vars, abs) = self.term_residuals(k)?;
            self.rga.update_rba(k, &abs);
            let loss = weighted_mse(&mut self.tape, &vars, self.rga.weights(k));
            let value = self.tape.value(loss);
            if !value.is_finite() {
                return Err(TrainError::NonFinite { term: self.problem.terms[k].name.clone(), step: self.step });
            }
            losses.push(value);
            grads.push(self.tape.backward(loss).into_vec());
        }
        Ok(TermGradients { losses, grads })
    }

    pub fn train_step(&mut self) -> Result<StepRecord, TrainError> {
        let TermGradients { losses, grads } = self.term_gradients()?;
        let data: Vec<&[f64]> = grads[1..].iter().map(Vec::as_slice).collect();
        self.rga.update_gra(self.step, &grads[0], &data)?;

        let mut total = vec![0.0; self.model.param_count()];
        let mut loss_total = 0.0;
        for (k, (g, &l)) in grads.iter().zip(&losses).enumerate() {
            let f = self.rga.factor(k);
            loss_total += f * l;
            for (t, &gi) in total.iter_mut().zip(g) {
                *t += f * gi;
            }
        }
        if !loss_total.is_finite() || total.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::NonFinite { term: "total".into(), step: self.step });
        }
        self.adam.step(self.model.params_mut().values_mut(), &total);
        let record = StepRecord {
            step: self.step,
            loss_total,
            term_losses: losses,
            lambdas: self.rga.gra.lambdas.clone(),
            rba_means: (0..self.rga.term_count()).map(|k| self.rga.rba.mean(k)).collect(),
            metrics: None,
        };
        self.step += 1;
        Ok(record)
    }

    pub fn metrics(&self) -> Result<Metrics, TrainError> {
        let reference = self
            .problem
            .reference
            .as_ref()
            .ok_or_else(|| TrainError::NoOracle(self.problem.name.to_string()))?;
        metrics_eval(&self.model, reference)
    }

    /// Total weighted loss at the current parameters and RGA state, on one tape.
    pub fn total_loss(&mut self) -> Result<f64, TrainError> {
        self.tape.clear();
        let base = self.model.register(&mut self.tape);
        let mut residuals = Vec::with_capacity(self.problem.terms.len());
        for term in &self.problem.terms {
            let mut vars = Vec::with_capacity(term.len());
            for c in &term.constraints {
                vars.push(self.problem.constraint_residual(&self.model, &mut self.tape, base, c)?);
            }
            residuals.push(vars);
        }
        let loss = rga_total_loss(&mut self.tape, &residuals, &self.rga);
        Ok(self.tape.value(loss))
    }

    /// Runs `epochs` steps. Metrics are attached every `log_stride` steps and
    /// on the final step when the problem has a reference.
    pub fn run(&mut self, epochs: usize, mut on_step: impl FnMut(&StepRecord)) -> Result<TrainLog, TrainError> {
        let mut log = TrainLog::new(&self.problem);
        let has_reference = self.problem.reference.is_some();
        for i in 0..epochs {
            let mut record = match self.train_step() {
                Ok(r) => r,
                Err(e) => {
                    log.error = Some(e.clone());
                    return Ok(log);
                }
            };
            if has_reference && ((record.step + 1) % self.config.log_stride == 0 || i + 1 == epochs || record.step == 0) {
                record.metrics = Some(self.metrics()?);
            }
            on_step(&record);
            log.push(record);
        }
        Ok(log)
    }
}

/// Accumulated per-step records in CSV form.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    pub header: String,
    pub rows: Vec<StepRecord>,
    pub csv: String,
    /// Set when training stopped early on a numerical failure.
    pub error: Option<TrainError>,
}

impl TrainLog {
    fn new(problem: &PdeProblem) -> Self {
        let names = problem.term_names();
        let mut cols = vec!["step".to_string(), "loss_total".to_string()];
        cols.extend(names.iter().map(|n| format!("loss_{n}")));
        cols.extend(names[1..].iter().map(|n| format!("lambda_gra_{n}")));
        cols.extend(names.iter().map(|n| format!("rba_mean_{n}")));
        cols.push("rmae".into());
        cols.push("rrmse".into());
        let header = cols.join(",");
        let csv = format!("{header}\n");
        TrainLog { header, rows: Vec::new(), csv, error: None }
    }

    fn push(&mut self, r: StepRecord) {
        let _ = write!(self.csv, "{},{}", r.step, r.loss_total);
        for v in r.term_losses.iter().chain(&r.lambdas).chain(&r.rba_means) {
            let _ = write!(self.csv, ",{v}");
        }
        match r.metrics {
            Some(m) => {
                let _ = write!(self.csv, ",{},{}", m.rmae, m.rrmse);
            }
            None => self.csv.push_str(",,"),
        }
        self.csv.push('\n');
        self.rows.push(r);
    }

    pub fn final_metrics(&self) -> Option<Metrics> {
        self.rows.last().and_then(|r| r.metrics)
    }
}
