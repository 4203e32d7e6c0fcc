//! Residual–gradient attention: point-wise RBA weights, per-term GRA scalars
//! and the assembly of the weighted total loss.

use crate::autodiff::{Tape, Var};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RgaError {
    #[error("gradient statistics need at least one parameter")]
    EmptyGradient,
    #[error("invalid RGA configuration: {0}")]
    InvalidConfig(String),
}

/// Lower bound of the stored GRA scalars, so that `ln λ ≥ 1`.
pub fn gra_floor(eps: f64) -> f64 {
    std::f64::consts::E + eps
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RgaConfig {
    /// When false all point weights are fixed at 1 and the term factors are
    /// the static scales only.
    pub enabled: bool,
    pub eta: f64,
    pub beta_w: f64,
    pub eps: f64,
    pub lambda_r: f64,
    pub lambda_d: f64,
    pub use_log: bool,
    pub gra_stride: usize,
    pub rba_init: f64,
    pub gra_init: f64,
}

impl Default for RgaConfig {
    fn default() -> Self {
        RgaConfig {
            enabled: true,
            eta: 0.001,
            beta_w: 0.001,
            eps: 1e-8,
            lambda_r: 1.0,
            lambda_d: 1.0,
            use_log: true,
            gra_stride: 1,
            rba_init: 0.0,
            gra_init: 1.0,
        }
    }
}

impl RgaConfig {
    pub fn validate(&self) -> Result<(), RgaError> {
        if !self.enabled {
            return Ok(());
        }
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.eta) {
            return Err(RgaError::InvalidConfig(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !unit(self.beta_w) {
            return Err(RgaError::InvalidConfig(format!("beta_w must lie in (0, 1], got {}", self.beta_w)));
        }
        if !(self.eps > 0.0) {
            return Err(RgaError::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if self.gra_stride == 0 {
            return Err(RgaError::InvalidConfig("gra_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// `w ← (1−η) w + η |ρ| / max|ρ|`, skipped when every residual is zero.
pub fn rba_update(weights: &mut [f64], abs_residuals: &[f64], eta: f64) {
    assert_eq!(weights.len(), abs_residuals.len(), "RBA weight and residual counts differ");
    let max = abs_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if max == 0.0 {
        return;
    }
    for (w, r) in weights.iter_mut().zip(abs_residuals) {
        *w = (1.0 - eta) * *w + eta * r.abs() / max;
    }
}

/// Largest and mean absolute gradient entry.
pub fn grad_stats(g: &[f64]) -> Result<(f64, f64), RgaError> {
    if g.is_empty() {
        return Err(RgaError::EmptyGradient);
    }
    let (max, sum) = g.iter().fold((0.0f64, 0.0), |(m, s), v| (m.max(v.abs()), s + v.abs()));
    Ok((max, sum / g.len() as f64))
}

/// One GRA step: `λ̂ = G_r_max / (ε + Ḡ)`, EMA with rate `β_w`, then clamp at `e + ε`.
pub fn gra_update(lambda: f64, g_r_max: f64, g_term_mean: f64, beta_w: f64, eps: f64) -> f64 {
    let target = g_r_max / (eps + g_term_mean);
    let ema = (1.0 - beta_w) * lambda + beta_w * target;
    ema.max(gra_floor(eps))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbaWeights {
    pub weights: Vec<Vec<f64>>,
    pub eta: f64,
}

impl RbaWeights {
    pub fn new(sizes: &[usize], init: f64, eta: f64) -> Self {
        RbaWeights { weights: sizes.iter().map(|&n| vec![init; n]).collect(), eta }
    }

    pub fn update(&mut self, term: usize, abs_residuals: &[f64]) {
        rba_update(&mut self.weights[term], abs_residuals, self.eta);
    }

    pub fn mean(&self, term: usize) -> f64 {
        let w = &self.weights[term];
        w.iter().sum::<f64>() / w.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraState {
    /// One scalar per data term.
    pub lambdas: Vec<f64>,
    pub beta_w: f64,
    pub eps: f64,
}

impl GraState {
    pub fn new(data_terms: usize, init: f64, beta_w: f64, eps: f64) -> Self {
        GraState { lambdas: vec![init; data_terms], beta_w, eps }
    }

    pub fn floor(&self) -> f64 {
        gra_floor(self.eps)
    }

    pub fn update(&mut self, term: usize, g_r_max: f64, g_term_mean: f64) {
        self.lambdas[term] = gra_update(self.lambdas[term], g_r_max, g_term_mean, self.beta_w, self.eps);
    }
}

/// Weights and scalars for a problem with one residual term (index 0)
/// followed by its data terms.
#[derive(Clone, Debug, PartialEq)]
pub struct RgaState {
    pub config: RgaConfig,
    pub rba: RbaWeights,
    pub gra: GraState,
}

impl RgaState {
    /// `sizes[0]` is the residual point count, the rest the data terms.
    pub fn new(config: RgaConfig, sizes: &[usize]) -> Result<Self, RgaError> {
        config.validate()?;
        let init = if config.enabled { config.rba_init } else { 1.0 };
        let rba = RbaWeights::new(sizes, init, config.eta);
        let data_terms = sizes.len().saturating_sub(1);
        let gra_init = if config.enabled { config.gra_init } else { gra_floor(config.eps) };
        let gra = GraState::new(data_terms, gra_init, config.beta_w, config.eps);
        Ok(RgaState { config, rba, gra })
    }

    pub fn term_count(&self) -> usize {
        self.rba.weights.len()
    }

    pub fn weights(&self, term: usize) -> &[f64] {
        &self.rba.weights[term]
    }

    pub fn update_rba(&mut self, term: usize, abs_residuals: &[f64]) {
        if self.config.enabled {
            self.rba.update(term, abs_residuals);
        }
    }

    /// GRA update of every data term from per-term gradients. `step` selects
    /// whether this iteration falls on the configured stride.
    pub fn update_gra(&mut self, step: usize, residual_grad: &[f64], term_grads: &[&[f64]]) -> Result<(), RgaError> {
        if !self.config.enabled || step % self.config.gra_stride != 0 {
            return Ok(());
        }
        let (g_r_max, _) = grad_stats(residual_grad)?;
        for (k, g) in term_grads.iter().enumerate() {
            let (_, mean) = grad_stats(g)?;
            self.gra.update(k, g_r_max, mean);
        }
        Ok(())
    }

    /// Multiplier of term `term` in the total loss.
    pub fn factor(&self, term: usize) -> f64 {
        if term == 0 {
            return self.config.lambda_r;
        }
        if !self.config.enabled {
            return self.config.lambda_d;
        }
        let lambda = self.gra.lambdas[term - 1];
        let scale = if self.config.use_log { lambda.ln() } else { lambda };
        self.config.lambda_d * scale
    }
}

/// `(1/N) Σ_j w_j ρ_j²` with the weights as constants.
pub fn weighted_mse(tape: &mut Tape, residuals: &[Var], weights: &[f64]) -> Var {
    assert_eq!(residuals.len(), weights.len(), "residual and weight counts differ");
    assert!(!residuals.is_empty(), "a loss term needs at least one point");
    let n = residuals.len() as f64;
    let terms: Vec<(f64, Var)> = residuals
        .iter()
        .zip(weights)
        .map(|(&r, &w)| (w / n, tape.square(r)))
        .collect();
    tape.linear_combination(&terms, 0.0)
}

/// Total weighted loss on a single tape; `residuals[0]` is the PDE residual.
pub fn rga_total_loss(tape: &mut Tape, residuals: &[Vec<Var>], state: &RgaState) -> Var {
    let terms: Vec<(f64, Var)> = residuals
        .iter()
        .enumerate()
        .map(|(k, r)| (state.factor(k), weighted_mse(tape, r, state.weights(k))))
        .collect();
    tape.linear_combination(&terms, 0.0)
}
