//! Jacobian rank diagnostics for Chebyshev KAN stacks and AC-PKAN models.
//!
//! A pure stack applies `x_{l+1} = Cheby_l(x_l)` with no attention or
//! normalisation. Its input Jacobian is the product
//! `J_total = J_{L−1} ⋯ J_0` with
//! `J_l[k,i] = Σ_n C_l[k,i,n] T_n′(tanh x_{l,i}) (1 − tanh² x_{l,i})`.

mod linalg;

pub use linalg::{numerical_rank, spectral_norm_power, svd, symmetric_eigenvalues, DenseMatrix, SVD_MAX_SWEEPS, SVD_TOLERANCE};

use crate::autodiff::{Jet, JetOrder, Tape, Var};
use crate::model::{AcPkanModel, Cheby1KanLayer, ModelError, Network, ParamStore};
use crate::rng::Rng;
use std::fmt::Write as _;
use thiserror::Error;

pub const DEFAULT_RANK_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("layer stack is empty")]
    EmptyStack,
    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("invalid rank scan: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Chain of Chebyshev KAN layers sharing one parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyStack {
    pub layers: Vec<Cheby1KanLayer>,
    pub params: ParamStore,
}

impl ChebyStack {
    /// Zero-valued stack with layer widths `dims[0] → dims[1] → …`.
    pub fn new(dims: &[usize], degree: usize) -> Result<Self, RankError> {
        if dims.len() < 2 {
            return Err(RankError::EmptyStack);
        }
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, w) in dims.windows(2).enumerate() {
            layers.push(Cheby1KanLayer::new(&mut params, &format!("cheby.{l}"), w[0], w[1], degree)?);
        }
        Ok(ChebyStack { layers, params })
    }

    /// Stack with independent standard-normal coefficients.
    pub fn random(dims: &[usize], degree: usize, rng: &mut Rng) -> Result<Self, RankError> {
        let mut stack = Self::new(dims, degree)?;
        stack.params.values_mut().iter_mut().for_each(|c| *c = rng.normal());
        Ok(stack)
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in
    }

    pub fn d_out(&self) -> usize {
        self.layers[self.layers.len() - 1].d_out
    }

    /// Layer inputs `x_0, …, x_L` (the last entry is the stack output).
    pub fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, RankError> {
        check_dim(self.d_in(), x.len())?;
        let mut acts = vec![x.to_vec()];
        for layer in &self.layers {
            let next = layer.eval(self.params.values(), acts.last().expect("nonempty"));
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, RankError> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(tape, base, &h)?;
        }
        Ok(h)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), RankError> {
    if expected != got {
        return Err(RankError::Dimension { expected, got });
    }
    Ok(())
}

/// Jacobian of `f` at `x`, one column per forward pass with a single
/// first-order jet direction seeded on input `i`.
fn jacobian_by_columns<F>(x: &[f64], d_out: usize, params: &[f64], mut f: F) -> Result<DenseMatrix, RankError>
where
    F: FnMut(&mut Tape, Var, &[Jet]) -> Result<Vec<Jet>, RankError>,
{
    let mut jac = DenseMatrix::zeros(d_out, x.len());
    for i in 0..x.len() {
        let mut tape = Tape::new();
        let base = tape.register_params(params);
        let mut inputs = Vec::with_capacity(x.len());
        for (j, &v) in x.iter().enumerate() {
            inputs.push(if j == i {
                tape.jet_input_with_order(v, 0, 1, JetOrder::First).map_err(ModelError::from)?
            } else {
                tape.jet_constant(v, 1, JetOrder::First)
            });
        }
        let out = f(&mut tape, base, &inputs)?;
        check_dim(d_out, out.len())?;
        for (k, o) in out.iter().enumerate() {
            jac.set(k, i, tape.value(o.grad(0)));
        }
    }
    Ok(jac)
}

/// Per-layer Jacobians `J_0, …, J_{L−1}` along the forward pass from `x`.
pub fn layer_jacobians(stack: &ChebyStack, x: &[f64]) -> Result<Vec<DenseMatrix>, RankError> {
    let acts = stack.activations(x)?;
    let params = stack.params.values();
    stack
        .layers
        .iter()
        .zip(&acts)
        .map(|(layer, a)| {
            jacobian_by_columns(a, layer.d_out, params, |tape, base, h| Ok(layer.forward(tape, base, h)?))
        })
        .collect()
}

/// `J_total = J_{L−1} ⋯ J_0` at `x`, assembled by the chain rule from the
/// per-layer Jacobians.
pub fn layer_jacobian(stack: &ChebyStack, x: &[f64]) -> Result<DenseMatrix, RankError> {
    prefix_products(&layer_jacobians(stack, x)?)?.pop().ok_or(RankError::EmptyStack)
}

/// `J_{d−1} ⋯ J_0` for every prefix depth `d = 1..=L`.
pub fn prefix_products(jacobians: &[DenseMatrix]) -> Result<Vec<DenseMatrix>, RankError> {
    let mut out: Vec<DenseMatrix> = Vec::with_capacity(jacobians.len());
    for j in jacobians {
        let next = match out.last() {
            Some(prev) => j.matmul(prev)?,
            None => j.clone(),
        };
        out.push(next);
    }
    Ok(out)
}

/// Jacobian of the whole stack from a single jet pass per input coordinate.
pub fn end_to_end_jacobian(stack: &ChebyStack, x: &[f64]) -> Result<DenseMatrix, RankError> {
    check_dim(stack.d_in(), x.len())?;
    jacobian_by_columns(x, stack.d_out(), stack.params.values(), |tape, base, h| stack.forward(tape, base, h))
}

/// ε-ranks of `J̃ D` and of `J̃` for one layer at `x`, where `J̃` is the
/// Jacobian with respect to the normalised inputs `tanh x` and
/// `D = diag(1 − tanh² x)`. Returns `(rank_scaled, rank_unscaled)`.
pub fn tanh_scaling_compare(layer: &Cheby1KanLayer, params: &[f64], x: &[f64], eps: f64) -> Result<(usize, usize), RankError> {
    check_dim(layer.d_in, x.len())?;
    let t: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
    let unscaled = jacobian_by_columns(&t, layer.d_out, params, |tape, base, h| Ok(layer.forward_normalized(tape, base, h)?))?;
    let d: Vec<f64> = t.iter().map(|t| 1.0 - t * t).collect();
    let scaled = unscaled.matmul(&DenseMatrix::diag(&d))?;
    Ok((numerical_rank(&svd(&scaled)?, eps), numerical_rank(&svd(&unscaled)?, eps)))
}

/// ε-rank of the model's input Jacobian at each point.
pub fn model_input_rank(model: &AcPkanModel, points: &[Vec<f64>], eps: f64) -> Result<Vec<usize>, RankError> {
    points
        .iter()
        .map(|p| {
            check_dim(model.d_in(), p.len())?;
            let jac = jacobian_by_columns(p, model.d_out(), model.params().values(), |tape, base, h| {
                Ok(model.forward(tape, base, h)?)
            })?;
            Ok(numerical_rank(&svd(&jac)?, eps))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthRank {
    pub depth: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRanks {
    pub trial: usize,
    pub seed: u64,
    pub depths: Vec<DepthRank>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    pub width: usize,
    pub degree: usize,
    pub eps: f64,
    pub trials: Vec<TrialRanks>,
}

impl RankReport {
    pub fn max_depth(&self) -> usize {
        self.trials.first().map_or(0, |t| t.depths.len())
    }

    /// Ranks of every trial at prefix depth `depth` (1-based).
    pub fn ranks_at(&self, depth: usize) -> Vec<usize> {
        self.trials.iter().filter_map(|t| t.depths.get(depth.wrapping_sub(1)).map(|d| d.rank)).collect()
    }

    /// Lower median of the ranks at `depth`.
    pub fn median_rank(&self, depth: usize) -> Option<usize> {
        let mut r = self.ranks_at(depth);
        if r.is_empty() {
            return None;
        }
        r.sort_unstable();
        Some(r[(r.len() - 1) / 2])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,depth,rank,sigma_max,sigma_min\n");
        for t in &self.trials {
            for d in &t.depths {
                let first = d.singular_values.first().copied().unwrap_or(0.0);
                let last = d.singular_values.last().copied().unwrap_or(0.0);
                let _ = writeln!(out, "{},{},{},{first:e},{last:e}", t.trial, d.depth, d.rank);
            }
        }
        out
    }
}

/// Ranks of one random square stack at every prefix depth.
pub fn rank_trial(width: usize, degree: usize, depth: usize, eps: f64, seed: u64) -> Result<Vec<DepthRank>, RankError> {
    let mut rng = Rng::new(seed);
    let stack = ChebyStack::random(&vec![width; depth + 1], degree, &mut rng)?;
    let x: Vec<f64> = (0..width).map(|_| rng.normal()).collect();
    let prefixes = prefix_products(&layer_jacobians(&stack, &x)?)?;
    prefixes
        .iter()
        .enumerate()
        .map(|(l, j)| {
            let sigma = svd(j)?;
            Ok(DepthRank { depth: l + 1, rank: numerical_rank(&sigma, eps), singular_values: sigma })
        })
        .collect()
}

/// Depth scan over `trials` random stacks; trial `t` uses seed `seed + t`.
/// Trials run on scoped threads and are assembled in trial order.
pub fn rank_scan(width: usize, degree: usize, depth: usize, trials: usize, eps: f64, seed: u64) -> Result<RankReport, RankError> {
    if width == 0 || degree == 0 || depth == 0 || trials == 0 {
        return Err(RankError::InvalidConfig("width, degree, depth and trials must be at least 1".into()));
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials);
    let results: Vec<Result<Vec<DepthRank>, RankError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                s.spawn(move || {
                    (w..trials)
                        .step_by(threads)
                        .map(|t| (t, rank_trial(width, degree, depth, eps, seed.wrapping_add(t as u64))))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<_> = handles.into_iter().flat_map(|h| h.join().expect("rank trial panicked")).collect();
        all.sort_by_key(|(t, _)| *t);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let mut out = Vec::with_capacity(trials);
    for (t, r) in results.into_iter().enumerate() {
        out.push(TrialRanks { trial: t, seed: seed.wrapping_add(t as u64), depths: r? });
    }
    Ok(RankReport { width, degree, eps, trials: out })
}
