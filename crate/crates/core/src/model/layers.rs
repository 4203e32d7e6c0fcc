//! Building blocks shared by the AC-PKAN and MLP networks.
//!
//! Each layer owns [`TensorRef`]s into the model's [`ParamStore`] and offers
//! two forward paths: a jet path on a [`Tape`] (differentiable in inputs and
//! parameters) and a plain `f64` path used for evaluation.

use super::params::{ParamStore, TensorRef};
use super::ModelError;
use crate::autodiff::{Jet, JetOrder, Tape, Var};
use crate::rng::Rng;

fn check_len(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// `Y = A·X (+ b)` over jets, where `A` is a contiguous `rows × x.len()`
/// parameter block starting at `a_start`.
pub(crate) fn jets_matmul(tape: &mut Tape, a_start: Var, rows: usize, x: &[Jet], bias: Option<Var>) -> Vec<Jet> {
    let first = x.first().expect("matmul over an empty jet vector");
    let (dim, order) = (first.dim(), first.order());
    let cols = first.len();
    let mut ids = Vec::with_capacity(x.len() * cols);
    for j in x {
        debug_assert_eq!(j.len(), cols);
        ids.extend_from_slice(j.components());
    }
    let out = tape.matmul(a_start, rows, x.len(), &ids, cols, bias);
    let mut comps = Vec::with_capacity(cols);
    (0..rows)
        .map(|k| {
            comps.clear();
            comps.extend((0..cols).map(|c| out.offset(k * cols + c)));
            Jet::from_components(dim, order, &comps)
        })
        .collect()
}

/// Affine map `y = W x + b` with `W` stored row-major `d_out × d_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    pub d_in: usize,
    pub d_out: usize,
    pub weight: TensorRef,
    pub bias: TensorRef,
}

impl LinearLayer {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Self {
        let weight = store.alloc(format!("{name}.weight"), &[d_out, d_in]);
        let bias = store.alloc(format!("{name}.bias"), &[d_out]);
        LinearLayer { d_in, d_out, weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        check_len(self.d_in, x.len())?;
        let w = base.offset(self.weight.offset);
        let b = base.offset(self.bias.offset);
        Ok(jets_matmul(tape, w, self.d_out, x, Some(b)))
    }

    pub fn eval(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let w = &params[self.weight.range()];
        let b = &params[self.bias.range()];
        (0..self.d_out)
            .map(|k| {
                let row = &w[k * self.d_in..(k + 1) * self.d_in];
                row.iter().zip(x).fold(0.0, |s, (a, v)| s + a * v) + b[k]
            })
            .collect()
    }

    /// Xavier-uniform weights, zero bias.
    pub fn init(&self, params: &mut [f64], rng: &mut Rng) {
        let a = (6.0 / (self.d_in + self.d_out) as f64).sqrt();
        for w in &mut params[self.weight.range()] {
            *w = rng.uniform(-a, a);
        }
        params[self.bias.range()].iter_mut().for_each(|b| *b = 0.0);
    }
}

/// Chebyshev polynomials `T_0..T_degree` of a jet by the three-term recurrence.
pub fn cheby_basis(tape: &mut Tape, z: &Jet, degree: usize) -> Result<Vec<Jet>, ModelError> {
    let one = tape.one();
    let mut basis = Vec::with_capacity(degree + 1);
    basis.push(tape.jet_broadcast(one, z.dim(), z.order()));
    if degree >= 1 {
        basis.push(*z);
    }
    for n in 2..=degree {
        let t = tape.jet_fused(2.0, &[(*z, basis[n - 1])], &[(-1.0, &basis[n - 2])], 0.0)?;
        basis.push(t);
    }
    Ok(basis)
}

/// Values of `T_0..T_degree` at `z`.
pub fn cheby_basis_f64(z: f64, degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if degree >= 1 {
        out.push(z);
    }
    for n in 2..=degree {
        let t = 2.0 * z * out[n - 1] - out[n - 2];
        out.push(t);
    }
}

/// KAN layer whose edge functions are first-kind Chebyshev expansions of the
/// tanh-normalised input: `y_k = Σ_i Σ_n C[k,i,n] T_n(tanh x_i)`.
///
/// Coefficients are stored `d_out × d_in × (degree+1)` so that each output
/// row is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Cheby1KanLayer {
    pub d_in: usize,
    pub d_out: usize,
    pub degree: usize,
    pub coeffs: TensorRef,
}

impl Cheby1KanLayer {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, degree: usize) -> Result<Self, ModelError> {
        if degree < 1 {
            return Err(ModelError::InvalidConfig("Chebyshev degree must be at least 1".into()));
        }
        let coeffs = store.alloc(format!("{name}.coeffs"), &[d_out, d_in, degree + 1]);
        Ok(Cheby1KanLayer { d_in, d_out, degree, coeffs })
    }

    pub fn coeff_index(&self, k: usize, i: usize, n: usize) -> usize {
        (k * self.d_in + i) * (self.degree + 1) + n
    }

    pub fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        check_len(self.d_in, x.len())?;
        let normalized: Vec<Jet> = x.iter().map(|xi| tape.jet_tanh(xi)).collect();
        self.forward_normalized(tape, base, &normalized)
    }

    /// Forward pass from already-normalised inputs `tanh(x)`.
    pub fn forward_normalized(&self, tape: &mut Tape, base: Var, t: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        check_len(self.d_in, t.len())?;
        let mut rows = Vec::with_capacity(self.d_in * (self.degree + 1));
        for ti in t {
            rows.extend(cheby_basis(tape, ti, self.degree)?);
        }
        Ok(jets_matmul(tape, base.offset(self.coeffs.offset), self.d_out, &rows, None))
    }

    pub fn eval(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let c = &params[self.coeffs.range()];
        let width = self.d_in * (self.degree + 1);
        let mut rows = Vec::with_capacity(width);
        let mut basis = Vec::with_capacity(self.degree + 1);
        for &xi in x {
            cheby_basis_f64(xi.tanh(), self.degree, &mut basis);
            rows.extend_from_slice(&basis);
        }
        (0..self.d_out)
            .map(|k| c[k * width..(k + 1) * width].iter().zip(&rows).fold(0.0, |s, (a, b)| s + a * b))
            .collect()
    }

    /// Coefficients ~ Normal(0, std = 1/(d_in·√(degree+1))).
    pub fn init(&self, params: &mut [f64], rng: &mut Rng) {
        let std = 1.0 / (self.d_in as f64 * ((self.degree + 1) as f64).sqrt());
        for c in &mut params[self.coeffs.range()] {
            *c = rng.normal_with(0.0, std);
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Mean/variance normalisation over the feature axis with learnable affine.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormLayer {
    pub d: usize,
    pub gamma: TensorRef,
    pub beta: TensorRef,
    pub eps: f64,
}

impl LayerNormLayer {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Result<Self, ModelError> {
        if d < 2 {
            return Err(ModelError::InvalidConfig("layer norm needs at least two features".into()));
        }
        let gamma = store.alloc(format!("{name}.gamma"), &[d]);
        let beta = store.alloc(format!("{name}.beta"), &[d]);
        Ok(LayerNormLayer { d, gamma, beta, eps: LAYER_NORM_EPS })
    }

    pub fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        check_len(self.d, x.len())?;
        let inv_d = 1.0 / self.d as f64;
        let terms: Vec<(f64, &Jet)> = x.iter().map(|j| (inv_d, j)).collect();
        let mean = tape.jet_lincomb(&terms, 0.0)?;
        let centered: Vec<Jet> = x.iter().map(|j| tape.jet_sub(j, &mean)).collect::<Result<_, _>>()?;
        let squares: Vec<(Jet, Jet)> = centered.iter().map(|c| (*c, *c)).collect();
        let sum_sq = tape.jet_dot(&squares)?;
        let var_eps = tape.jet_lincomb(&[(inv_d, &sum_sq)], self.eps)?;
        let std = tape.jet_unary(crate::autodiff::UnaryOp::Sqrt, &var_eps)?;
        let inv_std = tape.jet_unary(crate::autodiff::UnaryOp::Recip, &std)?;
        centered
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let normed = tape.jet_mul(c, &inv_std)?;
                let g = base.offset(self.gamma.offset + i);
                let b = base.offset(self.beta.offset + i);
                Ok(tape.jet_var_combination(&[(g, &normed)], Some(b))?)
            })
            .collect()
    }

    pub fn eval(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let g = &params[self.gamma.range()];
        let b = &params[self.beta.range()];
        let inv_d = 1.0 / self.d as f64;
        let mean = x.iter().fold(0.0, |s, v| s + inv_d * v);
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let var = centered.iter().fold(0.0, |s, c| s + c * c) * inv_d;
        let inv_std = 1.0 / (var + self.eps).sqrt();
        centered.iter().enumerate().map(|(i, c)| g[i] * (c * inv_std) + b[i]).collect()
    }

    pub fn init(&self, params: &mut [f64]) {
        params[self.gamma.range()].iter_mut().for_each(|v| *v = 1.0);
        params[self.beta.range()].iter_mut().for_each(|v| *v = 0.0);
    }
}

/// `w1·sin(x) + w2·cos(x)` applied element-wise with two learnable scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletAct {
    pub weights: TensorRef,
}

impl WaveletAct {
    pub fn new(store: &mut ParamStore, name: &str) -> Self {
        WaveletAct { weights: store.alloc(format!("{name}.w"), &[2]) }
    }

    pub fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        let w1 = base.offset(self.weights.offset);
        let w2 = base.offset(self.weights.offset + 1);
        x.iter()
            .map(|j| {
                let s = tape.jet_sin(j);
                let c = tape.jet_cos(j);
                Ok(tape.jet_var_combination(&[(w1, &s), (w2, &c)], None)?)
            })
            .collect()
    }

    pub fn eval(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let w = &params[self.weights.range()];
        x.iter()
            .map(|&v| {
                let (s, c) = v.sin_cos();
                w[0] * s + w[1] * c
            })
            .collect()
    }

    pub fn init(&self, params: &mut [f64]) {
        params[self.weights.range()].iter_mut().for_each(|v| *v = 1.0);
    }
}

/// Seeds a point as `d` input jets of the given order.
pub fn seed_inputs(tape: &mut Tape, point: &[f64], order: JetOrder) -> Result<Vec<Jet>, ModelError> {
    let d = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, &v)| Ok(tape.jet_input_with_order(v, i, d, order)?))
        .collect()
}
