//! Attention-coupled Chebyshev KAN.
//!
//! Forward pass:
//!
//! ```text
//! h0 = W_emb x + b_emb
//! U  = Wavelet_U(Θ_U h0 + b_U),  V = Wavelet_V(Θ_V h0 + b_V)
//! α⁰ = U
//! for l in 1..=L:
//!     H   = LayerNorm_l(Cheby_l(α^{l-1}))
//!     α₀  = H + α^{l-1}
//!     α^l = (1 − α₀) ⊙ U + α₀ ⊙ (V + 1)
//! y  = W_out α^L + b_out
//! ```

use super::layers::{Cheby1KanLayer, LayerNormLayer, LinearLayer, WaveletAct};
use super::params::ParamStore;
use super::{ModelError, Network};
use crate::autodiff::{Jet, Tape, Var};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AcPkanConfig {
    pub d_in: usize,
    pub d_model: usize,
    pub d_hidden: usize,
    pub d_out: usize,
    /// Number of Chebyshev blocks `L`.
    pub depth: usize,
    pub degree: usize,
}

impl AcPkanConfig {
    /// CPU-sized default: 2 → 16 → 32, two blocks of degree 8, scalar output.
    pub fn desk() -> Self {
        AcPkanConfig { d_in: 2, d_model: 16, d_hidden: 32, d_out: 1, depth: 2, degree: 8 }
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let linear = |i: usize, o: usize| i * o + o;
        linear(self.d_in, self.d_model)
            + 2 * linear(self.d_model, self.d_hidden)
            + 4
            + self.depth * (self.d_hidden * self.d_hidden * (self.degree + 1) + 2 * self.d_hidden)
            + linear(self.d_hidden, self.d_out)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [self.d_in, self.d_model, self.d_hidden, self.d_out];
        if dims.iter().any(|&d| d == 0) {
            return Err(ModelError::InvalidConfig("all dimensions must be positive".into()));
        }
        if self.depth < 1 {
            return Err(ModelError::InvalidConfig("at least one Chebyshev block is required".into()));
        }
        if self.degree < 1 {
            return Err(ModelError::InvalidConfig("Chebyshev degree must be at least 1".into()));
        }
        if self.d_hidden < 2 {
            return Err(ModelError::InvalidConfig("hidden width must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcPkanModel {
    pub config: AcPkanConfig,
    pub embed: LinearLayer,
    pub enc_u: LinearLayer,
    pub enc_v: LinearLayer,
    pub wavelet_u: WaveletAct,
    pub wavelet_v: WaveletAct,
    pub blocks: Vec<(Cheby1KanLayer, LayerNormLayer)>,
    pub head: LinearLayer,
    params: ParamStore,
}

impl AcPkanModel {
    /// Allocates a zero-valued model; call [`Network::init`] before use.
    pub fn new(config: AcPkanConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let embed = LinearLayer::new(&mut store, "embed", config.d_in, config.d_model);
        let enc_u = LinearLayer::new(&mut store, "enc_u", config.d_model, config.d_hidden);
        let enc_v = LinearLayer::new(&mut store, "enc_v", config.d_model, config.d_hidden);
        let wavelet_u = WaveletAct::new(&mut store, "wavelet_u");
        let wavelet_v = WaveletAct::new(&mut store, "wavelet_v");
        let mut blocks = Vec::with_capacity(config.depth);
        for l in 0..config.depth {
            let cheby = Cheby1KanLayer::new(&mut store, &format!("cheby.{l}"), config.d_hidden, config.d_hidden, config.degree)?;
            let norm = LayerNormLayer::new(&mut store, &format!("norm.{l}"), config.d_hidden)?;
            blocks.push((cheby, norm));
        }
        let head = LinearLayer::new(&mut store, "head", config.d_hidden, config.d_out);
        Ok(AcPkanModel { config, embed, enc_u, enc_v, wavelet_u, wavelet_v, blocks, head, params: store })
    }

    /// Encoder features `(U, V)` for the given input jets.
    pub fn encode(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<(Vec<Jet>, Vec<Jet>), ModelError> {
        let h0 = self.embed.forward(tape, base, x)?;
        let pre_u = self.enc_u.forward(tape, base, &h0)?;
        let pre_v = self.enc_v.forward(tape, base, &h0)?;
        let u = self.wavelet_u.forward(tape, base, &pre_u)?;
        let v = self.wavelet_v.forward(tape, base, &pre_v)?;
        Ok((u, v))
    }

    /// Attention state `α^L` before the output head.
    pub fn hidden(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        let (u, v) = self.encode(tape, base, x)?;
        // α = (1 − α₀)⊙U + α₀⊙(V + 1) = U + α₀⊙(V + 1 − U)
        let gate = u.iter().zip(&v).map(|(ui, vi)| tape.jet_lincomb(&[(1.0, vi), (-1.0, ui)], 1.0)).collect::<Result<Vec<_>, _>>()?;
        let mut alpha = u.clone();
        for (cheby, norm) in &self.blocks {
            let c = cheby.forward(tape, base, &alpha)?;
            let h = norm.forward(tape, base, &c)?;
            let mut next = Vec::with_capacity(alpha.len());
            for i in 0..alpha.len() {
                let a0 = tape.jet_add(&h[i], &alpha[i])?;
                next.push(tape.jet_fused(1.0, &[(a0, gate[i])], &[(1.0, &u[i])], 0.0)?);
            }
            alpha = next;
        }
        Ok(alpha)
    }

    fn eval_hidden(&self, x: &[f64]) -> Vec<f64> {
        let p = self.params.values();
        let h0 = self.embed.eval(p, x);
        let u = self.wavelet_u.eval(p, &self.enc_u.eval(p, &h0));
        let v = self.wavelet_v.eval(p, &self.enc_v.eval(p, &h0));
        let mut alpha = u.clone();
        for (cheby, norm) in &self.blocks {
            let h = norm.eval(p, &cheby.eval(p, &alpha));
            alpha = (0..alpha.len())
                .map(|i| {
                    let a0 = h[i] + alpha[i];
                    (1.0 - a0) * u[i] + a0 * (v[i] + 1.0)
                })
                .collect();
        }
        alpha
    }
}

impl Network for AcPkanModel {
    fn d_in(&self) -> usize {
        self.config.d_in
    }

    fn d_out(&self) -> usize {
        self.config.d_out
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        let alpha = self.hidden(tape, base, x)?;
        self.head.forward(tape, base, &alpha)
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let alpha = self.eval_hidden(x);
        self.head.eval(self.params.values(), &alpha)
    }

    fn init(&mut self, rng: &mut Rng) {
        let p = self.params.values_mut();
        self.embed.init(p, rng);
        self.enc_u.init(p, rng);
        self.enc_v.init(p, rng);
        self.wavelet_u.init(p);
        self.wavelet_v.init(p);
        for (cheby, norm) in &self.blocks {
            cheby.init(p, rng);
            norm.init(p);
        }
        self.head.init(p, rng);
    }
}
