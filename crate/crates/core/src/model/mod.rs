//! Learnable architectures: Chebyshev KAN layers, the attention-coupled
//! AC-PKAN network and a tanh MLP baseline.

mod acpkan;
mod layers;
mod mlp;
mod params;

pub use acpkan::{AcPkanConfig, AcPkanModel};
pub use layers::{
    cheby_basis, cheby_basis_f64, seed_inputs, Cheby1KanLayer, LayerNormLayer, LinearLayer, WaveletAct, LAYER_NORM_EPS,
};
pub use mlp::MlpPinn;
pub use params::{ParamStore, TensorRef, TensorSpec};

use crate::autodiff::{AutodiffError, Jet, JetOrder, Tape, Var};
use crate::rng::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected} inputs, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Common interface of the trainable networks.
pub trait Network {
    fn d_in(&self) -> usize;
    fn d_out(&self) -> usize;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    /// Jet forward pass; `base` is the first parameter leaf returned by
    /// [`Tape::register_params`] for [`Network::params`].
    fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError>;

    /// Plain value forward pass without a tape.
    fn eval(&self, x: &[f64]) -> Vec<f64>;

    fn init(&mut self, rng: &mut Rng);

    fn param_count(&self) -> usize {
        self.params().len()
    }

    /// Registers the parameters on `tape` and returns the first leaf.
    fn register(&self, tape: &mut Tape) -> Var {
        tape.register_params(self.params().values())
    }

    /// Seeds `point` as input jets and runs the forward pass.
    fn forward_point(&self, tape: &mut Tape, base: Var, point: &[f64], order: JetOrder) -> Result<Vec<Jet>, ModelError> {
        if point.len() != self.d_in() {
            return Err(ModelError::ShapeMismatch { expected: self.d_in(), got: point.len() });
        }
        let x = seed_inputs(tape, point, order)?;
        self.forward(tape, base, &x)
    }
}

/// Either trainable architecture, as selected on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    AcPkan(AcPkanModel),
    Mlp(MlpPinn),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::AcPkan(_) => "acpkan",
            Model::Mlp(_) => "mlp",
        }
    }

    fn inner(&self) -> &dyn Network {
        match self {
            Model::AcPkan(m) => m,
            Model::Mlp(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Network {
        match self {
            Model::AcPkan(m) => m,
            Model::Mlp(m) => m,
        }
    }
}

impl Network for Model {
    fn d_in(&self) -> usize {
        self.inner().d_in()
    }

    fn d_out(&self) -> usize {
        self.inner().d_out()
    }

    fn params(&self) -> &ParamStore {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        self.inner_mut().params_mut()
    }

    fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        self.inner().forward(tape, base, x)
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.inner().eval(x)
    }

    fn init(&mut self, rng: &mut Rng) {
        self.inner_mut().init(rng)
    }
}
