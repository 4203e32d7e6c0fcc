use super::layers::LinearLayer;
use super::params::ParamStore;
use super::{ModelError, Network};
use crate::autodiff::{Jet, Tape, Var};
use crate::rng::Rng;

/// Fully connected tanh network, the vanilla PINN baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpPinn {
    pub sizes: Vec<usize>,
    pub layers: Vec<LinearLayer>,
    params: ParamStore,
}

impl MlpPinn {
    /// `sizes = [d_in, hidden.., d_out]`; tanh between consecutive layers.
    pub fn new(sizes: &[usize]) -> Result<Self, ModelError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(ModelError::InvalidConfig("an MLP needs at least two positive layer sizes".into()));
        }
        let mut store = ParamStore::new();
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| LinearLayer::new(&mut store, &format!("mlp.{i}"), w[0], w[1]))
            .collect();
        Ok(MlpPinn { sizes: sizes.to_vec(), layers, params: store })
    }

    pub fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

impl Network for MlpPinn {
    fn d_in(&self) -> usize {
        self.sizes[0]
    }

    fn d_out(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, base: Var, x: &[Jet]) -> Result<Vec<Jet>, ModelError> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, base, &h)?;
            if i < last {
                h = h.iter().map(|j| tape.jet_tanh(j)).collect();
            }
        }
        Ok(h)
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let p = self.params.values();
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.eval(p, &h);
            if i < last {
                h.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        h
    }

    fn init(&mut self, rng: &mut Rng) {
        let p = self.params.values_mut();
        for layer in &self.layers {
            layer.init(p, rng);
        }
    }
}
