//! Chebyshev Kolmogorov–Arnold physics-informed networks.

pub mod autodiff;
pub mod cli;
pub mod model;
pub mod output;
pub mod pde;
pub mod rankdiag;
pub mod rga;
pub mod rng;
pub mod train;
