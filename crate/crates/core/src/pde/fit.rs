//! Piecewise 1D regression target with noisy training samples.

use super::PdeError;
use crate::rng::Rng;
use std::f64::consts::PI;

pub const FIT_TRAIN_POINTS: usize = 500;
pub const FIT_TEST_POINTS: usize = 1000;
pub const FIT_NOISE_STD: f64 = 0.1;

/// Three-branch target on `[0, 2]`.
pub fn target_function(x: f64) -> Result<f64, PdeError> {
    if !(0.0..=2.0).contains(&x) {
        return Err(PdeError::OutOfDomain { x });
    }
    let y = if x < 0.5 {
        (25.0 * PI * x).sin() + x * x + 0.5 * (30.0 * PI * x).cos() + 0.2 * x.powi(3)
    } else if x < 1.5 {
        0.5 * x * (-x).exp() + (5.0 * PI * x).sin().abs() + 0.3 * x * (7.0 * PI * x).cos() + 0.1 * (-x * x).exp()
    } else {
        (x - 1.0).ln() / 2f64.ln() - (2.0 * PI * x).cos() + 0.2 * (8.0 * PI * x).sin() + 0.1 * (x + 1.0).ln() / 3f64.ln()
    };
    Ok(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitDataset {
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
    pub test_x: Vec<f64>,
    pub test_y: Vec<f64>,
}

/// Uniform random abscissae; training targets carry Gaussian noise, test
/// targets are exact.
pub fn make_fit_dataset(rng: &mut Rng) -> FitDataset {
    let train_x: Vec<f64> = (0..FIT_TRAIN_POINTS).map(|_| rng.uniform(0.0, 2.0)).collect();
    let train_y = train_x
        .iter()
        .map(|&x| target_function(x).expect("sample lies in [0, 2]") + rng.normal_with(0.0, FIT_NOISE_STD))
        .collect();
    let test_x: Vec<f64> = (0..FIT_TEST_POINTS).map(|_| rng.uniform(0.0, 2.0)).collect();
    let test_y = test_x.iter().map(|&x| target_function(x).expect("sample lies in [0, 2]")).collect();
    FitDataset { train_x, train_y, test_x, test_y }
}
