//! Scalar reverse-mode automatic differentiation and second-order jets.

mod jet;
mod tape;

pub use jet::{component_count, hess_index, Jet, JetOrder, MAX_JET_DIM};
pub use tape::{BinaryOp, GradientVector, OpKind, Tape, UnaryOp, Var};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("domain error in `{op}` at argument {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("jet input index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("jet shape mismatch: (dim, order) {left:?} vs {right:?}")]
    JetMismatch { left: (usize, usize), right: (usize, usize) },
}

/// Compares reverse-mode gradients of `f` at `point` against central
/// differences with step `h`; returns the largest component-wise relative
/// error `|analytic − fd| / max(|analytic|, 1)`.
///
/// `f` receives a fresh tape and one parameter leaf per coordinate.
pub fn grad_check<F>(f: F, point: &[f64], h: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let eval = |x: &[f64]| -> Result<(f64, GradientVector), AutodiffError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = x.iter().map(|&v| tape.param(v)).collect();
        let out = f(&mut tape, &vars)?;
        let value = tape.value(out);
        Ok((value, tape.backward(out)))
    };
    let (_, analytic) = eval(point)?;
    let mut worst: f64 = 0.0;
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let (fp, _) = eval(&x)?;
        x[i] = point[i] - h;
        let (fm, _) = eval(&x)?;
        x[i] = point[i];
        let fd = (fp - fm) / (2.0 * h);
        let a = analytic.as_slice()[i];
        worst = worst.max((a - fd).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
