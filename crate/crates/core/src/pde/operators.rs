//! Residual operators over jets and the closed-form reference solutions.

use super::PdeError;
use crate::autodiff::{Jet, JetOrder, Tape, Var};
use std::f64::consts::PI;

fn require(u: &Jet, order: JetOrder) -> Result<(), PdeError> {
    if u.order() < order {
        return Err(PdeError::JetOrder { needed: order, got: u.order() });
    }
    Ok(())
}

/// `u_t − ρ u (1 − u)` over inputs `(x, t)`.
pub fn residual_reaction(tape: &mut Tape, u: &Jet, rho: f64) -> Result<Var, PdeError> {
    require(u, JetOrder::First)?;
    let sq = tape.square(u.val());
    Ok(tape.linear_combination(&[(1.0, u.grad(1)), (-rho, u.val()), (rho, sq)], 0.0))
}

/// `u_tt − β u_xx` over inputs `(x, t)`.
pub fn residual_wave(tape: &mut Tape, u: &Jet, beta: f64) -> Result<Var, PdeError> {
    require(u, JetOrder::Second)?;
    Ok(tape.linear_combination(&[(1.0, u.hess(1, 1)), (-beta, u.hess(0, 0))], 0.0))
}

/// `u_t + β u_x − ν u_xx − ρ u (1 − u)` over inputs `(x, t)`.
pub fn residual_cdr(tape: &mut Tape, u: &Jet, beta: f64, nu: f64, rho: f64) -> Result<Var, PdeError> {
    require(u, JetOrder::Second)?;
    let sq = tape.square(u.val());
    Ok(tape.linear_combination(
        &[(1.0, u.grad(1)), (beta, u.grad(0)), (-nu, u.hess(0, 0)), (-rho, u.val()), (rho, sq)],
        0.0,
    ))
}

/// Piecewise coefficient: `a1` strictly inside `r0`, `a2` from `r0` outwards.
pub fn het_coefficient(r: f64, a1: f64, a2: f64, r0: f64) -> f64 {
    if r < r0 {
        a1
    } else {
        a2
    }
}

/// `a(r) Δu − 16 r²` at `point = (x, y)`.
pub fn residual_poisson_het(tape: &mut Tape, u: &Jet, point: &[f64], a1: f64, a2: f64, r0: f64) -> Result<Var, PdeError> {
    require(u, JetOrder::Second)?;
    let r2 = point[0] * point[0] + point[1] * point[1];
    let a = het_coefficient(r2.sqrt(), a1, a2, r0);
    Ok(tape.linear_combination(&[(a, u.hess(0, 0)), (a, u.hess(1, 1))], -16.0 * r2))
}

/// `−Δu` over inputs `(x, y)`.
pub fn residual_poisson_geom(tape: &mut Tape, u: &Jet) -> Result<Var, PdeError> {
    require(u, JetOrder::Second)?;
    Ok(tape.linear_combination(&[(-1.0, u.hess(0, 0)), (-1.0, u.hess(1, 1))], 0.0))
}

/// Gaussian bump initial condition of the reaction and CDR problems.
pub fn reaction_ic(x: f64) -> f64 {
    let s = PI / 4.0;
    (-(x - PI).powi(2) / (2.0 * s * s)).exp()
}

pub fn exact_reaction(x: f64, t: f64, rho: f64) -> f64 {
    let h = reaction_ic(x);
    let g = h * (rho * t).exp();
    g / (g + 1.0 - h)
}

/// `sin(πx)cos(2πt) + ½ sin(3πx)cos(6πt)`.
pub fn exact_wave(x: f64, t: f64) -> f64 {
    (PI * x).sin() * (2.0 * PI * t).cos() + 0.5 * (3.0 * PI * x).sin() * (6.0 * PI * t).cos()
}

pub fn wave_ic(x: f64) -> f64 {
    (PI * x).sin() + 0.5 * (3.0 * PI * x).sin()
}

pub fn exact_poisson_het(x: f64, y: f64, a1: f64, a2: f64, r0: f64) -> f64 {
    let r = (x * x + y * y).sqrt();
    if r < r0 {
        r.powi(4) / a1
    } else {
        r.powi(4) / a2 + r0.powi(4) * (1.0 / a1 - 1.0 / a2)
    }
}
