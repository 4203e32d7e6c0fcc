//! Finite-difference self-checks of the loss gradient and of input jets.

use super::{TrainConfig, TrainError, Trainer};
use crate::autodiff::{JetOrder, Tape};
use crate::model::Network;
use crate::rga::rga_total_loss;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckReport {
    /// Largest `|analytic − fd| / max(|analytic|, 1)` over checked parameters.
    pub param_max_rel: f64,
    /// Same measure over first and second input derivatives.
    pub jet_max_rel: f64,
    pub params_checked: usize,
    pub points_checked: usize,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

fn analytic_gradient(trainer: &Trainer) -> Result<Vec<f64>, TrainError> {
    let mut tape = Tape::new();
    let base = trainer.model.register(&mut tape);
    let mut residuals = Vec::new();
    for term in &trainer.problem.terms {
        let mut vars = Vec::with_capacity(term.len());
        for c in &term.constraints {
            vars.push(trainer.problem.constraint_residual(&trainer.model, &mut tape, base, c)?);
        }
        residuals.push(vars);
    }
    let loss = rga_total_loss(&mut tape, &residuals, &trainer.rga);
    Ok(tape.backward(loss).into_vec())
}

/// Spreads at most `budget` indices over every tensor of the model.
fn sample_indices(trainer: &Trainer, budget: usize) -> Vec<usize> {
    let tensors = trainer.model.params().tensors();
    let per = (budget / tensors.len()).max(1);
    let mut out = Vec::new();
    for t in tensors {
        let n = t.len();
        let k = per.min(n);
        for i in 0..k {
            out.push(t.offset + i * n / k);
        }
    }
    out
}

/// Checks the full weighted loss of `config` (with randomized RBA weights and
/// GRA scalars) against central differences on up to `max_params`
/// parameters, and model input derivatives against finite differences at
/// `points` random inputs.
pub fn gradcheck(config: &TrainConfig, max_params: usize, points: usize) -> Result<GradcheckReport, TrainError> {
    let mut trainer = Trainer::new(config.clone())?;
    let mut rng = Rng::new(config.seed.wrapping_add(1));
    if trainer.rga.config.enabled {
        for w in trainer.rga.rba.weights.iter_mut().flatten() {
            *w = rng.uniform(0.1, 1.0);
        }
        for l in &mut trainer.rga.gra.lambdas {
            *l = rng.uniform(3.0, 20.0);
        }
    }

    let analytic = analytic_gradient(&trainer)?;
    let h = 1e-6;
    let mut param_max_rel: f64 = 0.0;
    let indices = sample_indices(&trainer, max_params);
    for &i in &indices {
        let orig = trainer.model.params().values()[i];
        trainer.model.params_mut().values_mut()[i] = orig + h;
        let up = trainer.total_loss()?;
        trainer.model.params_mut().values_mut()[i] = orig - h;
        let down = trainer.total_loss()?;
        trainer.model.params_mut().values_mut()[i] = orig;
        param_max_rel = param_max_rel.max(rel(analytic[i], (up - down) / (2.0 * h)));
    }

    let model = &trainer.model;
    let domain = trainer.problem.domain.clone();
    let d = domain.len();
    let f = |p: &[f64]| model.eval(p)[0];
    let mut jet_max_rel: f64 = 0.0;
    for _ in 0..points {
        let p: Vec<f64> = domain.iter().map(|&(a, b)| rng.uniform(a + 0.1 * (b - a), b - 0.1 * (b - a))).collect();
        let mut tape = Tape::new();
        let base = model.register(&mut tape);
        let u = model.forward_point(&mut tape, base, &p, JetOrder::Second)?;
        let u = &u[0];
        let shifted = |offsets: &[(usize, f64)]| {
            let mut q = p.clone();
            for &(i, s) in offsets {
                q[i] += s;
            }
            f(&q)
        };
        let f0 = f(&p);
        // Richardson-extrapolated central differences, O(h⁴)
        let richardson = |d: &dyn Fn(f64) -> f64, h: f64| (4.0 * d(h / 2.0) - d(h)) / 3.0;
        for i in 0..d {
            let first = |h: f64| (shifted(&[(i, h)]) - shifted(&[(i, -h)])) / (2.0 * h);
            jet_max_rel = jet_max_rel.max(rel(tape.value(u.grad(i)), richardson(&first, 1e-3)));
            for j in i..d {
                let second = |h: f64| {
                    if i == j {
                        (shifted(&[(i, h)]) - 2.0 * f0 + shifted(&[(i, -h)])) / (h * h)
                    } else {
                        (shifted(&[(i, h), (j, h)]) - shifted(&[(i, h), (j, -h)]) - shifted(&[(i, -h), (j, h)])
                            + shifted(&[(i, -h), (j, -h)]))
                            / (4.0 * h * h)
                    }
                };
                jet_max_rel = jet_max_rel.max(rel(tape.value(u.hess(i, j)), richardson(&second, 2e-3)));
            }
        }
    }
    Ok(GradcheckReport { param_max_rel, jet_max_rel, params_checked: indices.len(), points_checked: points })
}
