//! Benchmark problems: residual operators, constraint point sets and
//! reference solutions.

mod fit;
mod geometry;
mod operators;

pub use fit::{make_fit_dataset, target_function, FitDataset, FIT_NOISE_STD, FIT_TEST_POINTS, FIT_TRAIN_POINTS};
pub use geometry::{fdm_oracle_laplace, geometry_points, Circle, FdmField, GeometryMask, GeometryPoints};
pub use operators::{
    exact_poisson_het, exact_reaction, exact_wave, het_coefficient, reaction_ic, residual_cdr, residual_poisson_geom,
    residual_poisson_het, residual_reaction, residual_wave, wave_ic,
};

use crate::autodiff::{Jet, JetOrder, Tape, Var};
use crate::model::{ModelError, Network};
use crate::rng::Rng;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("unknown problem `{0}` (expected reaction, wave, cdr, poisson-het, poisson-geom or fit)")]
    UnknownProblem(String),
    #[error("x = {x} lies outside [0, 2]")]
    OutOfDomain { x: f64 },
    #[error("Gauss–Seidel did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("residual needs a jet of order {needed:?}, got {got:?}")]
    JetOrder { needed: JetOrder, got: JetOrder },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<crate::autodiff::AutodiffError> for PdeError {
    fn from(e: crate::autodiff::AutodiffError) -> Self {
        PdeError::Model(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemName {
    Reaction,
    Wave,
    Cdr,
    PoissonHet,
    PoissonGeom,
    Fit,
}

impl ProblemName {
    pub const ALL: [ProblemName; 6] = [
        ProblemName::Reaction,
        ProblemName::Wave,
        ProblemName::Cdr,
        ProblemName::PoissonHet,
        ProblemName::PoissonGeom,
        ProblemName::Fit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Reaction => "reaction",
            ProblemName::Wave => "wave",
            ProblemName::Cdr => "cdr",
            ProblemName::PoissonHet => "poisson-het",
            ProblemName::PoissonGeom => "poisson-geom",
            ProblemName::Fit => "fit",
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = PdeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemName::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| PdeError::UnknownProblem(s.to_string()))
    }
}

/// Physical constants of each benchmark.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    Reaction { rho: f64 },
    Wave { beta: f64 },
    Cdr { beta: f64, nu: f64, rho: f64 },
    PoissonHet { a1: f64, a2: f64, r0: f64 },
    PoissonGeom { mask: GeometryMask },
    Fit,
}

/// A single penalized quantity; its residual is squared in the loss.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// PDE residual at a collocation point.
    Pde { point: Vec<f64> },
    /// `u(point) − target`.
    Value { point: Vec<f64>, target: f64 },
    /// `∂u/∂x_index (point) − target`.
    Derivative { point: Vec<f64>, index: usize, target: f64 },
    /// `u(a) − u(b)`.
    Periodic { a: Vec<f64>, b: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Residual,
    Boundary,
    Initial,
    Data,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub name: String,
    pub kind: TermKind,
    pub constraints: Vec<Constraint>,
}

impl Term {
    fn new(name: &str, kind: TermKind, constraints: Vec<Constraint>) -> Self {
        Term { name: name.to_string(), kind, constraints }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }
}

/// Points and values used to score a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Point-set sizes. Training grids may be coarser than the evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolution {
    /// Training collocation points per axis.
    pub grid: usize,
    /// Reference grid points per axis.
    pub eval_grid: usize,
    /// Boundary samples per circle in the geometry problem.
    pub circle_samples: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { grid: 101, eval_grid: 101, circle_samples: 64 }
    }
}

pub const FDM_TOLERANCE: f64 = 1e-10;
pub const FDM_MAX_SWEEPS: usize = 1_000_000;

/// Tensor-product equispaced grid including endpoints, first axis fastest.
pub fn make_grid(ranges: &[(f64, f64)], counts: &[usize]) -> Vec<Vec<f64>> {
    assert_eq!(ranges.len(), counts.len(), "one count per axis");
    assert!(counts.iter().all(|&c| c >= 2), "grid counts must be at least 2");
    let axes: Vec<Vec<f64>> = ranges
        .iter()
        .zip(counts)
        .map(|(&(a, b), &n)| (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
        .collect();
    let total: usize = counts.iter().product();
    let mut points = Vec::with_capacity(total);
    for mut flat in 0..total {
        let mut p = Vec::with_capacity(axes.len());
        for axis in &axes {
            p.push(axis[flat % axis.len()]);
            flat /= axis.len();
        }
        points.push(p);
    }
    points
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeProblem {
    pub name: ProblemName,
    pub kind: ProblemKind,
    pub domain: Vec<(f64, f64)>,
    /// `terms[0]` is the residual (or, for fitting, the data mismatch).
    pub terms: Vec<Term>,
    pub reference: Option<Reference>,
}

impl PdeProblem {
    /// Builds a benchmark; `seed` only affects the fitting dataset.
    pub fn build(name: ProblemName, res: Resolution, seed: u64) -> Result<Self, PdeError> {
        if res.grid < 2 || res.eval_grid < 2 {
            return Err(PdeError::InvalidResolution("grids need at least 2 points per axis".into()));
        }
        if name == ProblemName::PoissonGeom && (res.eval_grid < 3 || res.circle_samples == 0) {
            return Err(PdeError::InvalidResolution("geometry needs eval grid ≥ 3 and circle samples ≥ 1".into()));
        }
        let problem = match name {
            ProblemName::Reaction => time_problem(name, ProblemKind::Reaction { rho: 5.0 }, res),
            ProblemName::Cdr => time_problem(name, ProblemKind::Cdr { beta: 1.0, nu: 3.0, rho: 5.0 }, res),
            ProblemName::Wave => wave_problem(res),
            ProblemName::PoissonHet => het_problem(res),
            ProblemName::PoissonGeom => geom_problem(res)?,
            ProblemName::Fit => fit_problem(seed),
        };
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn term_names(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn term_sizes(&self) -> Vec<usize> {
        self.terms.iter().map(Term::len).collect()
    }

    /// Jet order needed by the residual operator.
    pub fn residual_order(&self) -> JetOrder {
        match self.kind {
            ProblemKind::Reaction { .. } => JetOrder::First,
            ProblemKind::Fit => JetOrder::Value,
            _ => JetOrder::Second,
        }
    }

    pub fn constraint_order(&self, c: &Constraint) -> JetOrder {
        match c {
            Constraint::Pde { .. } => self.residual_order(),
            Constraint::Derivative { .. } => JetOrder::First,
            Constraint::Value { .. } | Constraint::Periodic { .. } => JetOrder::Value,
        }
    }

    /// PDE residual of the solution jet `u` at `point`.
    pub fn residual(&self, tape: &mut Tape, u: &Jet, point: &[f64]) -> Result<Var, PdeError> {
        match &self.kind {
            ProblemKind::Reaction { rho } => residual_reaction(tape, u, *rho),
            ProblemKind::Wave { beta } => residual_wave(tape, u, *beta),
            ProblemKind::Cdr { beta, nu, rho } => residual_cdr(tape, u, *beta, *nu, *rho),
            ProblemKind::PoissonHet { a1, a2, r0 } => residual_poisson_het(tape, u, point, *a1, *a2, *r0),
            ProblemKind::PoissonGeom { .. } => residual_poisson_geom(tape, u),
            ProblemKind::Fit => Ok(u.val()),
        }
    }

    /// Residual of one constraint for a network registered on `tape` at `base`.
    pub fn constraint_residual(&self, net: &dyn Network, tape: &mut Tape, base: Var, c: &Constraint) -> Result<Var, PdeError> {
        let order = self.constraint_order(c);
        let r = match c {
            Constraint::Pde { point } => {
                let u = net.forward_point(tape, base, point, order)?;
                self.residual(tape, &u[0], point)?
            }
            Constraint::Value { point, target } => {
                let u = net.forward_point(tape, base, point, order)?;
                tape.linear_combination(&[(1.0, u[0].val())], -target)
            }
            Constraint::Derivative { point, index, target } => {
                let u = net.forward_point(tape, base, point, order)?;
                tape.linear_combination(&[(1.0, u[0].grad(*index))], -target)
            }
            Constraint::Periodic { a, b } => {
                let ua = net.forward_point(tape, base, a, order)?;
                let ub = net.forward_point(tape, base, b, order)?;
                tape.sub(ua[0].val(), ub[0].val())
            }
        };
        Ok(r)
    }

    /// Closed-form solution where one exists.
    pub fn exact(&self, point: &[f64]) -> Option<f64> {
        match &self.kind {
            ProblemKind::Reaction { rho } => Some(exact_reaction(point[0], point[1], *rho)),
            ProblemKind::Wave { .. } => Some(exact_wave(point[0], point[1])),
            ProblemKind::PoissonHet { a1, a2, r0 } => Some(exact_poisson_het(point[0], point[1], *a1, *a2, *r0)),
            ProblemKind::Fit => target_function(point[0]).ok(),
            ProblemKind::Cdr { .. } | ProblemKind::PoissonGeom { .. } => None,
        }
    }
}

fn residual_term(points: Vec<Vec<f64>>) -> Term {
    Term::new("r", TermKind::Residual, points.into_iter().map(|point| Constraint::Pde { point }).collect())
}

fn grid_reference(domain: &[(f64, f64)], n: usize, f: impl Fn(&[f64]) -> f64) -> Reference {
    let points = make_grid(domain, &[n, n]);
    let values = points.iter().map(|p| f(p)).collect();
    Reference { points, values }
}

fn time_problem(name: ProblemName, kind: ProblemKind, res: Resolution) -> PdeProblem {
    let domain = vec![(0.0, 2.0 * PI), (0.0, 1.0)];
    let n = res.grid;
    let xs: Vec<f64> = make_grid(&domain[..1], &[n]).into_iter().map(|p| p[0]).collect();
    let ts: Vec<f64> = make_grid(&domain[1..], &[n]).into_iter().map(|p| p[0]).collect();
    let ic = xs
        .iter()
        .map(|&x| Constraint::Value { point: vec![x, 0.0], target: reaction_ic(x) })
        .collect();
    let bc = ts
        .iter()
        .map(|&t| Constraint::Periodic { a: vec![0.0, t], b: vec![2.0 * PI, t] })
        .collect();
    let terms = vec![
        residual_term(make_grid(&domain, &[n, n])),
        Term::new("ic", TermKind::Initial, ic),
        Term::new("bc", TermKind::Boundary, bc),
    ];
    let reference = match kind {
        ProblemKind::Reaction { rho } => Some(grid_reference(&domain, res.eval_grid, |p| exact_reaction(p[0], p[1], rho))),
        _ => None,
    };
    PdeProblem { name, kind, domain, terms, reference }
}

fn wave_problem(res: Resolution) -> PdeProblem {
    let domain = vec![(0.0, 1.0), (0.0, 1.0)];
    let n = res.grid;
    let axis: Vec<f64> = make_grid(&domain[..1], &[n]).into_iter().map(|p| p[0]).collect();
    let mut ic: Vec<Constraint> = axis
        .iter()
        .map(|&x| Constraint::Value { point: vec![x, 0.0], target: wave_ic(x) })
        .collect();
    ic.extend(axis.iter().map(|&x| Constraint::Derivative { point: vec![x, 0.0], index: 1, target: 0.0 }));
    let bc = axis
        .iter()
        .flat_map(|&t| {
            [
                Constraint::Value { point: vec![0.0, t], target: 0.0 },
                Constraint::Value { point: vec![1.0, t], target: 0.0 },
            ]
        })
        .collect();
    let terms = vec![
        residual_term(make_grid(&domain, &[n, n])),
        Term::new("ic", TermKind::Initial, ic),
        Term::new("bc", TermKind::Boundary, bc),
    ];
    let reference = Some(grid_reference(&domain, res.eval_grid, |p| exact_wave(p[0], p[1])));
    PdeProblem { name: ProblemName::Wave, kind: ProblemKind::Wave { beta: 3.0 }, domain, terms, reference }
}

fn het_problem(res: Resolution) -> PdeProblem {
    let (a1, a2, r0) = (1.0 / 15.0, 1.0, 0.5);
    let domain = vec![(-1.0, 1.0), (-1.0, 1.0)];
    let grid = make_grid(&domain, &[res.grid, res.grid]);
    let on_edge = |p: &[f64]| p.iter().any(|&c| c == -1.0 || c == 1.0);
    let bc = grid
        .iter()
        .filter(|p| on_edge(p))
        .map(|p| Constraint::Value { point: p.clone(), target: exact_poisson_het(p[0], p[1], a1, a2, r0) })
        .collect();
    let terms = vec![residual_term(grid), Term::new("bc", TermKind::Boundary, bc)];
    let reference = Some(grid_reference(&domain, res.eval_grid, |p| exact_poisson_het(p[0], p[1], a1, a2, r0)));
    PdeProblem { name: ProblemName::PoissonHet, kind: ProblemKind::PoissonHet { a1, a2, r0 }, domain, terms, reference }
}

fn geom_problem(res: Resolution) -> Result<PdeProblem, PdeError> {
    let mask = GeometryMask::four_holes();
    let pts = geometry_points(&mask, res.grid, res.circle_samples);
    let value = |points: Vec<Vec<f64>>, target: f64| -> Vec<Constraint> {
        points.into_iter().map(|point| Constraint::Value { point, target }).collect()
    };
    let terms = vec![
        residual_term(pts.interior),
        Term::new("bc_rect", TermKind::Boundary, value(pts.outer, 1.0)),
        Term::new("bc_holes", TermKind::Boundary, value(pts.holes, 0.0)),
    ];
    let field = fdm_oracle_laplace(&mask, res.eval_grid, 1.0, 0.0, FDM_TOLERANCE, FDM_MAX_SWEEPS)?;
    let mut reference = Reference { points: Vec::new(), values: Vec::new() };
    for j in 0..field.n {
        for i in 0..field.n {
            let (x, y) = field.coords(i, j);
            if !mask.in_hole(x, y) {
                reference.points.push(vec![x, y]);
                reference.values.push(field.at(i, j));
            }
        }
    }
    let domain = vec![mask.x, mask.y];
    Ok(PdeProblem {
        name: ProblemName::PoissonGeom,
        kind: ProblemKind::PoissonGeom { mask },
        domain,
        terms,
        reference: Some(reference),
    })
}

fn fit_problem(seed: u64) -> PdeProblem {
    let data = make_fit_dataset(&mut Rng::new(seed));
    let constraints = data
        .train_x
        .iter()
        .zip(&data.train_y)
        .map(|(&x, &y)| Constraint::Value { point: vec![x], target: y })
        .collect();
    let terms = vec![Term::new("r", TermKind::Data, constraints)];
    let reference = Some(Reference { points: data.test_x.iter().map(|&x| vec![x]).collect(), values: data.test_y });
    PdeProblem { name: ProblemName::Fit, kind: ProblemKind::Fit, domain: vec![(0.0, 2.0)], terms, reference }
}
