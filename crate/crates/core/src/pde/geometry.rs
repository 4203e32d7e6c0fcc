//! Rectangle-with-holes geometry and its finite-difference Laplace oracle.

use super::{make_grid, PdeError};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    /// Closed disc membership.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).powi(2) + (y - self.cy).powi(2) <= self.r * self.r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryMask {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub circles: Vec<Circle>,
}

impl GeometryMask {
    pub fn new(x: (f64, f64), y: (f64, f64), circles: Vec<Circle>) -> Result<Self, PdeError> {
        if !(x.0 < x.1 && y.0 < y.1) {
            return Err(PdeError::InvalidGeometry("empty rectangle".into()));
        }
        for c in &circles {
            let inside = c.r > 0.0 && c.cx - c.r >= x.0 && c.cx + c.r <= x.1 && c.cy - c.r >= y.0 && c.cy + c.r <= y.1;
            if !inside {
                return Err(PdeError::InvalidGeometry(format!("circle {c:?} leaves the rectangle")));
            }
        }
        Ok(GeometryMask { x, y, circles })
    }

    /// `[-0.5, 0.5]²` with four discs of radius 0.1 centred at `(±0.3, ±0.3)`.
    pub fn four_holes() -> Self {
        let circles = [(0.3, 0.3), (-0.3, 0.3), (0.3, -0.3), (-0.3, -0.3)]
            .iter()
            .map(|&(cx, cy)| Circle { cx, cy, r: 0.1 })
            .collect();
        GeometryMask::new((-0.5, 0.5), (-0.5, 0.5), circles).expect("static geometry is valid")
    }

    pub fn in_hole(&self, x: f64, y: f64) -> bool {
        self.circles.iter().any(|c| c.contains(x, y))
    }

    /// Inside the closed rectangle and outside every disc.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1 && !self.in_hole(x, y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryPoints {
    pub interior: Vec<Vec<f64>>,
    /// Rectangle edge samples, target 1.
    pub outer: Vec<Vec<f64>>,
    /// Circle samples, target 0.
    pub holes: Vec<Vec<f64>>,
}

/// Masked `n × n` grid plus `n` samples per rectangle edge and
/// `circle_samples` equally spaced angles per circle, starting at angle 0.
pub fn geometry_points(mask: &GeometryMask, n: usize, circle_samples: usize) -> GeometryPoints {
    let interior = make_grid(&[mask.x, mask.y], &[n, n])
        .into_iter()
        .filter(|p| !mask.in_hole(p[0], p[1]))
        .collect();
    let step = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / (n - 1) as f64;
    let mut outer = Vec::with_capacity(4 * n);
    for k in 0..n {
        outer.push(vec![step(mask.x.0, mask.x.1, k), mask.y.0]);
    }
    for k in 0..n {
        outer.push(vec![mask.x.1, step(mask.y.0, mask.y.1, k)]);
    }
    for k in 0..n {
        outer.push(vec![step(mask.x.1, mask.x.0, k), mask.y.1]);
    }
    for k in 0..n {
        outer.push(vec![mask.x.0, step(mask.y.1, mask.y.0, k)]);
    }
    let mut holes = Vec::with_capacity(mask.circles.len() * circle_samples);
    for c in &mask.circles {
        for k in 0..circle_samples {
            let a = 2.0 * PI * k as f64 / circle_samples as f64;
            holes.push(vec![c.cx + c.r * a.cos(), c.cy + c.r * a.sin()]);
        }
    }
    GeometryPoints { interior, outer, holes }
}

/// Grid solution of the Laplace equation, `x` index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FdmField {
    pub n: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub values: Vec<f64>,
    /// Dirichlet nodes: rectangle edge or inside a hole.
    pub fixed: Vec<bool>,
    pub sweeps: usize,
}

impl FdmField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let h = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / (self.n - 1) as f64;
        (h(self.x.0, self.x.1, i), h(self.y.0, self.y.1, j))
    }

    /// One more Gauss–Seidel sweep; returns the largest update.
    pub fn sweep(&mut self) -> f64 {
        let n = self.n;
        let mut max_update: f64 = 0.0;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = j * n + i;
                if self.fixed[k] {
                    continue;
                }
                let v = &self.values;
                let new = 0.25 * (v[k - 1] + v[k + 1] + v[k - n] + v[k + n]);
                max_update = max_update.max((new - self.values[k]).abs());
                self.values[k] = new;
            }
        }
        max_update
    }
}

/// Five-point Gauss–Seidel solve with `outer_value` on the rectangle edge and
/// `hole_value` on nodes inside the discs. Free nodes start at the mean of the
/// fixed values.
pub fn fdm_oracle_laplace(
    mask: &GeometryMask,
    n: usize,
    outer_value: f64,
    hole_value: f64,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<FdmField, PdeError> {
    if n < 3 {
        return Err(PdeError::InvalidResolution(format!("FDM grid needs n ≥ 3, got {n}")));
    }
    let mut field = FdmField {
        n,
        x: mask.x,
        y: mask.y,
        values: vec![0.0; n * n],
        fixed: vec![false; n * n],
        sweeps: 0,
    };
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let (x, y) = field.coords(i, j);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                field.fixed[k] = true;
                field.values[k] = outer_value;
            } else if mask.in_hole(x, y) {
                field.fixed[k] = true;
                field.values[k] = hole_value;
            }
        }
    }
    let fixed: Vec<f64> = field.values.iter().zip(&field.fixed).filter(|(_, &f)| f).map(|(&v, _)| v).collect();
    let start = fixed.iter().sum::<f64>() / fixed.len() as f64;
    for (v, &f) in field.values.iter_mut().zip(&field.fixed) {
        if !f {
            *v = start;
        }
    }
    while field.sweeps < max_sweeps {
        field.sweeps += 1;
        if field.sweep() < tolerance {
            return Ok(field);
        }
    }
    Err(PdeError::NoConvergence { sweeps: max_sweeps })
}
