//! Small dense matrices and a one-sided Jacobi SVD.

use super::RankError;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, RankError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(RankError::Dimension { expected: cols, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Ok(DenseMatrix { rows: rows.len(), cols, values })
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, RankError> {
        if self.cols != other.rows {
            return Err(RankError::Dimension { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.values[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c) * x[c]).sum()).collect()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Convergence threshold on `|a_pᵀa_q| / (‖a_p‖‖a_q‖)`.
pub const SVD_TOLERANCE: f64 = 1e-12;
pub const SVD_MAX_SWEEPS: usize = 100;

/// Singular values in descending order by one-sided (Hestenes) Jacobi.
pub fn svd(m: &DenseMatrix) -> Result<Vec<f64>, RankError> {
    if !m.is_finite() {
        return Err(RankError::NonFinite);
    }
    // work on the tall orientation so there are at most min(rows, cols) columns
    let a = if m.rows >= m.cols { m.clone() } else { m.transpose() };
    let (rows, n) = (a.rows, a.cols);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|c| (0..rows).map(|r| a.get(r, c)).collect()).collect();

    let mut converged = n < 2;
    for _ in 0..SVD_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = cols[p].iter().zip(&cols[q]).fold((0.0, 0.0, 0.0), |(a, b, g), (x, y)| {
                    (a + x * x, b + y * y, g + x * y)
                });
                if gamma == 0.0 || gamma.abs() <= SVD_TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(RankError::NoConvergence { sweeps: SVD_MAX_SWEEPS });
    }
    let mut sigma: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(sigma)
}

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations,
/// in descending order.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>, RankError> {
    if m.rows != m.cols {
        return Err(RankError::Dimension { expected: m.rows, got: m.cols });
    }
    let n = m.rows;
    let mut a = m.clone();
    let off = |a: &DenseMatrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a.get(i, j).powi(2);
                }
            }
        }
        s
    };
    let scale: f64 = a.values.iter().map(|v| v * v).sum();
    let mut sweeps = 0;
    while off(&a) > SVD_TOLERANCE * SVD_TOLERANCE * scale {
        sweeps += 1;
        if sweeps > SVD_MAX_SWEEPS {
            return Err(RankError::NoConvergence { sweeps: SVD_MAX_SWEEPS });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// `‖M‖₂` by power iteration on `MᵀM`.
pub fn spectral_norm_power(m: &DenseMatrix, iterations: usize) -> f64 {
    let mt = m.transpose();
    let mut v: Vec<f64> = (0..m.cols).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = mt.matvec(&m.matvec(&v));
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda.sqrt()
}

/// `#{ i : σ_i ≥ ε σ₁ }`; an all-zero spectrum has rank 0.
pub fn numerical_rank(sigma: &[f64], eps: f64) -> usize {
    match sigma.first() {
        Some(&s1) if s1 > 0.0 => sigma.iter().filter(|&&s| s >= eps * s1).count(),
        _ => 0,
    }
}
