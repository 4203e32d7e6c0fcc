//! Second-order truncated Taylor arithmetic over tape variables.
//!
//! A [`Jet`] carries `u`, `∂u/∂x_i` and the upper triangle of `∂²u/∂x_i∂x_j`
//! with respect to up to three PDE inputs. Every component is itself a tape
//! variable, so derivatives of the network output with respect to its inputs
//! remain differentiable with respect to the network parameters.

use super::tape::{OpKind, Tape, UnaryOp, Var};
use super::AutodiffError;

pub const MAX_JET_DIM: usize = 3;
const MAX_COMPONENTS: usize = 1 + MAX_JET_DIM + MAX_JET_DIM * (MAX_JET_DIM + 1) / 2;

/// Highest derivative order carried by a jet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JetOrder {
    Value = 0,
    First = 1,
    Second = 2,
}

/// Number of stored components for a jet of the given dimension and order.
pub fn component_count(dim: usize, order: JetOrder) -> usize {
    match order {
        JetOrder::Value => 1,
        JetOrder::First => 1 + dim,
        JetOrder::Second => 1 + dim + dim * (dim + 1) / 2,
    }
}

/// Position of `∂²/∂x_i∂x_j` inside the upper-triangular Hessian storage.
pub fn hess_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

#[derive(Clone, Copy, Debug)]
pub struct Jet {
    dim: u8,
    order: JetOrder,
    comps: [Var; MAX_COMPONENTS],
}

impl Jet {
    /// Assembles a jet from its raw components `[val, grad.., hess..]`.
    pub fn from_components(dim: usize, order: JetOrder, comps: &[Var]) -> Self {
        debug_assert!((1..=MAX_JET_DIM).contains(&dim), "jet dimension must be 1..=3");
        debug_assert_eq!(comps.len(), component_count(dim, order));
        let mut arr = [Var(0); MAX_COMPONENTS];
        arr[..comps.len()].copy_from_slice(comps);
        Jet { dim: dim as u8, order, comps: arr }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn len(&self) -> usize {
        component_count(self.dim(), self.order)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> &[Var] {
        &self.comps[..self.len()]
    }

    pub fn val(&self) -> Var {
        self.comps[0]
    }

    pub fn grads(&self) -> &[Var] {
        assert!(self.order >= JetOrder::First, "jet carries no first derivatives");
        &self.comps[1..1 + self.dim()]
    }

    pub fn grad(&self, i: usize) -> Var {
        self.grads()[i]
    }

    pub fn hess_slots(&self) -> &[Var] {
        assert!(self.order == JetOrder::Second, "jet carries no second derivatives");
        &self.comps[1 + self.dim()..self.len()]
    }

    pub fn hess(&self, i: usize, j: usize) -> Var {
        let d = self.dim();
        assert!(i < d && j < d, "hessian index out of range");
        self.hess_slots()[hess_index(d, i, j)]
    }

    /// Numeric values of all components.
    pub fn values(&self, tape: &Tape) -> Vec<f64> {
        self.components().iter().map(|&v| tape.value(v)).collect()
    }
}

/// Iterates `(slot, i, j)` over the upper-triangular Hessian layout.
fn hess_pairs(dim: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..dim)
        .flat_map(move |i| (i..dim).map(move |j| (i, j)))
        .enumerate()
        .map(|(s, (i, j))| (s, i, j))
}

/// `(i, j)` of upper-triangular Hessian slot `s`.
fn hess_coords(dim: usize, s: usize) -> (usize, usize) {
    hess_pairs(dim).nth(s).map(|(_, i, j)| (i, j)).expect("Hessian slot out of range")
}

fn check_same_shape(a: &Jet, b: &Jet) -> Result<(), AutodiffError> {
    if a.dim != b.dim || a.order != b.order {
        return Err(AutodiffError::JetMismatch {
            left: (a.dim(), a.order as usize),
            right: (b.dim(), b.order as usize),
        });
    }
    Ok(())
}

impl Tape {
    /// Seeds input `index` of a `dim`-dimensional second-order jet.
    pub fn jet_input(&mut self, value: f64, index: usize, dim: usize) -> Result<Jet, AutodiffError> {
        self.jet_input_with_order(value, index, dim, JetOrder::Second)
    }

    pub fn jet_input_with_order(
        &mut self,
        value: f64,
        index: usize,
        dim: usize,
        order: JetOrder,
    ) -> Result<Jet, AutodiffError> {
        if dim == 0 || dim > MAX_JET_DIM || index >= dim {
            return Err(AutodiffError::IndexOutOfRange { index, dim });
        }
        let val = self.constant(value);
        let zero = self.zero();
        let one = self.one();
        let mut comps = [zero; MAX_COMPONENTS];
        comps[0] = val;
        if order >= JetOrder::First {
            comps[1 + index] = one;
        }
        Ok(Jet::from_components(dim, order, &comps[..component_count(dim, order)]))
    }

    /// Lifts a variable that does not depend on the PDE inputs.
    pub fn jet_broadcast(&mut self, v: Var, dim: usize, order: JetOrder) -> Jet {
        let zero = self.zero();
        let mut comps = [zero; MAX_COMPONENTS];
        comps[0] = v;
        Jet::from_components(dim, order, &comps[..component_count(dim, order)])
    }

    pub fn jet_constant(&mut self, value: f64, dim: usize, order: JetOrder) -> Jet {
        let v = self.constant(value);
        self.jet_broadcast(v, dim, order)
    }

    pub fn jet_add(&mut self, a: &Jet, b: &Jet) -> Result<Jet, AutodiffError> {
        self.jet_lincomb(&[(1.0, a), (1.0, b)], 0.0)
    }

    pub fn jet_sub(&mut self, a: &Jet, b: &Jet) -> Result<Jet, AutodiffError> {
        self.jet_lincomb(&[(1.0, a), (-1.0, b)], 0.0)
    }

    /// `Σ c_k·a_k + constant`, one node per component.
    pub fn jet_lincomb(&mut self, terms: &[(f64, &Jet)], constant: f64) -> Result<Jet, AutodiffError> {
        let first = terms.first().expect("empty linear combination").1;
        for (_, t) in terms {
            check_same_shape(first, t)?;
        }
        let n = first.len();
        let mut comps = [Var(0); MAX_COMPONENTS];
        for (c, slot) in comps.iter_mut().enumerate().take(n) {
            let start = self.edge_start();
            let mut value = if c == 0 { constant } else { 0.0 };
            for &(k, j) in terms {
                value += k * self.value(j.comps[c]);
                self.edge(j.comps[c], k);
            }
            *slot = self.finish(start, value, OpKind::Sum);
        }
        Ok(Jet::from_components(first.dim(), first.order, &comps[..n]))
    }

    pub fn jet_scale(&mut self, a: &Jet, c: f64) -> Jet {
        self.jet_lincomb(&[(c, a)], 0.0).expect("single-term combination")
    }

    pub fn jet_add_const(&mut self, a: &Jet, c: f64) -> Jet {
        self.jet_lincomb(&[(1.0, a)], c).expect("single-term combination")
    }

    pub fn jet_mul(&mut self, a: &Jet, b: &Jet) -> Result<Jet, AutodiffError> {
        self.jet_dot(&[(*a, *b)])
    }

    /// `Σ_k a_k·b_k` with truncated Leibniz rules, one node per component.
    pub fn jet_dot(&mut self, pairs: &[(Jet, Jet)]) -> Result<Jet, AutodiffError> {
        self.jet_fused(1.0, pairs, &[], 0.0)
    }

    /// `scale·Σ_k a_k·b_k + Σ_j c_j·d_j + constant`, one node per component.
    pub fn jet_fused(
        &mut self,
        scale: f64,
        pairs: &[(Jet, Jet)],
        terms: &[(f64, &Jet)],
        constant: f64,
    ) -> Result<Jet, AutodiffError> {
        let a0 = pairs.first().map(|p| &p.0).or(terms.first().map(|t| t.1)).expect("empty jet expression");
        for (a, b) in pairs {
            check_same_shape(a0, a)?;
            check_same_shape(a0, b)?;
        }
        for (_, d) in terms {
            check_same_shape(a0, d)?;
        }
        let (dim, order) = (a0.dim(), a0.order);
        let n = component_count(dim, order);
        let mut comps = [Var(0); MAX_COMPONENTS];
        for (c, slot) in comps.iter_mut().enumerate().take(n) {
            let start = self.edge_start();
            let mut value = if c == 0 { constant } else { 0.0 };
            for (a, b) in pairs {
                let mut product = |tape: &mut Tape, p: Var, q: Var| {
                    let (x, y) = (tape.value(p), tape.value(q));
                    value += scale * x * y;
                    tape.edge(p, scale * y);
                    tape.edge(q, scale * x);
                };
                if c == 0 {
                    product(self, a.val(), b.val());
                } else if c <= dim {
                    product(self, a.comps[c], b.val());
                    product(self, a.val(), b.comps[c]);
                } else {
                    let (i, j) = hess_coords(dim, c - 1 - dim);
                    product(self, a.comps[c], b.val());
                    product(self, a.comps[1 + i], b.comps[1 + j]);
                    product(self, a.comps[1 + j], b.comps[1 + i]);
                    product(self, a.val(), b.comps[c]);
                }
            }
            for &(k, d) in terms {
                value += k * self.value(d.comps[c]);
                self.edge(d.comps[c], k);
            }
            *slot = self.finish(start, value, OpKind::Sum);
        }
        Ok(Jet::from_components(dim, order, &comps[..n]))
    }

    /// `w·a` for a scalar variable `w` constant in the PDE inputs.
    pub fn jet_mul_var(&mut self, a: &Jet, w: Var) -> Jet {
        self.jet_var_combination(&[(w, a)], None).expect("single-term combination")
    }

    /// `Σ w_k·a_k (+ shift on the value)` with scalar variables `w_k`, `shift`.
    pub fn jet_var_combination(&mut self, terms: &[(Var, &Jet)], shift: Option<Var>) -> Result<Jet, AutodiffError> {
        let first = terms.first().expect("empty combination").1;
        for (_, t) in terms {
            check_same_shape(first, t)?;
        }
        let n = first.len();
        let mut comps = [Var(0); MAX_COMPONENTS];
        for (c, slot) in comps.iter_mut().enumerate().take(n) {
            let mut v = self.sum_of_products_iter(terms.iter().map(|&(w, j)| (w, j.comps[c])));
            if c == 0 {
                if let Some(b) = shift {
                    v = self.add(v, b);
                }
            }
            *slot = v;
        }
        Ok(Jet::from_components(first.dim(), first.order, &comps[..n]))
    }

    /// Chain rule for a scalar function: `f′·a′` and `f″·a′_i a′_j + f′·a″_ij`.
    pub fn jet_unary(&mut self, kind: UnaryOp, a: &Jet) -> Result<Jet, AutodiffError> {
        let x = a.val();
        let d = kind.derivatives(self.value(x))?;
        let (dim, order) = (a.dim(), a.order);
        let mut comps = [Var(0); MAX_COMPONENTS];
        comps[0] = self.push(d[0], OpKind::Unary(kind), &[(x, d[1])]);
        if order == JetOrder::Value {
            return Ok(Jet::from_components(dim, order, &comps[..1]));
        }
        let f1 = self.push(d[1], OpKind::Derivative, &[(x, d[2])]);
        for i in 0..dim {
            comps[1 + i] = self.sum_of_products(&[(f1, a.comps[1 + i])]);
        }
        if order == JetOrder::Second {
            let f2 = self.push(d[2], OpKind::Derivative, &[(x, d[3])]);
            let v1 = d[1];
            let v2 = d[2];
            for (s, i, j) in hess_pairs(dim) {
                let h = 1 + dim + s;
                let (gi, gj, hij) = (a.comps[1 + i], a.comps[1 + j], a.comps[h]);
                let (xi, xj, xij) = (self.value(gi), self.value(gj), self.value(hij));
                let value = v2 * xi * xj + v1 * xij;
                let mut edges = [(f2, xi * xj), (f1, xij), (hij, v1), (gi, v2 * xj), (gj, v2 * xi)];
                let edges: &[(Var, f64)] = if i == j {
                    edges[3].1 = 2.0 * v2 * xi;
                    &edges[..4]
                } else {
                    &edges[..]
                };
                comps[h] = self.push(value, OpKind::Sum, edges);
            }
        }
        Ok(Jet::from_components(dim, order, &comps[..component_count(dim, order)]))
    }

    pub fn jet_tanh(&mut self, a: &Jet) -> Jet {
        self.jet_unary(UnaryOp::Tanh, a).expect("tanh is total")
    }

    pub fn jet_sin(&mut self, a: &Jet) -> Jet {
        self.jet_unary(UnaryOp::Sin, a).expect("sin is total")
    }

    pub fn jet_cos(&mut self, a: &Jet) -> Jet {
        self.jet_unary(UnaryOp::Cos, a).expect("cos is total")
    }

    pub fn jet_div(&mut self, a: &Jet, b: &Jet) -> Result<Jet, AutodiffError> {
        let r = self.jet_unary(UnaryOp::Recip, b)?;
        self.jet_mul(a, &r)
    }

    /// Same jet truncated to a lower order.
    pub fn jet_truncate(&self, a: &Jet, order: JetOrder) -> Jet {
        assert!(order <= a.order, "cannot raise jet order");
        Jet::from_components(a.dim(), order, &a.comps[..component_count(a.dim(), order)])
    }
}
