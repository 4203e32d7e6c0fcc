//! Append-only Wengert list with reverse-mode adjoints.
//!
//! Every node stores its value and the local partial derivatives with
//! respect to its parents, evaluated at record time. A single reverse sweep
//! in descending node order accumulates adjoints. Besides scalar nodes the
//! tape records one block primitive, a dense matrix product whose outputs
//! occupy a contiguous id range; it is swept as a unit.

use super::AutodiffError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The node `k` positions after this one. Only meaningful inside a
    /// contiguous leaf range such as a registered parameter tensor.
    pub fn offset(self, k: usize) -> Var {
        Var(self.0 + k as u32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Tanh,
    Sin,
    Cos,
    Exp,
    Neg,
    Square,
    Sqrt,
    Ln,
    Abs,
    Recip,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Tanh => "tanh",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Neg => "neg",
            UnaryOp::Square => "square",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Ln => "ln",
            UnaryOp::Abs => "abs",
            UnaryOp::Recip => "recip",
        }
    }

    /// Value and first three derivatives at `x`, or a domain error.
    pub fn derivatives(self, x: f64) -> Result<[f64; 4], AutodiffError> {
        let d = match self {
            UnaryOp::Tanh => {
                let t = x.tanh();
                let s = 1.0 - t * t;
                [t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)]
            }
            UnaryOp::Sin => {
                let (s, c) = x.sin_cos();
                [s, c, -s, -c]
            }
            UnaryOp::Cos => {
                let (s, c) = x.sin_cos();
                [c, -s, -c, s]
            }
            UnaryOp::Exp => {
                let e = x.exp();
                [e, e, e, e]
            }
            UnaryOp::Neg => [-x, -1.0, 0.0, 0.0],
            UnaryOp::Square => [x * x, 2.0 * x, 2.0, 0.0],
            UnaryOp::Sqrt => {
                if x <= 0.0 || x.is_nan() {
                    return Err(AutodiffError::Domain { op: "sqrt", value: x });
                }
                let r = x.sqrt();
                [r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x)]
            }
            UnaryOp::Ln => {
                if x <= 0.0 || x.is_nan() {
                    return Err(AutodiffError::Domain { op: "ln", value: x });
                }
                let inv = 1.0 / x;
                [x.ln(), inv, -inv * inv, 2.0 * inv * inv * inv]
            }
            // subgradient 0 at the kink
            UnaryOp::Abs => [x.abs(), if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }, 0.0, 0.0],
            UnaryOp::Recip => {
                if x == 0.0 || x.is_nan() {
                    return Err(AutodiffError::Domain { op: "recip", value: x });
                }
                let inv = 1.0 / x;
                let inv2 = inv * inv;
                [inv, -inv2, 2.0 * inv2 * inv, -6.0 * inv2 * inv2]
            }
        };
        Ok(d)
    }
}

/// What produced a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Param,
    Binary(BinaryOp),
    Unary(UnaryOp),
    /// Derivative factor `f'(a)` or `f''(a)` recorded so that jet arithmetic
    /// stays differentiable with respect to parameters.
    Derivative,
    /// Linear combination over an arbitrary number of parents.
    Sum,
    /// One output of a block matrix product.
    MatMul,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: OpKind,
    /// Edge range start, or block index for `MatMul` outputs.
    start: u32,
    len: u32,
}

#[derive(Clone, Debug)]
struct MatMulBlock {
    /// First id of the `rows x inner` row-major coefficient range.
    a_start: u32,
    rows: u32,
    inner: u32,
    cols: u32,
    /// Offset into `block_ids` of the `inner x cols` row-major operand ids.
    x_offset: u32,
    /// First id of a contiguous `rows` bias range added to column 0.
    bias_start: Option<u32>,
    out_start: u32,
}

/// Adjoints of the parameter leaves of a tape, in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        GradientVector(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        GradientVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &GradientVector) {
        assert_eq!(self.len(), other.len(), "gradient length mismatch");
        for (s, o) in self.0.iter_mut().zip(&other.0) {
            *s += alpha * o;
        }
    }
}

/// Dynamic computation graph over `f64` scalars.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    values: Vec<f64>,
    nodes: Vec<Node>,
    edge_parents: Vec<u32>,
    edge_partials: Vec<f64>,
    params: Vec<u32>,
    blocks: Vec<MatMulBlock>,
    block_ids: Vec<u32>,
    zero: Option<Var>,
    one: Option<Var>,
    adjoints: Vec<f64>,
    scratch: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops all nodes while keeping allocations for reuse.
    pub fn clear(&mut self) {
        self.values.clear();
        self.nodes.clear();
        self.edge_parents.clear();
        self.edge_partials.clear();
        self.params.clear();
        self.blocks.clear();
        self.block_ids.clear();
        self.zero = None;
        self.one = None;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of parameter leaves registered so far.
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    pub fn op(&self, v: Var) -> OpKind {
        self.nodes[v.index()].op
    }

    /// Parent ids of a scalar node. Empty for leaves and block outputs.
    pub fn parents(&self, v: Var) -> Vec<Var> {
        let node = self.nodes[v.index()];
        if node.op == OpKind::MatMul {
            return Vec::new();
        }
        let r = node.start as usize..(node.start + node.len) as usize;
        self.edge_parents[r].iter().map(|&p| Var(p)).collect()
    }

    /// Local partial derivatives recorded for a scalar node.
    pub fn partials(&self, v: Var) -> &[f64] {
        let node = self.nodes[v.index()];
        if node.op == OpKind::MatMul {
            return &[];
        }
        &self.edge_partials[node.start as usize..(node.start + node.len) as usize]
    }

    fn next_id(&self) -> u32 {
        u32::try_from(self.nodes.len()).expect("tape exceeds u32 node ids")
    }

    /// Records a node with explicit `(parent, local partial)` edges.
    pub fn push(&mut self, value: f64, op: OpKind, edges: &[(Var, f64)]) -> Var {
        let start = self.edge_parents.len() as u32;
        for &(p, d) in edges {
            self.edge(p, d);
        }
        self.finish(start, value, op)
    }

    /// Appends one edge of the node under construction.
    #[inline]
    pub(crate) fn edge(&mut self, parent: Var, partial: f64) {
        debug_assert!(parent.index() < self.nodes.len(), "parent must precede child");
        self.edge_parents.push(parent.0);
        self.edge_partials.push(partial);
    }

    /// Closes a node whose edges were appended since `start`.
    #[inline]
    pub(crate) fn finish(&mut self, start: u32, value: f64, op: OpKind) -> Var {
        let id = self.next_id();
        let len = self.edge_parents.len() as u32 - start;
        self.nodes.push(Node { op, start, len });
        self.values.push(value);
        Var(id)
    }

    #[inline]
    pub(crate) fn edge_start(&self) -> u32 {
        self.edge_parents.len() as u32
    }

    pub fn leaf(&mut self, value: f64, is_parameter: bool) -> Var {
        let op = if is_parameter { OpKind::Param } else { OpKind::Leaf };
        let v = self.push(value, op, &[]);
        if is_parameter {
            self.params.push(v.0);
        }
        v
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: f64) -> Var {
        self.leaf(value, true)
    }

    /// Registers a contiguous run of parameter leaves and returns the first.
    pub fn register_params(&mut self, values: &[f64]) -> Var {
        let first = Var(self.next_id());
        for &v in values {
            self.leaf(v, true);
        }
        first
    }

    /// Shared constant-zero leaf.
    pub fn zero(&mut self) -> Var {
        match self.zero {
            Some(z) => z,
            None => {
                let z = self.constant(0.0);
                self.zero = Some(z);
                z
            }
        }
    }

    /// Shared constant-one leaf.
    pub fn one(&mut self) -> Var {
        match self.one {
            Some(o) => o,
            None => {
                let o = self.constant(1.0);
                self.one = Some(o);
                o
            }
        }
    }

    pub fn binary(&mut self, kind: BinaryOp, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        let op = OpKind::Binary(kind);
        let v = match kind {
            BinaryOp::Add => self.push(x + y, op, &[(a, 1.0), (b, 1.0)]),
            BinaryOp::Sub => self.push(x - y, op, &[(a, 1.0), (b, -1.0)]),
            BinaryOp::Mul => self.push(x * y, op, &[(a, y), (b, x)]),
            BinaryOp::Div => {
                if y == 0.0 {
                    return Err(AutodiffError::Domain { op: "div", value: y });
                }
                let inv = 1.0 / y;
                self.push(x * inv, op, &[(a, inv), (b, -x * inv * inv)])
            }
        };
        Ok(v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x + y, OpKind::Binary(BinaryOp::Add), &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x - y, OpKind::Binary(BinaryOp::Sub), &[(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, OpKind::Binary(BinaryOp::Mul), &[(a, y), (b, x)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(BinaryOp::Div, a, b)
    }

    pub fn unary(&mut self, kind: UnaryOp, a: Var) -> Result<Var, AutodiffError> {
        let d = kind.derivatives(self.value(a))?;
        Ok(self.push(d[0], OpKind::Unary(kind), &[(a, d[1])]))
    }

    fn unary_total(&mut self, kind: UnaryOp, a: Var) -> Var {
        self.unary(kind, a).expect("total unary op cannot fail")
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary_total(UnaryOp::Tanh, a)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary_total(UnaryOp::Sin, a)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary_total(UnaryOp::Cos, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary_total(UnaryOp::Exp, a)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary_total(UnaryOp::Neg, a)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary_total(UnaryOp::Square, a)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary_total(UnaryOp::Abs, a)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(UnaryOp::Sqrt, a)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(UnaryOp::Ln, a)
    }

    /// `Σ coeff·var + constant` as a single node.
    pub fn linear_combination(&mut self, terms: &[(f64, Var)], constant: f64) -> Var {
        let start = self.edge_start();
        let mut value = constant;
        for &(c, v) in terms {
            value += c * self.value(v);
            self.edge(v, c);
        }
        self.finish(start, value, OpKind::Sum)
    }

    /// `Σ a·b` over the given pairs as a single node.
    pub fn sum_of_products(&mut self, pairs: &[(Var, Var)]) -> Var {
        self.sum_of_products_iter(pairs.iter().copied())
    }

    pub(crate) fn sum_of_products_iter(&mut self, pairs: impl Iterator<Item = (Var, Var)>) -> Var {
        let start = self.edge_start();
        let mut value = 0.0;
        for (a, b) in pairs {
            let (x, y) = (self.value(a), self.value(b));
            value += x * y;
            self.edge(a, y);
            self.edge(b, x);
        }
        self.finish(start, value, OpKind::Sum)
    }

    /// Dense product `Y = A·X (+ bias on column 0)`.
    ///
    /// `a_start` is the first of `rows·inner` contiguous nodes holding `A`
    /// row-major; `x` lists `inner·cols` operand ids row-major; `bias_start`
    /// is the first of `rows` contiguous nodes. Returns the first output id;
    /// output `(k, c)` lives at offset `k·cols + c`.
    pub fn matmul(
        &mut self,
        a_start: Var,
        rows: usize,
        inner: usize,
        x: &[Var],
        cols: usize,
        bias_start: Option<Var>,
    ) -> Var {
        assert_eq!(x.len(), inner * cols, "matmul operand size mismatch");
        let next = self.next_id() as usize;
        assert!(a_start.index() + rows * inner <= next, "matmul coefficients out of range");
        if let Some(b) = bias_start {
            assert!(b.index() + rows <= next, "matmul bias out of range");
        }
        let x_offset = self.block_ids.len() as u32;
        self.block_ids.extend(x.iter().map(|v| v.0));
        let out_start = self.next_id();
        let block = self.blocks.len() as u32;
        let a0 = a_start.index();
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        scratch.extend(x.iter().map(|v| self.values[v.index()]));
        scratch.resize(x.len() + rows * cols, 0.0);
        let (xv, out) = scratch.split_at_mut(x.len());
        for k in 0..rows {
            let acc = &mut out[k * cols..(k + 1) * cols];
            let arow = &self.values[a0 + k * inner..a0 + (k + 1) * inner];
            if cols == 1 {
                acc[0] = arow.iter().zip(xv.iter()).fold(0.0, |s, (a, x)| s + a * x);
            } else {
                for (&a, xr) in arow.iter().zip(xv.chunks_exact(cols)) {
                    for (s, &xx) in acc.iter_mut().zip(xr) {
                        *s += a * xx;
                    }
                }
            }
            if let Some(b) = bias_start {
                acc[0] += self.values[b.index() + k];
            }
        }
        self.values.extend_from_slice(out);
        self.nodes.extend(std::iter::repeat(Node { op: OpKind::MatMul, start: block, len: 0 }).take(rows * cols));
        self.scratch = scratch;
        self.blocks.push(MatMulBlock {
            a_start: a_start.0,
            rows: rows as u32,
            inner: inner as u32,
            cols: cols as u32,
            x_offset,
            bias_start: bias_start.map(|b| b.0),
            out_start,
        });
        Var(out_start)
    }

    /// Reverse sweep from `loss`; returns adjoints of all parameter leaves
    /// in registration order.
    pub fn backward(&mut self, loss: Var) -> GradientVector {
        self.backward_seeded(&[(loss, 1.0)])
    }

    /// Reverse sweep with several seeded adjoints at once.
    pub fn backward_seeded(&mut self, seeds: &[(Var, f64)]) -> GradientVector {
        let n = self.nodes.len();
        let mut adj = std::mem::take(&mut self.adjoints);
        adj.clear();
        adj.resize(n, 0.0);
        let mut top = 0usize;
        for &(v, s) in seeds {
            adj[v.index()] += s;
            top = top.max(v.index() + 1);
        }
        let mut i = top;
        while i > 0 {
            i -= 1;
            let node = self.nodes[i];
            if node.op == OpKind::MatMul {
                let block = &self.blocks[node.start as usize];
                self.matmul_backward(block, &mut adj);
                i = block.out_start as usize;
                continue;
            }
            let g = adj[i];
            if g == 0.0 || node.len == 0 {
                continue;
            }
            let r = node.start as usize..(node.start + node.len) as usize;
            for (&p, &d) in self.edge_parents[r.clone()].iter().zip(&self.edge_partials[r]) {
                adj[p as usize] += g * d;
            }
        }
        let grads = self.params.iter().map(|&p| adj[p as usize]).collect();
        self.adjoints = adj;
        GradientVector(grads)
    }

    fn matmul_backward(&self, b: &MatMulBlock, adj: &mut [f64]) {
        let (rows, inner, cols) = (b.rows as usize, b.inner as usize, b.cols as usize);
        let out = b.out_start as usize;
        let a0 = b.a_start as usize;
        let xids = &self.block_ids[b.x_offset as usize..b.x_offset as usize + inner * cols];
        let mut buf = [0.0; 16];
        let mut heap = Vec::new();
        for k in 0..rows {
            let src = &adj[out + k * cols..out + (k + 1) * cols];
            if src.iter().all(|&x| x == 0.0) {
                continue;
            }
            let g: &mut [f64] = if cols <= buf.len() {
                &mut buf[..cols]
            } else {
                heap.resize(cols, 0.0);
                &mut heap[..]
            };
            g.copy_from_slice(src);
            if let Some(bs) = b.bias_start {
                adj[bs as usize + k] += g[0];
            }
            for j in 0..inner {
                let ids = &xids[j * cols..(j + 1) * cols];
                let a = self.values[a0 + k * inner + j];
                let mut da = 0.0;
                for (c, &id) in ids.iter().enumerate() {
                    da += g[c] * self.values[id as usize];
                    adj[id as usize] += g[c] * a;
                }
                adj[a0 + k * inner + j] += da;
            }
        }
    }
}
