//! Reverse-mode automatic differentiation on a dynamically built tape.
//!
//! Every node holds a dense `f64` matrix; scalars are `1 x 1`. Elementwise
//! binary operations broadcast along any axis of length one, so a `1 x 1`
//! parameter can be combined with an `n x 1` batch column and a `1 x m`
//! bias row can be added to an `n x m` activation block.
//!
//! The tape is append-only. Building a node never mutates earlier nodes, so
//! construction order is a valid topological order and [`Tape::backward`]
//! simply walks the nodes in reverse.

mod check;
mod tridiag;

pub use check::{grad_check, GradCheckReport};
pub use tridiag::TridiagonalSystem;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};

/// Dense node value. Rows index batch elements, columns features.
pub type Matrix = Array2<f64>;

/// Handle to a node registered on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation tag, used by [`Tape::apply`] to build nodes generically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpTag {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sqrt,
    Square,
    Abs,
    Tanh,
    Sigmoid,
    Relu,
    MaxZero,
    MatMul,
    Sum,
    Mean,
}

impl OpTag {
    pub const ALL: [OpTag; 17] = [
        OpTag::Add,
        OpTag::Sub,
        OpTag::Mul,
        OpTag::Div,
        OpTag::Neg,
        OpTag::Exp,
        OpTag::Log,
        OpTag::Sqrt,
        OpTag::Square,
        OpTag::Abs,
        OpTag::Tanh,
        OpTag::Sigmoid,
        OpTag::Relu,
        OpTag::MaxZero,
        OpTag::MatMul,
        OpTag::Sum,
        OpTag::Mean,
    ];

    pub fn arity(self) -> usize {
        match self {
            OpTag::Add | OpTag::Sub | OpTag::Mul | OpTag::Div | OpTag::MatMul => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Square(Var),
    Abs(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Clamp(Var, f64, f64),
    MatMul(Var, Var),
    Sum(Var),
    Mean(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    TridiagSolve { sub: Var, main: Var, sup: Var, rhs: Var },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b) => {
                vec![*a, *b]
            }
            Op::Neg(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::Abs(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Clamp(a, _, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SliceCols(a, _) => vec![*a],
            Op::ConcatCols(parts) => parts.clone(),
            Op::TridiagSolve { sub, main, sup, rhs } => vec![*sub, *main, *sup, *rhs],
        }
    }
}

/// One node of the differentiation graph: its value and how it was produced.
#[derive(Clone, Debug)]
pub struct GraphNode {
    value: Matrix,
    op: Op,
}

impl GraphNode {
    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn parents(&self) -> Vec<Var> {
        self.op.parents()
    }
}

/// Append-only computation graph.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<GraphNode>,
}

/// Adjoints of every node with respect to one scalar root.
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<Matrix>,
}

impl Gradients {
    /// Adjoint of `var`; zero for nodes the root does not depend on.
    pub fn wrt(&self, var: Var) -> &Matrix {
        &self.adjoints[var.0]
    }

    /// Scalar adjoint, for `1 x 1` nodes.
    pub fn scalar(&self, var: Var) -> f64 {
        self.adjoints[var.0][[0, 0]]
    }
}

fn shape(m: &Matrix) -> (usize, usize) {
    let d = m.dim();
    (d.0, d.1)
}

fn broadcast_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<(usize, usize)> {
    let (ar, ac) = shape(a);
    let (br, bc) = shape(b);
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else {
            None
        }
    };
    match (dim(ar, br), dim(ac, bc)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Shape {
            op,
            lhs: (ar, ac),
            rhs: (br, bc),
        }),
    }
}

fn broadcast_zip(a: &Matrix, b: &Matrix, out: (usize, usize), f: impl Fn(f64, f64) -> f64) -> Matrix {
    let a = a.broadcast(out).expect("shape checked");
    let b = b.broadcast(out).expect("shape checked");
    Zip::from(&a).and(&b).map_collect(|&x, &y| f(x, y))
}

/// Sums `grad` down to `target` shape, undoing broadcasting.
fn reduce_to(grad: Matrix, target: (usize, usize)) -> Matrix {
    let mut g = grad;
    if target.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if target.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, var: Var) -> &GraphNode {
        &self.nodes[var.0]
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar_value(&self, var: Var) -> f64 {
        self.nodes[var.0].value[[0, 0]]
    }

    pub fn shape(&self, var: Var) -> (usize, usize) {
        shape(&self.nodes[var.0].value)
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(GraphNode { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Registers an input (trainable or constant; the tape does not care).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    /// `n x 1` column leaf.
    pub fn column(&mut self, values: &[f64]) -> Var {
        let m = Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column shape");
        self.leaf(m)
    }

    /// `1 x n` row leaf.
    pub fn row(&mut self, values: &[f64]) -> Var {
        let m = Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape");
        self.leaf(m)
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let out = broadcast_shape(name, va, vb)?;
        let value = broadcast_zip(va, vb, out, f);
        Ok(self.push(value, op))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).mapv(f);
        self.push(value, op)
    }

    fn check_domain(&self, name: &'static str, a: Var, ok: impl Fn(f64) -> bool) -> Result<()> {
        match self.value(a).iter().find(|&&x| !ok(x)) {
            Some(&value) => Err(Error::Domain { op: name, value }),
            None => Ok(()),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_domain("div", b, |x| x != 0.0)?;
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.check_domain("log", a, |x| x > 0.0)?;
        Ok(self.unary(a, f64::ln, Op::Log(a)))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.check_domain("sqrt", a, |x| x > 0.0)?;
        Ok(self.unary(a, f64::sqrt, Op::Sqrt(a)))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, f64::abs, Op::Abs(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, stable_sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Elementwise `max(x, 0)`; same node as [`Tape::relu`].
    pub fn max_zero(&mut self, a: Var) -> Var {
        self.relu(a)
    }

    /// Clamps into `[lo, hi]`. Gradient is zero where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// Matrix product; a matrix-vector product when `b` has one column.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(Error::Shape {
                op: "matmul",
                lhs: shape(va),
                rhs: shape(vb),
            });
        }
        let value = va.dot(vb);
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).sum();
        self.push(Array2::from_elem((1, 1), total), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::contract("mean of an empty node"));
        }
        let m = v.sum() / v.len() as f64;
        Ok(self.push(Array2::from_elem((1, 1), m), Op::Mean(a)))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a);
        if start >= end || end > v.ncols() {
            return Err(Error::contract(format!(
                "column slice {start}..{end} out of range for {} columns",
                v.ncols()
            )));
        }
        let value = v.slice(s![.., start..end]).to_owned();
        Ok(self.push(value, Op::SliceCols(a, start)))
    }

    /// Horizontal concatenation; all parts must share the row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::contract("concat of zero parts"))?;
        let rows = self.value(*first).nrows();
        for p in parts {
            let v = self.value(*p);
            if v.nrows() != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: (rows, 0),
                    rhs: shape(v),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("rows checked");
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Solves one tridiagonal system per row.
    ///
    /// `main` and `rhs` are `r x n`; `sub` and `sup` are `r x (n-1)` holding
    /// `A[i+1][i]` and `A[i][i+1]`. The adjoint is a second Thomas solve with
    /// the transposed system, so no elimination steps are recorded.
    pub fn tridiag_solve(&mut self, sub: Var, main: Var, sup: Var, rhs: Var) -> Result<Var> {
        let (rows, n) = self.shape(main);
        let expect = [
            (sub, (rows, n.saturating_sub(1))),
            (sup, (rows, n.saturating_sub(1))),
            (rhs, (rows, n)),
        ];
        for (v, want) in expect {
            if self.shape(v) != want {
                return Err(Error::Shape {
                    op: "tridiag_solve",
                    lhs: want,
                    rhs: self.shape(v),
                });
            }
        }
        let mut value = Array2::zeros((rows, n));
        for r in 0..rows {
            let system = TridiagonalSystem {
                sub: self.value(sub).row(r).to_vec(),
                main: self.value(main).row(r).to_vec(),
                sup: self.value(sup).row(r).to_vec(),
                rhs: self.value(rhs).row(r).to_vec(),
            };
            let u = system.solve()?;
            value.row_mut(r).assign(&ndarray::ArrayView1::from(&u));
        }
        Ok(self.push(value, Op::TridiagSolve { sub, main, sup, rhs }))
    }

    /// Builds a node from an operation tag; binary tags take two inputs.
    pub fn apply(&mut self, tag: OpTag, inputs: &[Var]) -> Result<Var> {
        if inputs.len() != tag.arity() {
            return Err(Error::contract(format!(
                "{tag:?} takes {} inputs, got {}",
                tag.arity(),
                inputs.len()
            )));
        }
        let a = inputs[0];
        match tag {
            OpTag::Add => self.add(a, inputs[1]),
            OpTag::Sub => self.sub(a, inputs[1]),
            OpTag::Mul => self.mul(a, inputs[1]),
            OpTag::Div => self.div(a, inputs[1]),
            OpTag::MatMul => self.matmul(a, inputs[1]),
            OpTag::Neg => Ok(self.neg(a)),
            OpTag::Exp => Ok(self.exp(a)),
            OpTag::Log => self.log(a),
            OpTag::Sqrt => self.sqrt(a),
            OpTag::Square => Ok(self.square(a)),
            OpTag::Abs => Ok(self.abs(a)),
            OpTag::Tanh => Ok(self.tanh(a)),
            OpTag::Sigmoid => Ok(self.sigmoid(a)),
            OpTag::Relu => Ok(self.relu(a)),
            OpTag::MaxZero => Ok(self.max_zero(a)),
            OpTag::Sum => Ok(self.sum(a)),
            OpTag::Mean => self.mean(a),
        }
    }

    /// Propagates adjoints from the scalar `root` back to every node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_shape = self.shape(root);
        if root_shape != (1, 1) {
            return Err(Error::contract(format!(
                "backward needs a scalar root, got shape {root_shape:?}"
            )));
        }
        let mut adj: Vec<Matrix> = self.nodes.iter().map(|n| Array2::zeros(n.value.raw_dim())).collect();
        adj[root.0][[0, 0]] = 1.0;

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            // Skip nodes that received no adjoint; saves work on dead branches.
            if adj[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::replace(&mut adj[i], Array2::zeros((0, 0)));
            self.propagate(i, &g, &mut adj);
            adj[i] = g;
        }
        Ok(Gradients { adjoints: adj })
    }

    fn propagate(&self, i: usize, g: &Matrix, adj: &mut [Matrix]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, contrib: Matrix| {
            let target = shape(&adj[v.0]);
            let contrib = reduce_to(contrib, target);
            adj[v.0] += &contrib;
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                let dims = shape(g);
                acc(*a, broadcast_zip(g, val(*b), dims, |g, y| g * y));
                acc(*b, broadcast_zip(g, val(*a), dims, |g, x| g * x));
            }
            Op::Div(a, b) => {
                let dims = shape(g);
                acc(*a, broadcast_zip(g, val(*b), dims, |g, y| g / y));
                // d(x/y)/dy = -(x/y)/y = -out/y
                let q = broadcast_zip(out, val(*b), dims, |o, y| -o / y);
                acc(*b, g * &q);
            }
            Op::Neg(a) => acc(*a, -g),
            Op::Exp(a) => acc(*a, g * out),
            Op::Log(a) => acc(*a, g / val(*a)),
            Op::Sqrt(a) => acc(*a, Zip::from(g).and(out).map_collect(|&g, &o| 0.5 * g / o)),
            Op::Square(a) => acc(*a, Zip::from(g).and(val(*a)).map_collect(|&g, &x| 2.0 * g * x)),
            Op::Abs(a) => acc(*a, Zip::from(g).and(val(*a)).map_collect(|&g, &x| g * sign(x))),
            Op::Tanh(a) => acc(*a, Zip::from(g).and(out).map_collect(|&g, &o| g * (1.0 - o * o))),
            Op::Sigmoid(a) => acc(*a, Zip::from(g).and(out).map_collect(|&g, &o| g * o * (1.0 - o))),
            Op::Relu(a) => acc(
                *a,
                Zip::from(g)
                    .and(val(*a))
                    .map_collect(|&g, &x| if x > 0.0 { g } else { 0.0 }),
            ),
            Op::Clamp(a, lo, hi) => acc(
                *a,
                Zip::from(g)
                    .and(val(*a))
                    .map_collect(|&g, &x| if x >= *lo && x <= *hi { g } else { 0.0 }),
            ),
            Op::MatMul(a, b) => {
                acc(*a, g.dot(&val(*b).t()));
                acc(*b, val(*a).t().dot(g));
            }
            Op::Sum(a) => acc(*a, Array2::from_elem(val(*a).raw_dim(), g[[0, 0]])),
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                acc(*a, Array2::from_elem(val(*a).raw_dim(), g[[0, 0]] / n));
            }
            Op::SliceCols(a, start) => {
                let mut full = Array2::zeros(val(*a).raw_dim());
                full.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*a, full);
            }
            Op::ConcatCols(parts) => {
                let mut col = 0;
                for p in parts {
                    let w = val(*p).ncols();
                    acc(*p, g.slice(s![.., col..col + w]).to_owned());
                    col += w;
                }
            }
            Op::TridiagSolve { sub, main, sup, rhs } => {
                let (rows, n) = shape(out);
                let mut g_sub = Array2::zeros((rows, n.saturating_sub(1)));
                let mut g_main = Array2::zeros((rows, n));
                let mut g_sup = Array2::zeros((rows, n.saturating_sub(1)));
                let mut g_rhs = Array2::zeros((rows, n));
                for r in 0..rows {
                    let system = TridiagonalSystem {
                        sub: val(*sub).row(r).to_vec(),
                        main: val(*main).row(r).to_vec(),
                        sup: val(*sup).row(r).to_vec(),
                        rhs: g.row(r).to_vec(),
                    };
                    // Forward solve succeeded, so the transposed solve cannot hit a zero pivot.
                    let lambda = system.solve_transposed().expect("nonsingular system");
                    let u = out.row(r);
                    for k in 0..n {
                        g_rhs[[r, k]] = lambda[k];
                        g_main[[r, k]] = -lambda[k] * u[k];
                        if k + 1 < n {
                            g_sub[[r, k]] = -lambda[k + 1] * u[k];
                            g_sup[[r, k]] = -lambda[k] * u[k + 1];
                        }
                    }
                }
                acc(*sub, g_sub);
                acc(*main, g_main);
                acc(*sup, g_sup);
                acc(*rhs, g_rhs);
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
