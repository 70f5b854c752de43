//! Tape of 2-D matrix operations. Backward passes emit ordinary tape nodes, so
//! a gradient can itself be differentiated.

use std::rc::Rc;

use super::tensor::{matmul, transpose, Tensor};
use super::NeuralError;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Marks an output slot of a gather that reads zero.
pub(crate) const NO_SOURCE: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    SumRows(Var),
    BroadcastRows(Var),
    SumCols(Var),
    BroadcastCols(Var),
    Scale(Var, f64),
    AddScalar(Var),
    MulConst(Var, Rc<[f64]>),
    Tanh(Var),
    Sigmoid(Var),
    Sqrt(Var),
    SafeRecip(Var),
    Ln(Var),
    Sum(Var),
    Expand(Var),
    Gather(Var, Rc<[u32]>),
    ScatterAdd(Var, Rc<[u32]>),
}

impl Op {
    fn inputs(&self) -> [Option<Var>; 2] {
        use Op::*;
        match self {
            Leaf => [None, None],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) | MulRow(a, b) => [Some(*a), Some(*b)],
            Transpose(a) | Reshape(a) | SumRows(a) | BroadcastRows(a) | SumCols(a) | BroadcastCols(a) | Scale(a, _)
            | AddScalar(a) | MulConst(a, _) | Tanh(a) | Sigmoid(a) | Sqrt(a) | SafeRecip(a) | Ln(a) | Sum(a)
            | Expand(a) | Gather(a, _) | ScatterAdd(a, _) => [Some(*a), None],
        }
    }

    fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Leaf => "leaf",
            MatMul(..) => "matmul",
            Transpose(_) => "transpose",
            Reshape(_) => "reshape",
            Add(..) => "add",
            Sub(..) => "sub",
            Mul(..) => "mul",
            AddRow(..) => "add_row",
            MulRow(..) => "mul_row",
            SumRows(_) => "sum_rows",
            BroadcastRows(_) => "broadcast_rows",
            SumCols(_) => "sum_cols",
            BroadcastCols(_) => "broadcast_cols",
            Scale(..) => "scale",
            AddScalar(..) => "add_scalar",
            MulConst(..) => "mul_const",
            Tanh(_) => "tanh",
            Sigmoid(_) => "sigmoid",
            Sqrt(_) => "sqrt",
            SafeRecip(_) => "safe_recip",
            Ln(_) => "ln",
            Sum(_) => "sum",
            Expand(_) => "expand",
            Gather(..) => "gather",
            ScatterAdd(..) => "scatter_add",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation tape. Every value is a `rows x cols` matrix.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf node. Tensors of higher rank are viewed as `shape[0] x rest`.
    pub fn leaf(&mut self, t: &Tensor, requires_grad: bool) -> Result<Var, NeuralError> {
        let value = Tensor {
            shape: vec![t.rows(), t.cols()],
            data: t.data.clone(),
        };
        if !value.is_finite() {
            return Err(NeuralError::NonFinite("leaf"));
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, t: &Tensor) -> Result<Var, NeuralError> {
        self.leaf(t, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let s = &self.nodes[v.0].value.shape;
        (s[0], s[1])
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Result<Var, NeuralError> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFinite(op.name()));
        }
        let requires_grad = op.inputs().iter().flatten().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Tensor {
                shape: vec![rows, cols],
                data,
            },
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn data(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value.data
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(usize, usize), NeuralError> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(NeuralError::Shape(format!("{what}: {da:?} vs {db:?}")));
        }
        Ok(da)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var, NeuralError> {
        let (r, c) = self.dims(a);
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        self.push(r, c, data, op)
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var, NeuralError> {
        let (r, c) = self.same_shape(a, b, op.name())?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        self.push(r, c, data, op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        let ((n, k), (k2, m)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(NeuralError::Shape(format!("matmul: {n}x{k} by {k2}x{m}")));
        }
        let data = matmul(self.data(a), self.data(b), n, k, m);
        self.push(n, m, data, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NeuralError> {
        let (r, c) = self.dims(a);
        let data = transpose(self.data(a), r, c);
        self.push(c, r, data, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, NeuralError> {
        let (r, c) = self.dims(a);
        if r * c != rows * cols {
            return Err(NeuralError::Shape(format!("reshape {r}x{c} to {rows}x{cols}")));
        }
        let data = self.data(a).to_vec();
        self.push(rows, cols, data, Op::Reshape(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    fn row_op(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var, NeuralError> {
        let ((r, c), (br, bc)) = (self.dims(a), self.dims(b));
        if br != 1 || bc != c {
            return Err(NeuralError::Shape(format!("{}: {r}x{c} with row {br}x{bc}", op.name())));
        }
        let row = self.data(b);
        let data = self
            .data(a)
            .chunks(c)
            .flat_map(|chunk| chunk.iter().zip(row).map(|(&x, &y)| f(x, y)))
            .collect();
        self.push(r, c, data, op)
    }

    /// `a + b` with the row vector `b` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.row_op(a, b, Op::AddRow(a, b), |x, y| x + y)
    }

    /// `a * b` elementwise with the row vector `b` broadcast over the rows of `a`.
    pub fn mul_row(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.row_op(a, b, Op::MulRow(a, b), |x, y| x * y)
    }

    pub fn sum_rows(&mut self, a: Var) -> Result<Var, NeuralError> {
        let (_, c) = self.dims(a);
        let mut out = vec![0.0; c];
        for chunk in self.data(a).chunks(c) {
            for (o, &x) in out.iter_mut().zip(chunk) {
                *o += x;
            }
        }
        self.push(1, c, out, Op::SumRows(a))
    }

    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Result<Var, NeuralError> {
        let (r, c) = self.dims(a);
        if r != 1 {
            return Err(NeuralError::Shape(format!("broadcast_rows of {r}x{c}")));
        }
        let data = self.data(a).repeat(rows);
        self.push(rows, c, data, Op::BroadcastRows(a))
    }

    pub fn sum_cols(&mut self, a: Var) -> Result<Var, NeuralError> {
        let (r, c) = self.dims(a);
        let data = self.data(a).chunks(c).map(|ch| ch.iter().sum()).collect();
        self.push(r, 1, data, Op::SumCols(a))
    }

    pub fn broadcast_cols(&mut self, a: Var, cols: usize) -> Result<Var, NeuralError> {
        let (r, c) = self.dims(a);
        if c != 1 {
            return Err(NeuralError::Shape(format!("broadcast_cols of {r}x{c}")));
        }
        let data = self.data(a).iter().flat_map(|&x| std::iter::repeat_n(x, cols)).collect();
        self.push(r, cols, data, Op::BroadcastCols(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, NeuralError> {
        self.map(a, Op::Scale(a, k), |x| k * x)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var, NeuralError> {
        self.map(a, Op::AddScalar(a), |x| x + k)
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: Var, m: Rc<[f64]>) -> Result<Var, NeuralError> {
        let (r, c) = self.dims(a);
        if m.len() != r * c {
            return Err(NeuralError::Shape(format!("mul_const: {} entries for {r}x{c}", m.len())));
        }
        let data = self.data(a).iter().zip(m.iter()).map(|(&x, &y)| x * y).collect();
        self.push(r, c, data, Op::MulConst(a, m))
    }

    /// Leaky ReLU; the derivative at 0 is the negative-side slope.
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, NeuralError> {
        let mask: Rc<[f64]> = self.data(a).iter().map(|&x| if x > 0.0 { 1.0 } else { slope }).collect();
        self.mul_const(a, mask)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NeuralError> {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NeuralError> {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, NeuralError> {
        if self.data(a).iter().any(|&x| x < 0.0) {
            return Err(NeuralError::NonFinite("sqrt"));
        }
        self.map(a, Op::Sqrt(a), f64::sqrt)
    }

    /// `1 / a`, defined as 0 where `a == 0`.
    pub fn safe_recip(&mut self, a: Var) -> Result<Var, NeuralError> {
        self.map(a, Op::SafeRecip(a), |x| if x == 0.0 { 0.0 } else { 1.0 / x })
    }

    pub fn ln(&mut self, a: Var) -> Result<Var, NeuralError> {
        self.map(a, Op::Ln(a), f64::ln)
    }

    /// Sum of all entries as a `1 x 1` value.
    pub fn sum(&mut self, a: Var) -> Result<Var, NeuralError> {
        let s = self.data(a).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NeuralError> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    /// Broadcast a `1 x 1` value to `rows x cols`.
    pub fn expand(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, NeuralError> {
        if self.dims(a) != (1, 1) {
            return Err(NeuralError::NotScalar);
        }
        let v = self.data(a)[0];
        self.push(rows, cols, vec![v; rows * cols], Op::Expand(a))
    }

    /// `out[i] = a[idx[i]]` over the flat buffers; [`NO_SOURCE`] reads 0.
    pub(crate) fn gather(&mut self, a: Var, idx: Rc<[u32]>, rows: usize, cols: usize) -> Result<Var, NeuralError> {
        if idx.len() != rows * cols {
            return Err(NeuralError::Shape("gather index length".into()));
        }
        let src = self.data(a);
        let data = idx
            .iter()
            .map(|&i| if i == NO_SOURCE { 0.0 } else { src[i as usize] })
            .collect();
        self.push(rows, cols, data, Op::Gather(a, idx))
    }

    /// Adjoint of [`Graph::gather`]: `out[idx[i]] += a[i]`.
    pub(crate) fn scatter_add(&mut self, a: Var, idx: Rc<[u32]>, rows: usize, cols: usize) -> Result<Var, NeuralError> {
        let mut out = vec![0.0; rows * cols];
        for (&i, &x) in idx.iter().zip(self.data(a)) {
            if i != NO_SOURCE {
                out[i as usize] += x;
            }
        }
        self.push(rows, cols, out, Op::ScatterAdd(a, idx))
    }

    /// Reverse-mode gradients of the scalar `loss` with respect to `wrt`.
    ///
    /// The returned gradients are tape nodes; differentiating them again is
    /// supported for every operation.
    pub fn grad(&mut self, loss: Var, wrt: &[Var]) -> Result<Vec<Var>, NeuralError> {
        if loss.0 >= self.nodes.len() {
            return Err(NeuralError::NotOnTape);
        }
        if self.dims(loss) != (1, 1) {
            return Err(NeuralError::NotScalar);
        }
        let n = loss.0 + 1;
        let mut relevant = vec![false; n];
        for w in wrt {
            if w.0 < n {
                relevant[w.0] = true;
            }
        }
        for i in 0..n {
            if !relevant[i] && self.nodes[i].requires_grad {
                relevant[i] = self.nodes[i].op.inputs().iter().flatten().any(|v| relevant[v.0]);
            }
        }
        let mut grads: Vec<Option<Var>> = vec![None; n];
        grads[loss.0] = Some(self.constant(&Tensor::scalar(1.0))?);
        for i in (0..n).rev() {
            let Some(g) = grads[i] else { continue };
            if !relevant[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            for (input, contrib) in self.backward(Var(i), &op, g, &relevant)? {
                grads[input.0] = Some(match grads[input.0] {
                    None => contrib,
                    Some(prev) => self.add(prev, contrib)?,
                });
            }
        }
        wrt.iter()
            .map(|w| match grads.get(w.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let (r, c) = self.dims(*w);
                    self.constant(&Tensor::zeros(vec![r, c]))
                }
            })
            .collect()
    }

    fn backward(&mut self, y: Var, op: &Op, g: Var, relevant: &[bool]) -> Result<Vec<(Var, Var)>, NeuralError> {
        use Op::*;
        let want = |v: &Var| relevant[v.0];
        let mut out = Vec::with_capacity(2);
        match op {
            Leaf => {}
            MatMul(a, b) => {
                if want(a) {
                    let bt = self.transpose(*b)?;
                    out.push((*a, self.matmul(g, bt)?));
                }
                if want(b) {
                    let at = self.transpose(*a)?;
                    out.push((*b, self.matmul(at, g)?));
                }
            }
            Transpose(a) => out.push((*a, self.transpose(g)?)),
            Reshape(a) => {
                let (r, c) = self.dims(*a);
                out.push((*a, self.reshape(g, r, c)?));
            }
            Add(a, b) => {
                if want(a) {
                    out.push((*a, g));
                }
                if want(b) {
                    out.push((*b, g));
                }
            }
            Sub(a, b) => {
                if want(a) {
                    out.push((*a, g));
                }
                if want(b) {
                    out.push((*b, self.scale(g, -1.0)?));
                }
            }
            Mul(a, b) => {
                if want(a) {
                    out.push((*a, self.mul(g, *b)?));
                }
                if want(b) {
                    out.push((*b, self.mul(g, *a)?));
                }
            }
            AddRow(a, b) => {
                if want(a) {
                    out.push((*a, g));
                }
                if want(b) {
                    out.push((*b, self.sum_rows(g)?));
                }
            }
            MulRow(a, b) => {
                if want(a) {
                    out.push((*a, self.mul_row(g, *b)?));
                }
                if want(b) {
                    let ga = self.mul(g, *a)?;
                    out.push((*b, self.sum_rows(ga)?));
                }
            }
            SumRows(a) => {
                let (r, _) = self.dims(*a);
                out.push((*a, self.broadcast_rows(g, r)?));
            }
            BroadcastRows(a) => out.push((*a, self.sum_rows(g)?)),
            SumCols(a) => {
                let (_, c) = self.dims(*a);
                out.push((*a, self.broadcast_cols(g, c)?));
            }
            BroadcastCols(a) => out.push((*a, self.sum_cols(g)?)),
            Scale(a, k) => out.push((*a, self.scale(g, *k)?)),
            AddScalar(a) => out.push((*a, g)),
            MulConst(a, m) => out.push((*a, self.mul_const(g, m.clone())?)),
            Tanh(a) => {
                let yy = self.mul(y, y)?;
                let neg = self.scale(yy, -1.0)?;
                let d = self.add_scalar(neg, 1.0)?;
                out.push((*a, self.mul(g, d)?));
            }
            Sigmoid(a) => {
                let neg = self.scale(y, -1.0)?;
                let one_minus = self.add_scalar(neg, 1.0)?;
                let d = self.mul(y, one_minus)?;
                out.push((*a, self.mul(g, d)?));
            }
            Sqrt(a) => {
                let r = self.safe_recip(y)?;
                let d = self.scale(r, 0.5)?;
                out.push((*a, self.mul(g, d)?));
            }
            SafeRecip(a) => {
                let yy = self.mul(y, y)?;
                let d = self.scale(yy, -1.0)?;
                out.push((*a, self.mul(g, d)?));
            }
            Ln(a) => {
                let r = self.safe_recip(*a)?;
                out.push((*a, self.mul(g, r)?));
            }
            Sum(a) => {
                let (r, c) = self.dims(*a);
                out.push((*a, self.expand(g, r, c)?));
            }
            Expand(a) => out.push((*a, self.sum(g)?)),
            Gather(a, idx) => {
                let (r, c) = self.dims(*a);
                out.push((*a, self.scatter_add(g, idx.clone(), r, c)?));
            }
            ScatterAdd(a, idx) => {
                let (r, c) = self.dims(*a);
                out.push((*a, self.gather(g, idx.clone(), r, c)?));
            }
        }
        Ok(out)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
