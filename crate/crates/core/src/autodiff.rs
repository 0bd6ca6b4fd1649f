//! Tape-based reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! The tape is define-by-run: every forward pass records its operations in
//! creation order, and `backward` walks the records in exact reverse order,
//! accumulating adjoints. Node ids are indices into the tape, so inputs
//! always precede their consumers.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

/// Identifies a trainable parameter in a [`crate::nn::ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    /// a * b^T
    MatMulNt(NodeId, NodeId),
    /// broadcast a 1xN bias over every row of a
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    // the scalar is folded into the value at push time; kept so the op
    // records what produced it
    AddScalar(NodeId, #[allow(dead_code)] f64),
    Relu(NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Square(NodeId),
    Clamp(NodeId, f64, f64),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SumAll(NodeId),
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-parameter gradients produced by [`Tape::backward`].
pub struct Gradients {
    by_param: Vec<Option<Matrix>>,
}

impl Gradients {
    #[cfg(test)]
    pub(crate) fn from_raw(by_param: Vec<Option<Matrix>>) -> Gradients {
        Gradients { by_param }
    }

    pub fn get(&self, p: ParamId) -> Option<&Matrix> {
        self.by_param.get(p.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `p`, zero-shaped like `like` when the parameter was
    /// unused by the recorded graph.
    pub fn get_or_zero(&self, p: ParamId, like: &Matrix) -> Matrix {
        match self.get(p) {
            Some(g) => g.clone(),
            None => Matrix::zeros(like.rows(), like.cols()),
        }
    }

    /// Euclidean norm over every stored gradient entry.
    pub fn global_norm(&self) -> f64 {
        self.by_param
            .iter()
            .flatten()
            .flat_map(|g| g.data().iter())
            .map(|&v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescale all gradients so their global norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            let s = max_norm / norm;
            for g in self.by_param.iter_mut().flatten() {
                g.scale_in_place(s);
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite value recorded on tape");
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; receives an adjoint but never a parameter gradient.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId, value: Matrix) -> NodeId {
        self.push(value, Op::Param(id))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.push(v, Op::MatMulNt(a, b)))
    }

    /// `a + bias`, bias is 1xN broadcast over the rows of a.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(Error::Shape(format!(
                "add_row {:?} + {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let mut out = av.clone();
        for r in 0..out.rows() {
            let brow = self.nodes[bias.0].value.row(0).to_vec();
            for (o, b) in out.row_mut(r).iter_mut().zip(brow) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip(self.value(b), |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip(self.value(b), |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip(self.value(b), |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip(self.value(b), |x, y| x / y)?;
        Ok(self.push(v, Op::Div(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x + s);
        self.push(v, Op::AddScalar(a, s))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let values: Vec<&Matrix> = parts.iter().map(|&p| &self.nodes[p.0].value).collect();
        let v = Matrix::concat_cols(&values)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let av = self.value(a);
        if end > av.cols() || start > end {
            return Err(Error::Shape(format!(
                "slice_cols {}..{} of {:?}",
                start,
                end,
                av.shape()
            )));
        }
        let v = av.slice_cols(start, end);
        Ok(self.push(v, Op::SliceCols(a, start, end)))
    }

    /// Sum of all entries, as a 1x1 matrix.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::from_vec(1, 1, vec![self.value(a).sum()]).unwrap();
        self.push(v, Op::SumAll(a))
    }

    /// mean + exp(0.5 * log_variance) ⊙ noise. The noise enters as a leaf,
    /// so gradients reach mean and log_variance but no parameter behind the
    /// noise.
    pub fn reparameterize(
        &mut self,
        mean: NodeId,
        log_variance: NodeId,
        noise: Matrix,
    ) -> Result<NodeId> {
        let half = self.scale(log_variance, 0.5);
        let std = self.exp(half);
        let eps = self.leaf(noise);
        let scaled = self.mul(std, eps)?;
        self.add(mean, scaled)
    }

    /// Reverse pass from a scalar loss node. Returns gradients for every
    /// parameter registered on the tape; unused parameters carry no entry.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adjoints: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adjoints[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]).unwrap());

        let max_param = self
            .nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Param(p) => Some(p.0 + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let mut grads: Vec<Option<Matrix>> = (0..max_param).map(|_| None).collect();

        for idx in (0..self.nodes.len()).rev() {
            let g = match adjoints[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => match &mut grads[p.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                },
                Op::MatMul(a, b) => {
                    let ga = g.matmul_nt(self.value(*b))?;
                    let gb = self.value(*a).matmul_tn(&g)?;
                    accumulate(&mut adjoints, *a, ga);
                    accumulate(&mut adjoints, *b, gb);
                }
                Op::MatMulNt(a, b) => {
                    // y = a b^T: da = g b, db = g^T a
                    let ga = g.matmul(self.value(*b))?;
                    let gb = g.matmul_tn(self.value(*a))?;
                    accumulate(&mut adjoints, *a, ga);
                    accumulate(&mut adjoints, *b, gb);
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, &v) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut adjoints, *a, g);
                    accumulate(&mut adjoints, *bias, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adjoints, *a, g.clone());
                    accumulate(&mut adjoints, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adjoints, *b, g.map(|x| -x));
                    accumulate(&mut adjoints, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip(self.value(*b), |x, y| x * y)?;
                    let gb = g.zip(self.value(*a), |x, y| x * y)?;
                    accumulate(&mut adjoints, *a, ga);
                    accumulate(&mut adjoints, *b, gb);
                }
                Op::Div(a, b) => {
                    let bv = self.value(*b);
                    let ga = g.zip(bv, |x, y| x / y)?;
                    let av = self.value(*a);
                    let mut gb = Matrix::zeros(g.rows(), g.cols());
                    for i in 0..g.data().len() {
                        let b = bv.data()[i];
                        gb.data_mut()[i] = -g.data()[i] * av.data()[i] / (b * b);
                    }
                    accumulate(&mut adjoints, *a, ga);
                    accumulate(&mut adjoints, *b, gb);
                }
                Op::Scale(a, s) => accumulate(&mut adjoints, *a, g.map(|x| x * s)),
                Op::AddScalar(a, _) => accumulate(&mut adjoints, *a, g),
                Op::Relu(a) => {
                    let ga = g.zip(self.value(*a), |x, v| if v > 0.0 { x } else { 0.0 })?;
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::Tanh(a) => {
                    let ga = g.zip(&node.value, |x, y| x * (1.0 - y * y))?;
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::Softplus(a) => {
                    let ga = g.zip(self.value(*a), |x, v| x * sigmoid(v))?;
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::Exp(a) => {
                    let ga = g.zip(&node.value, |x, y| x * y)?;
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::Ln(a) => {
                    let ga = g.zip(self.value(*a), |x, v| x / v)?;
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::Square(a) => {
                    let ga = g.zip(self.value(*a), |x, v| 2.0 * x * v)?;
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::Clamp(a, lo, hi) => {
                    let ga = g.zip(self.value(*a), |x, v| {
                        if v >= *lo && v <= *hi {
                            x
                        } else {
                            0.0
                        }
                    })?;
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        accumulate(&mut adjoints, p, g.slice_cols(at, at + w));
                        at += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let av = self.value(*a);
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(r)[*start..*end].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut adjoints, *a, ga);
                }
                Op::SumAll(a) => {
                    let av = self.value(*a);
                    let s = g.get(0, 0);
                    accumulate(&mut adjoints, *a, Matrix::filled(av.rows(), av.cols(), s));
                }
            }
        }
        Ok(Gradients { by_param: grads })
    }
}

fn accumulate(adjoints: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
    match &mut adjoints[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

pub fn softplus(x: f64) -> f64 {
    // numerically stable: ln(1 + e^x) = max(x, 0) + ln(1 + e^{-|x|})
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
