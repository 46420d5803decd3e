//! Reverse-mode autodiff over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass as a node in an
//! append-only arena. Parents of a node are always created strictly earlier,
//! so a single reverse sweep over creation order is a reverse-topological
//! traversal. Gradient accumulation is a sum over all paths; running
//! [`Tape::backward`] twice on the same tape produces identical gradients.
//!
//! Every completed operation is checked for non-finite entries and reported
//! as a numerical error rather than silently propagating NaNs into training.

use super::matrix::{DenseMatrix, Precision};
use crate::error::{EngineError, Result};
use rand::Rng;

/// Default negative slope of the leaky rectifier.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TapeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Constant or parameter leaf; `Some(slot)` marks a trainable parameter.
    Leaf { slot: Option<usize> },
    MatMul(TapeId, TapeId),
    MatVec(TapeId, TapeId),
    Transpose(TapeId),
    Add(TapeId, TapeId),
    Sub(TapeId, TapeId),
    Mul(TapeId, TapeId),
    Scale(TapeId, f64),
    RowSoftmax(TapeId),
    ColSoftmax(TapeId),
    LeakyRelu(TapeId, f64),
    HConcat(TapeId, TapeId),
    RowSum(TapeId),
    RowL2Normalize(TapeId),
    Dropout {
        input: TapeId,
        rate: f64,
        mask: DenseMatrix,
    },
    /// Symmetric degree normalization `A -> D^{-1/2} (A + I) D^{-1/2}`.
    DegreeNormalize(TapeId),
    CrossEntropyLogits {
        logits: TapeId,
        target: usize,
    },
}

struct Node {
    value: DenseMatrix,
    op: Op,
    grad: Option<DenseMatrix>,
}

/// Recording arena for one forward pass.
pub struct Tape {
    nodes: Vec<Node>,
    precision: Precision,
}

impl Tape {
    pub fn new() -> Self {
        Tape::with_precision(Precision::Double)
    }

    pub fn with_precision(precision: Precision) -> Self {
        Tape {
            nodes: Vec::new(),
            precision,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TapeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` target with respect to this node.
    /// `None` if the node does not influence the loss.
    pub fn grad(&self, id: TapeId) -> Option<&DenseMatrix> {
        self.nodes[id.0].grad.as_ref()
    }

    /// The value of a 1x1 node.
    pub fn scalar(&self, id: TapeId) -> f64 {
        debug_assert_eq!(self.value(id).shape(), (1, 1));
        self.value(id).get(0, 0)
    }

    /// Iterate `(slot, id)` over all parameter leaves on the tape.
    pub fn param_nodes(&self) -> impl Iterator<Item = (usize, TapeId)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n.op {
            Op::Leaf { slot: Some(s) } => Some((s, TapeId(i))),
            _ => None,
        })
    }

    pub fn constant(&mut self, value: DenseMatrix) -> TapeId {
        debug_assert!(value.is_finite());
        self.push_leaf(value, None)
    }

    pub fn param(&mut self, slot: usize, value: DenseMatrix) -> TapeId {
        debug_assert!(value.is_finite());
        self.push_leaf(value, Some(slot))
    }

    fn push_leaf(&mut self, mut value: DenseMatrix, slot: Option<usize>) -> TapeId {
        value.quantize(self.precision);
        self.nodes.push(Node {
            value,
            op: Op::Leaf { slot },
            grad: None,
        });
        TapeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op_name: &'static str, mut value: DenseMatrix, op: Op) -> Result<TapeId> {
        value.quantize(self.precision);
        if !value.is_finite() {
            return Err(EngineError::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value,
            op,
            grad: None,
        });
        Ok(TapeId(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: TapeId, b: TapeId) -> Result<TapeId> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b))
    }

    /// Matrix-vector product; `v` must be a column vector.
    pub fn matvec(&mut self, a: TapeId, v: TapeId) -> Result<TapeId> {
        let (ar, ac) = self.value(a).shape();
        let (vr, vc) = self.value(v).shape();
        if vc != 1 || ac != vr {
            return Err(EngineError::dimension(
                "matvec",
                format!("{ar}x{ac} * {vr}x{vc}"),
            ));
        }
        let out = self.value(a).matmul(self.value(v))?;
        self.push("matvec", out, Op::MatVec(a, v))
    }

    pub fn transpose(&mut self, a: TapeId) -> Result<TapeId> {
        let v = self.value(a).transpose();
        self.push("transpose", v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: TapeId, b: TapeId) -> Result<TapeId> {
        let v = self.value(a).add(self.value(b))?;
        self.push("add", v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TapeId, b: TapeId) -> Result<TapeId> {
        let v = self.value(a).sub(self.value(b))?;
        self.push("sub", v, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: TapeId, b: TapeId) -> Result<TapeId> {
        let v = self.value(a).hadamard(self.value(b))?;
        self.push("mul", v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: TapeId, s: f64) -> Result<TapeId> {
        let v = self.value(a).scale(s);
        self.push("scale", v, Op::Scale(a, s))
    }

    pub fn row_softmax(&mut self, a: TapeId) -> Result<TapeId> {
        let v = self.value(a).row_softmax();
        self.push("row_softmax", v, Op::RowSoftmax(a))
    }

    /// Softmax over the entries of a column vector.
    pub fn col_softmax(&mut self, a: TapeId) -> Result<TapeId> {
        let (r, c) = self.value(a).shape();
        if c != 1 {
            return Err(EngineError::dimension(
                "col_softmax",
                format!("expected a column vector, got {r}x{c}"),
            ));
        }
        let v = self.value(a).transpose().row_softmax().transpose();
        self.push("col_softmax", v, Op::ColSoftmax(a))
    }

    pub fn leaky_relu(&mut self, a: TapeId, slope: f64) -> Result<TapeId> {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push("leaky_relu", v, Op::LeakyRelu(a, slope))
    }

    /// Concatenate two matrices side by side; row counts must match.
    pub fn hconcat(&mut self, a: TapeId, b: TapeId) -> Result<TapeId> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if ar != br {
            return Err(EngineError::dimension(
                "hconcat",
                format!("{ar}x{ac} vs {br}x{bc}"),
            ));
        }
        let mut data = Vec::with_capacity(ar * (ac + bc));
        for i in 0..ar {
            data.extend_from_slice(self.value(a).row(i));
            data.extend_from_slice(self.value(b).row(i));
        }
        let v = DenseMatrix::new(ar, ac + bc, data)?;
        self.push("hconcat", v, Op::HConcat(a, b))
    }

    /// Sum each row into a column vector.
    pub fn row_sum(&mut self, a: TapeId) -> Result<TapeId> {
        let (r, _) = self.value(a).shape();
        let mut data = Vec::with_capacity(r);
        for i in 0..r {
            data.push(self.value(a).row(i).iter().sum());
        }
        let v = DenseMatrix::new(r, 1, data)?;
        self.push("row_sum", v, Op::RowSum(a))
    }

    /// Normalize each row to unit L2 norm; zero rows stay zero.
    pub fn row_l2_normalize(&mut self, a: TapeId) -> Result<TapeId> {
        let m = self.value(a);
        let (r, c) = m.shape();
        let mut out = m.clone();
        for i in 0..r {
            let norm = m.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut out.data_mut()[i * c..(i + 1) * c] {
                    *v /= norm;
                }
            }
        }
        self.push("row_l2_normalize", out, Op::RowL2Normalize(a))
    }

    /// Training-mode dropout with inverted scaling, so inference needs no
    /// rescaling. The Bernoulli mask is drawn from `rng` and stored for the
    /// backward pass.
    pub fn dropout(&mut self, a: TapeId, rate: f64, rng: &mut impl Rng) -> Result<TapeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(EngineError::contract(
                "dropout",
                format!("rate must be in [0, 1), got {rate}"),
            ));
        }
        if rate == 0.0 {
            // Identity mask; still recorded so the op is visible on the tape.
            let mask = DenseMatrix::ones(self.value(a).rows(), self.value(a).cols());
            let v = self.value(a).clone();
            return self.push("dropout", v, Op::Dropout { input: a, rate, mask });
        }
        let (r, c) = self.value(a).shape();
        let keep = 1.0 - rate;
        let mut mask = DenseMatrix::zeros(r, c);
        for v in mask.data_mut() {
            if rng.gen::<f64>() >= rate {
                *v = 1.0;
            }
        }
        let scaled = self.value(a).hadamard(&mask)?.scale(1.0 / keep);
        self.push("dropout", scaled, Op::Dropout { input: a, rate, mask })
    }

    /// Symmetric degree normalization of a square non-negative matrix:
    /// add self loops, then scale by inverse square-root row sums on both
    /// sides. Differentiable through the row sums.
    pub fn degree_normalize(&mut self, a: TapeId) -> Result<TapeId> {
        let m = self.value(a);
        let (r, c) = m.shape();
        if r != c {
            return Err(EngineError::dimension(
                "degree_normalize",
                format!("expected square matrix, got {r}x{c}"),
            ));
        }
        if m.data().iter().any(|&x| x < -1e-12) {
            return Err(EngineError::contract(
                "degree_normalize",
                "matrix has negative entries",
            ));
        }
        let v = degree_normalize_value(m);
        self.push("degree_normalize", v, Op::DegreeNormalize(a))
    }

    /// Fused stable cross-entropy of a softmax over a single row of logits.
    pub fn cross_entropy_with_softmax(&mut self, logits: TapeId, target: usize) -> Result<TapeId> {
        let z = self.value(logits);
        let (r, c) = z.shape();
        if r != 1 {
            return Err(EngineError::dimension(
                "cross_entropy",
                format!("expected a 1xC logits row, got {r}x{c}"),
            ));
        }
        if target >= c {
            return Err(EngineError::contract(
                "cross_entropy",
                format!("target {target} out of range for {c} classes"),
            ));
        }
        let max = z.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.data().iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        let loss = DenseMatrix::scalar(lse - z.get(0, target));
        self.push(
            "cross_entropy",
            loss,
            Op::CrossEntropyLogits { logits, target },
        )
    }

    fn accumulate(&mut self, id: TapeId, contribution: DenseMatrix) -> Result<()> {
        let precision = self.precision;
        let node = &mut self.nodes[id.0];
        match &mut node.grad {
            Some(g) => {
                g.add_assign(&contribution)?;
                g.quantize(precision);
            }
            None => {
                let mut g = contribution;
                g.quantize(precision);
                node.grad = Some(g);
            }
        }
        Ok(())
    }

    /// Reverse sweep from a scalar loss node. Clears any previous gradients
    /// first, so repeated calls are idempotent.
    pub fn backward(&mut self, loss: TapeId) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            return Err(EngineError::contract(
                "backward",
                format!("loss must be 1x1, got {:?}", self.value(loss).shape()),
            ));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(DenseMatrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(grad) = self.nodes[i].grad.clone() else {
                continue;
            };
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf { .. } => {}
                Op::MatMul(a, b) | Op::MatVec(a, b) => {
                    let da = grad.matmul(&self.value(b).transpose())?;
                    let db = self.value(a).transpose().matmul(&grad)?;
                    self.accumulate(a, da)?;
                    self.accumulate(b, db)?;
                }
                Op::Transpose(a) => {
                    self.accumulate(a, grad.transpose())?;
                }
                Op::Add(a, b) => {
                    self.accumulate(a, grad.clone())?;
                    self.accumulate(b, grad)?;
                }
                Op::Sub(a, b) => {
                    self.accumulate(a, grad.clone())?;
                    self.accumulate(b, grad.scale(-1.0))?;
                }
                Op::Mul(a, b) => {
                    let da = grad.hadamard(self.value(b))?;
                    let db = grad.hadamard(self.value(a))?;
                    self.accumulate(a, da)?;
                    self.accumulate(b, db)?;
                }
                Op::Scale(a, s) => {
                    self.accumulate(a, grad.scale(s))?;
                }
                Op::RowSoftmax(a) => {
                    let y = self.nodes[i].value.clone();
                    self.accumulate(a, softmax_backward_rows(&y, &grad))?;
                }
                Op::ColSoftmax(a) => {
                    let y = self.nodes[i].value.transpose();
                    let g = grad.transpose();
                    self.accumulate(a, softmax_backward_rows(&y, &g).transpose())?;
                }
                Op::LeakyRelu(a, slope) => {
                    let x = self.value(a);
                    let mut dx = grad.clone();
                    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data().iter()) {
                        if xv <= 0.0 {
                            *d *= slope;
                        }
                    }
                    self.accumulate(a, dx)?;
                }
                Op::HConcat(a, b) => {
                    let (r, ac) = self.value(a).shape();
                    let bc = self.value(b).cols();
                    let mut da = DenseMatrix::zeros(r, ac);
                    let mut db = DenseMatrix::zeros(r, bc);
                    for row in 0..r {
                        let g = grad.row(row);
                        da.data_mut()[row * ac..(row + 1) * ac].copy_from_slice(&g[..ac]);
                        db.data_mut()[row * bc..(row + 1) * bc].copy_from_slice(&g[ac..]);
                    }
                    self.accumulate(a, da)?;
                    self.accumulate(b, db)?;
                }
                Op::RowSum(a) => {
                    let (r, c) = self.value(a).shape();
                    let mut dx = DenseMatrix::zeros(r, c);
                    for row in 0..r {
                        let g = grad.get(row, 0);
                        for v in &mut dx.data_mut()[row * c..(row + 1) * c] {
                            *v = g;
                        }
                    }
                    self.accumulate(a, dx)?;
                }
                Op::RowL2Normalize(a) => {
                    let x = self.value(a).clone();
                    let y = self.nodes[i].value.clone();
                    let (r, c) = x.shape();
                    let mut dx = DenseMatrix::zeros(r, c);
                    for row in 0..r {
                        let norm = x.row(row).iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm == 0.0 {
                            continue;
                        }
                        let g = grad.row(row);
                        let yr = y.row(row);
                        let dot: f64 = g.iter().zip(yr.iter()).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            dx.set(row, j, (g[j] - yr[j] * dot) / norm);
                        }
                    }
                    self.accumulate(a, dx)?;
                }
                Op::Dropout { input, rate, mask } => {
                    let dx = grad.hadamard(&mask)?.scale(1.0 / (1.0 - rate));
                    self.accumulate(input, dx)?;
                }
                Op::DegreeNormalize(a) => {
                    let dx = degree_normalize_backward(self.value(a), &self.nodes[i].value, &grad);
                    self.accumulate(a, dx)?;
                }
                Op::CrossEntropyLogits { logits, target } => {
                    let z = self.value(logits);
                    let mut dz = z.row_softmax();
                    let g = grad.get(0, 0);
                    dz.set(0, target, dz.get(0, target) - 1.0);
                    self.accumulate(logits, dz.scale(g))?;
                }
            }
        }
        Ok(())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` on plain values.
pub(crate) fn degree_normalize_value(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let mut tilde = a.clone();
    for i in 0..n {
        tilde.set(i, i, tilde.get(i, i) + 1.0);
    }
    let dinv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / tilde.row(i).iter().sum::<f64>().sqrt())
        .collect();
    let mut out = tilde;
    for i in 0..n {
        for j in 0..n {
            let v = out.get(i, j) * dinv_sqrt[i] * dinv_sqrt[j];
            out.set(i, j, v);
        }
    }
    out
}

// Perturbing A_kl shifts only row sum d_k, so the degree correction is
// constant along each row: dA_kl = G_kl s_k s_l + c_k with s = d^{-1/2} and
// c_k = -(sum_j G_kj N_kj + sum_i G_ik N_ik) / (2 d_k).
fn degree_normalize_backward(a: &DenseMatrix, out: &DenseMatrix, grad: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let mut degrees = vec![0.0; n];
    for i in 0..n {
        degrees[i] = a.row(i).iter().sum::<f64>() + 1.0;
    }
    let s: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut correction = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let gn = grad.get(i, j) * out.get(i, j);
            correction[i] -= gn / (2.0 * degrees[i]);
            correction[j] -= gn / (2.0 * degrees[j]);
        }
    }
    let mut dx = DenseMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            dx.set(k, l, grad.get(k, l) * s[k] * s[l] + correction[k]);
        }
    }
    dx
}

fn softmax_backward_rows(y: &DenseMatrix, grad: &DenseMatrix) -> DenseMatrix {
    let (r, c) = y.shape();
    let mut dx = DenseMatrix::zeros(r, c);
    for i in 0..r {
        let yr = y.row(i);
        let g = grad.row(i);
        let dot: f64 = yr.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        for j in 0..c {
            dx.set(i, j, yr[j] * (g[j] - dot));
        }
    }
    dx
}
