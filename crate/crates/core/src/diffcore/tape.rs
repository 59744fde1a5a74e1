//! The recording trace: eager forward evaluation plus reverse-mode sweeps
//! whose adjoint rules are themselves emitted as trace operations.

use std::sync::Arc;

use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

use super::Tensor;

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ValId(usize);

impl ValId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<S> {
    Leaf,
    Matmul,
    Transpose,
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    AddScalar,
    /// Matrix `[m, n]` plus a row vector `[n]` broadcast over rows.
    AddBias,
    /// `[m, n] -> [n]`, summing over rows.
    SumRows,
    /// `[n] -> [m, n]`, repeating the vector over `m` rows.
    BroadcastRows,
    /// `[m, n] -> [m, 1]`, summing over columns.
    RowSum,
    /// `[m, 1] -> [m, n]`, repeating the column over `n` columns.
    BroadcastCols,
    ConcatCols,
    SliceCols {
        start: usize,
        len: usize,
    },
    GatherRows(Arc<Vec<usize>>),
    /// Adds each input row into row `idx[k]` of an `[rows, n]` zero matrix.
    ScatterAddRows(Arc<Vec<usize>>),
    Sigmoid,
    Tanh,
    Relu,
    Square,
    Sqrt,
    ReduceSum,
    BroadcastScalar,
    /// Sparse matrix times `[n, 1]` column.
    SpMatVec(Arc<CsrMatrix<S>>),
    /// Transposed sparse matrix times `[m, 1]` column.
    SpMatVecT(Arc<CsrMatrix<S>>),
}

struct Node<S> {
    op: Op<S>,
    inputs: Vec<ValId>,
    value: Tensor<S>,
}

/// Recording trace. Operations evaluate eagerly; [`Tape::vjp`] appends the
/// reverse sweep as further operations, so second-order quantities of the
/// grad-of-VJP form come out of a second sweep.
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node at position `mark` or later. Handles obtained after
    /// the mark become invalid; the caller is responsible for not reusing
    /// them.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
    }

    pub fn value(&self, id: ValId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op<S>, inputs: Vec<ValId>, value: Tensor<S>) -> ValId {
        self.nodes.push(Node { op, inputs, value });
        ValId(self.nodes.len() - 1)
    }

    /// Inserts a tensor as a leaf. Whether a leaf is differentiated is
    /// decided per sweep through the `wrt` list of [`Tape::vjp`].
    pub fn leaf(&mut self, value: Tensor<S>) -> ValId {
        self.push(Op::Leaf, Vec::new(), value)
    }

    /// Alias of [`Tape::leaf`] for values meant as constants.
    pub fn constant(&mut self, value: Tensor<S>) -> ValId {
        self.leaf(value)
    }

    fn mat_dims(&self, id: ValId) -> (usize, usize) {
        let s = self.value(id).shape();
        assert_eq!(s.len(), 2, "expected a matrix, got shape {s:?}");
        (s[0], s[1])
    }

    // ---- primitive operations -------------------------------------------

    pub fn matmul(&mut self, a: ValId, b: ValId) -> ValId {
        let (m, k) = self.mat_dims(a);
        let (k2, n) = self.mat_dims(b);
        assert_eq!(k, k2, "matmul inner dimensions {k} vs {k2}");
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            for l in 0..k {
                let aval = av[i * k + l];
                if aval == S::zero() {
                    continue;
                }
                let brow = &bv[l * n..(l + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += aval * brow[j];
                }
            }
        }
        self.push(Op::Matmul, vec![a, b], Tensor::matrix(m, n, out))
    }

    pub fn transpose(&mut self, a: ValId) -> ValId {
        let (m, n) = self.mat_dims(a);
        let av = self.value(a).data();
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        self.push(Op::Transpose, vec![a], Tensor::matrix(n, m, out))
    }

    fn zip_same_shape(&mut self, a: ValId, b: ValId, op: Op<S>, f: impl Fn(S, S) -> S) -> ValId {
        assert_eq!(
            self.value(a).shape(),
            self.value(b).shape(),
            "elementwise op on mismatched shapes"
        );
        let shape = self.value(a).shape().to_vec();
        let out: Vec<S> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(op, vec![a, b], Tensor::new(shape, out))
    }

    pub fn add(&mut self, a: ValId, b: ValId) -> ValId {
        self.zip_same_shape(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: ValId, b: ValId) -> ValId {
        self.zip_same_shape(a, b, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&mut self, a: ValId, b: ValId) -> ValId {
        self.zip_same_shape(a, b, Op::Mul, |x, y| x * y)
    }

    pub fn div(&mut self, a: ValId, b: ValId) -> ValId {
        self.zip_same_shape(a, b, Op::Div, |x, y| x / y)
    }

    fn map_unary(&mut self, a: ValId, op: Op<S>, f: impl Fn(S) -> S) -> ValId {
        let shape = self.value(a).shape().to_vec();
        let out: Vec<S> = self.value(a).data().iter().map(|&x| f(x)).collect();
        self.push(op, vec![a], Tensor::new(shape, out))
    }

    pub fn scale(&mut self, a: ValId, c: f64) -> ValId {
        let sc = S::c(c);
        self.map_unary(a, Op::Scale(c), |x| x * sc)
    }

    pub fn add_scalar(&mut self, a: ValId, c: f64) -> ValId {
        let sc = S::c(c);
        self.map_unary(a, Op::AddScalar, |x| x + sc)
    }

    pub fn add_bias(&mut self, a: ValId, bias: ValId) -> ValId {
        let (m, n) = self.mat_dims(a);
        let bs = self.value(bias).shape();
        assert_eq!(bs, &[n], "bias shape {bs:?} does not match {n} columns");
        let av = self.value(a).data();
        let bv = self.value(bias).data();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                out.push(av[i * n + j] + bv[j]);
            }
        }
        self.push(Op::AddBias, vec![a, bias], Tensor::matrix(m, n, out))
    }

    pub fn sum_rows(&mut self, a: ValId) -> ValId {
        let (m, n) = self.mat_dims(a);
        let av = self.value(a).data();
        let mut out = vec![S::zero(); n];
        for i in 0..m {
            for j in 0..n {
                out[j] += av[i * n + j];
            }
        }
        self.push(Op::SumRows, vec![a], Tensor::vector(out))
    }

    pub fn broadcast_rows(&mut self, v: ValId, m: usize) -> ValId {
        let s = self.value(v).shape();
        assert_eq!(s.len(), 1, "broadcast_rows expects a vector, got {s:?}");
        let n = s[0];
        let vv = self.value(v).data();
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(vv);
        }
        self.push(Op::BroadcastRows, vec![v], Tensor::matrix(m, n, out))
    }

    pub fn row_sum(&mut self, a: ValId) -> ValId {
        let (m, n) = self.mat_dims(a);
        let av = self.value(a).data();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let mut acc = S::zero();
            for j in 0..n {
                acc += av[i * n + j];
            }
            out.push(acc);
        }
        self.push(Op::RowSum, vec![a], Tensor::matrix(m, 1, out))
    }

    pub fn broadcast_cols(&mut self, c: ValId, n: usize) -> ValId {
        let (m, one) = self.mat_dims(c);
        assert_eq!(one, 1, "broadcast_cols expects an [m, 1] column");
        let cv = self.value(c).data();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for _ in 0..n {
                out.push(cv[i]);
            }
        }
        self.push(Op::BroadcastCols, vec![c], Tensor::matrix(m, n, out))
    }

    pub fn concat_cols(&mut self, parts: &[ValId]) -> ValId {
        assert!(!parts.is_empty(), "concat of zero tensors");
        let m = self.mat_dims(parts[0]).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (pm, pn) = self.mat_dims(p);
                assert_eq!(pm, m, "concat_cols row mismatch");
                pn
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                let pv = self.value(p).data();
                out.extend_from_slice(&pv[i * w..(i + 1) * w]);
            }
        }
        self.push(Op::ConcatCols, parts.to_vec(), Tensor::matrix(m, total, out))
    }

    pub fn slice_cols(&mut self, a: ValId, start: usize, len: usize) -> ValId {
        let (m, n) = self.mat_dims(a);
        assert!(start + len <= n, "slice {start}+{len} beyond {n} columns");
        let av = self.value(a).data();
        let mut out = Vec::with_capacity(m * len);
        for i in 0..m {
            out.extend_from_slice(&av[i * n + start..i * n + start + len]);
        }
        self.push(
            Op::SliceCols { start, len },
            vec![a],
            Tensor::matrix(m, len, out),
        )
    }

    pub fn gather_rows(&mut self, a: ValId, idx: Arc<Vec<usize>>) -> ValId {
        let (m, n) = self.mat_dims(a);
        let av = self.value(a).data();
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx.iter() {
            assert!(i < m, "gather index {i} out of {m} rows");
            out.extend_from_slice(&av[i * n..(i + 1) * n]);
        }
        let k = idx.len();
        self.push(Op::GatherRows(idx), vec![a], Tensor::matrix(k, n, out))
    }

    /// Scatter-add by row index; duplicate indices accumulate. This is the
    /// segment-sum primitive: rows sharing an index are summed.
    pub fn scatter_add_rows(&mut self, a: ValId, idx: Arc<Vec<usize>>, rows: usize) -> ValId {
        let (k, n) = self.mat_dims(a);
        assert_eq!(k, idx.len(), "scatter indices must match input rows");
        let av = self.value(a).data();
        let mut out = vec![S::zero(); rows * n];
        for (r, &i) in idx.iter().enumerate() {
            assert!(i < rows, "scatter index {i} out of {rows} rows");
            for j in 0..n {
                out[i * n + j] += av[r * n + j];
            }
        }
        self.push(
            Op::ScatterAddRows(idx),
            vec![a],
            Tensor::matrix(rows, n, out),
        )
    }

    pub fn sigmoid(&mut self, a: ValId) -> ValId {
        self.map_unary(a, Op::Sigmoid, |x| S::one() / (S::one() + (-x).exp()))
    }

    pub fn tanh(&mut self, a: ValId) -> ValId {
        self.map_unary(a, Op::Tanh, |x| x.tanh())
    }

    pub fn relu(&mut self, a: ValId) -> ValId {
        self.map_unary(a, Op::Relu, |x| if x > S::zero() { x } else { S::zero() })
    }

    pub fn square(&mut self, a: ValId) -> ValId {
        self.map_unary(a, Op::Square, |x| x * x)
    }

    pub fn sqrt(&mut self, a: ValId) -> ValId {
        self.map_unary(a, Op::Sqrt, |x| x.sqrt())
    }

    pub fn reduce_sum(&mut self, a: ValId) -> ValId {
        let acc = self
            .value(a)
            .data()
            .iter()
            .fold(S::zero(), |acc, &x| acc + x);
        self.push(Op::ReduceSum, vec![a], Tensor::scalar(acc))
    }

    pub fn broadcast_scalar(&mut self, s: ValId, shape: Vec<usize>) -> ValId {
        assert_eq!(self.value(s).numel(), 1, "broadcast_scalar expects a scalar");
        let v = self.value(s).data()[0];
        let n: usize = shape.iter().product();
        self.push(Op::BroadcastScalar, vec![s], Tensor::new(shape, vec![v; n]))
    }

    pub fn sp_matvec(&mut self, a: Arc<CsrMatrix<S>>, x: ValId) -> ValId {
        let (n, one) = self.mat_dims(x);
        assert_eq!(one, 1, "sp_matvec expects an [n, 1] column");
        assert_eq!(n, a.n_cols, "sp_matvec dimension mismatch");
        let y = a.matvec(self.value(x).data());
        let rows = a.n_rows;
        self.push(
            Op::SpMatVec(a),
            vec![x],
            Tensor::matrix(rows, 1, y),
        )
    }

    pub fn sp_matvec_t(&mut self, a: Arc<CsrMatrix<S>>, x: ValId) -> ValId {
        let (m, one) = self.mat_dims(x);
        assert_eq!(one, 1, "sp_matvec_t expects an [m, 1] column");
        assert_eq!(m, a.n_rows, "sp_matvec_t dimension mismatch");
        let y = a.matvec_transpose(self.value(x).data());
        let cols = a.n_cols;
        self.push(
            Op::SpMatVecT(a),
            vec![x],
            Tensor::matrix(cols, 1, y),
        )
    }

    // ---- composites ------------------------------------------------------

    pub fn reduce_mean(&mut self, a: ValId) -> ValId {
        let n = self.value(a).numel().max(1);
        let s = self.reduce_sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    pub fn euclidean_norm(&mut self, a: ValId) -> ValId {
        let sq = self.square(a);
        let s = self.reduce_sum(sq);
        self.sqrt(s)
    }

    /// Mean squared error between two same-shape tensors.
    pub fn mse(&mut self, a: ValId, b: ValId) -> ValId {
        let d = self.sub(a, b);
        let sq = self.square(d);
        self.reduce_mean(sq)
    }

    /// Per-row normalization over the last axis: `(x - mean) / sqrt(var + eps)`.
    pub fn layer_norm_core(&mut self, a: ValId, eps: f64) -> ValId {
        let (_, n) = self.mat_dims(a);
        let mean = {
            let rs = self.row_sum(a);
            self.scale(rs, 1.0 / n as f64)
        };
        let mean_b = self.broadcast_cols(mean, n);
        let centered = self.sub(a, mean_b);
        let var = {
            let sq = self.square(centered);
            let rs = self.row_sum(sq);
            self.scale(rs, 1.0 / n as f64)
        };
        let sigma = {
            let ve = self.add_scalar(var, eps);
            self.sqrt(ve)
        };
        let sigma_b = self.broadcast_cols(sigma, n);
        self.div(centered, sigma_b)
    }

    /// Alias: sums rows sharing a segment index into `segments` output rows.
    pub fn segment_sum(&mut self, a: ValId, seg: Arc<Vec<usize>>, segments: usize) -> ValId {
        self.scatter_add_rows(a, seg, segments)
    }

    // ---- reverse sweep ----------------------------------------------------

    /// Reverse sweep from `output` seeded with `seed` (same shape as the
    /// output). Returns, for each entry of `wrt`, the adjoint value
    /// `seedᵀ · ∂output/∂wrt` as a new trace node, or `None` when the output
    /// does not depend on it. The sweep appends ordinary operations, so its
    /// results can be differentiated by a further sweep.
    pub fn vjp(&mut self, output: ValId, seed: ValId, wrt: &[ValId]) -> Vec<Option<ValId>> {
        assert_eq!(
            self.value(output).shape(),
            self.value(seed).shape(),
            "seed shape must match output shape"
        );
        let horizon = output.0 + 1;
        // Nodes through which some `wrt` target is reachable.
        let mut relevant = vec![false; horizon];
        for w in wrt {
            if w.0 < horizon {
                relevant[w.0] = true;
            }
        }
        for i in 0..horizon {
            if !relevant[i] {
                relevant[i] = self.nodes[i].inputs.iter().any(|inp| relevant[inp.0]);
            }
        }

        let mut adjoint: Vec<Option<ValId>> = vec![None; horizon];
        if relevant[output.0] {
            adjoint[output.0] = Some(seed);
        }

        for i in (0..horizon).rev() {
            let g = match adjoint[i] {
                Some(g) => g,
                None => continue,
            };
            let n_inputs = self.nodes[i].inputs.len();
            for slot in 0..n_inputs {
                let input = self.nodes[i].inputs[slot];
                if !relevant[input.0] {
                    continue;
                }
                let contrib = self.adjoint_for(ValId(i), slot, g);
                adjoint[input.0] = Some(match adjoint[input.0] {
                    None => contrib,
                    Some(prev) => self.add(prev, contrib),
                });
            }
        }

        wrt.iter()
            .map(|w| if w.0 < horizon { adjoint[w.0] } else { None })
            .collect()
    }

    /// Adjoint of input `slot` of `node`, given upstream gradient `g`.
    fn adjoint_for(&mut self, node: ValId, slot: usize, g: ValId) -> ValId {
        let inputs = self.nodes[node.0].inputs.clone();
        match &self.nodes[node.0].op {
            Op::Leaf => unreachable!("leaves have no inputs"),
            Op::Matmul => {
                if slot == 0 {
                    let bt = self.transpose(inputs[1]);
                    self.matmul(g, bt)
                } else {
                    let at = self.transpose(inputs[0]);
                    self.matmul(at, g)
                }
            }
            Op::Transpose => self.transpose(g),
            Op::Add => g,
            Op::Sub => {
                if slot == 0 {
                    g
                } else {
                    self.scale(g, -1.0)
                }
            }
            Op::Mul => {
                let other = inputs[1 - slot];
                self.mul(g, other)
            }
            Op::Div => {
                if slot == 0 {
                    self.div(g, inputs[1])
                } else {
                    // d(a/b)/db = -a / b² = -(a/b) / b
                    let gy = self.mul(g, node);
                    let gyb = self.div(gy, inputs[1]);
                    self.scale(gyb, -1.0)
                }
            }
            Op::Scale(c) => {
                let c = *c;
                self.scale(g, c)
            }
            Op::AddScalar => g,
            Op::AddBias => {
                if slot == 0 {
                    g
                } else {
                    self.sum_rows(g)
                }
            }
            Op::SumRows => {
                let m = self.value(inputs[0]).rows();
                self.broadcast_rows(g, m)
            }
            Op::BroadcastRows => self.sum_rows(g),
            Op::RowSum => {
                let n = self.value(inputs[0]).cols();
                self.broadcast_cols(g, n)
            }
            Op::BroadcastCols => self.row_sum(g),
            Op::ConcatCols => {
                let offset: usize = inputs[..slot]
                    .iter()
                    .map(|&p| self.value(p).cols())
                    .sum();
                let len = self.value(inputs[slot]).cols();
                self.slice_cols(g, offset, len)
            }
            Op::SliceCols { start, len } => {
                let (start, len) = (*start, *len);
                let (m, n) = self.mat_dims(inputs[0]);
                let mut parts = Vec::with_capacity(3);
                if start > 0 {
                    parts.push(self.constant(Tensor::zeros(vec![m, start])));
                }
                parts.push(g);
                if start + len < n {
                    parts.push(self.constant(Tensor::zeros(vec![m, n - start - len])));
                }
                if parts.len() == 1 {
                    g
                } else {
                    self.concat_cols(&parts)
                }
            }
            Op::GatherRows(idx) => {
                let idx = Arc::clone(idx);
                let m = self.value(inputs[0]).rows();
                self.scatter_add_rows(g, idx, m)
            }
            Op::ScatterAddRows(idx) => {
                let idx = Arc::clone(idx);
                self.gather_rows(g, idx)
            }
            Op::Sigmoid => {
                // g · y · (1 - y)
                let neg = self.scale(node, -1.0);
                let one_minus = self.add_scalar(neg, 1.0);
                let gy = self.mul(g, node);
                self.mul(gy, one_minus)
            }
            Op::Tanh => {
                // g · (1 - y²)
                let y2 = self.square(node);
                let neg = self.scale(y2, -1.0);
                let one_minus = self.add_scalar(neg, 1.0);
                self.mul(g, one_minus)
            }
            Op::Relu => {
                // Subgradient with relu'(x <= 0) = 0; the mask is constant, so
                // nothing further differentiates through it.
                let mask: Vec<S> = self
                    .value(inputs[0])
                    .data()
                    .iter()
                    .map(|&x| if x > S::zero() { S::one() } else { S::zero() })
                    .collect();
                let shape = self.value(inputs[0]).shape().to_vec();
                let m = self.constant(Tensor::new(shape, mask));
                self.mul(g, m)
            }
            Op::Square => {
                let gx = self.mul(g, inputs[0]);
                self.scale(gx, 2.0)
            }
            Op::Sqrt => {
                // g / (2 √x)
                let two_y = self.scale(node, 2.0);
                self.div(g, two_y)
            }
            Op::ReduceSum => {
                let shape = self.value(inputs[0]).shape().to_vec();
                self.broadcast_scalar(g, shape)
            }
            Op::BroadcastScalar => self.reduce_sum(g),
            Op::SpMatVec(a) => {
                let a = Arc::clone(a);
                self.sp_matvec_t(a, g)
            }
            Op::SpMatVecT(a) => {
                let a = Arc::clone(a);
                self.sp_matvec(a, g)
            }
        }
    }
}
