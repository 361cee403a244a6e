use std::sync::Arc;

use log::warn;

use super::facet_attention::{self, PairIndex};
use super::{ParamStore, Shape, TapeError, Tensor};
use crate::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param(String),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Reshape(Var),
    GatherRows(Var, Arc<[usize]>),
    ScatterAddRows(Var, Arc<[usize]>),
    ReduceSum(Var),
    SquaredL2Rows(Var, Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Ln(Var),
    RowSoftmax(Var),
    FacetAttention {
        u: Var,
        v: Var,
        values: Var,
        pairs: Arc<PairIndex>,
        facets: usize,
        slope: T,
    },
    BinaryCrossEntropy {
        probs: Var,
        labels: Arc<[T]>,
        floor: T,
    },
}

#[derive(Debug)]
struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
}

/// Append-only record of a forward pass.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

fn same_shape(op: &'static str, a: Shape, b: Shape) -> Result<(), TapeError> {
    if a == b {
        Ok(())
    } else {
        Err(TapeError::Dimension { op, left: a, right: b })
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Constant, t)
    }

    /// Reads parameter `name` from the store. Reading the same name twice
    /// yields two leaves whose gradients both land in the store.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var, TapeError> {
        let value = store.value(name)?.clone();
        Ok(self.push(Op::Param(name.to_owned()), value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.cols != sb.rows {
            return Err(TapeError::Dimension { op: "matmul", left: sa, right: sb });
        }
        let out = self.value(a).matmul(self.value(b));
        Ok(self.push(Op::MatMul(a, b), out))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(Op::Transpose(a), out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        same_shape("add", self.shape(a), self.shape(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        same_shape("sub", self.shape(a), self.shape(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), out))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        same_shape("mul", self.shape(a), self.shape(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), out)
    }

    /// `[a ‖ b]` along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.rows != sb.rows {
            return Err(TapeError::Dimension { op: "concat_cols", left: sa, right: sb });
        }
        let (va, vb) = (self.value(a), self.value(b));
        let mut data = Vec::with_capacity(sa.len() + sb.len());
        for r in 0..sa.rows {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let out = Tensor::from_raw(sa.rows, sa.cols + sb.cols, data);
        Ok(self.push(Op::ConcatCols(a, b), out))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, TapeError> {
        let s = self.shape(a);
        if start > end || end > s.cols {
            return Err(TapeError::Dimension {
                op: "slice_cols",
                left: s,
                right: Shape::new(start, end),
            });
        }
        let va = self.value(a);
        let out = Tensor::from_fn(s.rows, end - start, |r, c| va.get(r, start + c));
        Ok(self.push(Op::SliceCols(a, start), out))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, TapeError> {
        let s = self.shape(a);
        if start > end || end > s.rows {
            return Err(TapeError::Dimension {
                op: "slice_rows",
                left: s,
                right: Shape::new(start, end),
            });
        }
        let data = self.value(a).data()[start * s.cols..end * s.cols].to_vec();
        let out = Tensor::from_raw(end - start, s.cols, data);
        Ok(self.push(Op::SliceRows(a, start), out))
    }

    /// Row-major reinterpretation; length must be preserved.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, TapeError> {
        let s = self.shape(a);
        if s.len() != rows * cols {
            return Err(TapeError::Dimension {
                op: "reshape",
                left: s,
                right: Shape::new(rows, cols),
            });
        }
        let out = self.value(a).clone().reshaped(rows, cols);
        Ok(self.push(Op::Reshape(a), out))
    }

    /// Output row `p` is input row `index[p]`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var, TapeError> {
        let s = self.shape(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= s.rows) {
            return Err(TapeError::Index { op: "gather_rows", index: bad, len: s.rows });
        }
        let va = self.value(a);
        let mut data = Vec::with_capacity(index.len() * s.cols);
        for &i in index.iter() {
            data.extend_from_slice(va.row(i));
        }
        let out = Tensor::from_raw(index.len(), s.cols, data);
        Ok(self.push(Op::GatherRows(a, index), out))
    }

    /// Output row `index[p]` accumulates input row `p`, in input order.
    pub fn scatter_add_rows(
        &mut self,
        a: Var,
        index: Arc<[usize]>,
        n_rows: usize,
    ) -> Result<Var, TapeError> {
        let s = self.shape(a);
        if index.len() != s.rows {
            return Err(TapeError::Dimension {
                op: "scatter_add_rows",
                left: s,
                right: Shape::new(index.len(), 1),
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= n_rows) {
            return Err(TapeError::Index { op: "scatter_add_rows", index: bad, len: n_rows });
        }
        let va = self.value(a);
        let mut out = Tensor::zeros(n_rows, s.cols);
        let cols = s.cols;
        for (p, &i) in index.iter().enumerate() {
            let dst = &mut out.data_mut()[i * cols..(i + 1) * cols];
            for (o, &x) in dst.iter_mut().zip(va.row(p)) {
                *o += x;
            }
        }
        Ok(self.push(Op::ScatterAddRows(a, index), out))
    }

    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(Op::ReduceSum(a), out)
    }

    /// Row-wise `‖a_p − b_p‖²`, a column of length `rows`.
    pub fn squared_l2_distance(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        same_shape("squared_l2_distance", self.shape(a), self.shape(b))?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = (0..va.rows())
            .map(|r| {
                va.row(r)
                    .iter()
                    .zip(vb.row(r))
                    .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
            })
            .collect();
        let out = Tensor::from_raw(va.rows(), 1, data);
        Ok(self.push(Op::SquaredL2Rows(a, b), out))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let out = self
            .value(a)
            .map(|x| if x > T::zero() { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(T::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), out)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var, TapeError> {
        let va = self.value(a);
        if let Some(index) = va.data().iter().position(|&x| x <= T::zero()) {
            return Err(TapeError::NonFinite { context: "ln", index });
        }
        let out = va.map(T::ln);
        Ok(self.push(Op::Ln(a), out))
    }

    /// Softmax of every row independently; a `1 x k` input is a vector softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let cols = va.cols();
        let mut data = va.data().to_vec();
        if cols > 0 {
            for row in data.chunks_mut(cols) {
                let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
                let mut total = T::zero();
                for x in row.iter_mut() {
                    *x = (*x - max).exp();
                    total += *x;
                }
                for x in row.iter_mut() {
                    *x /= total;
                }
            }
        }
        let out = Tensor::from_raw(va.rows(), cols, data);
        self.push(Op::RowSoftmax(a), out)
    }

    /// Fused attention aggregation, see [`super::pair_weights`].
    ///
    /// `u`: targets × M, `v`: keys × M, `values`: keys × (M·D).
    /// Returns targets × (M·D).
    pub fn facet_attention(
        &mut self,
        u: Var,
        v: Var,
        values: Var,
        pairs: Arc<PairIndex>,
        slope: T,
    ) -> Result<Var, TapeError> {
        let (su, sv, sx) = (self.shape(u), self.shape(v), self.shape(values));
        let facets = su.cols;
        if su.rows != pairs.n_targets() || facets == 0 {
            return Err(TapeError::Dimension {
                op: "facet_attention",
                left: su,
                right: Shape::new(pairs.n_targets(), facets),
            });
        }
        if sv.rows != pairs.n_keys() || sv.cols != facets {
            return Err(TapeError::Dimension { op: "facet_attention", left: su, right: sv });
        }
        if sx.rows != pairs.n_keys() || sx.cols % facets != 0 {
            return Err(TapeError::Dimension { op: "facet_attention", left: sv, right: sx });
        }
        let data = facet_attention::forward(
            &pairs,
            self.value(u).data(),
            self.value(v).data(),
            self.value(values).data(),
            facets,
            slope,
        );
        let out = Tensor::from_raw(su.rows, sx.cols, data);
        Ok(self.push(
            Op::FacetAttention { u, v, values, pairs, facets, slope },
            out,
        ))
    }

    /// Mean binary cross-entropy of a probability column against 0/1 labels.
    ///
    /// Probabilities must lie in `[0, 1]`; saturated ones are clamped to
    /// `[floor, 1 − floor]` with a warning.
    pub fn binary_cross_entropy(
        &mut self,
        probs: Var,
        labels: Arc<[T]>,
        floor: T,
    ) -> Result<Var, TapeError> {
        let s = self.shape(probs);
        if s.cols != 1 || s.rows != labels.len() || s.rows == 0 {
            return Err(TapeError::Dimension {
                op: "binary_cross_entropy",
                left: s,
                right: Shape::new(labels.len(), 1),
            });
        }
        let p = self.value(probs).data();
        let mut clamped = 0usize;
        let mut total = T::zero();
        for (row, (&raw, &y)) in p.iter().zip(labels.iter()).enumerate() {
            if !(raw >= T::zero() && raw <= T::one()) {
                return Err(TapeError::Probability { row, value: raw.as_f64() });
            }
            let q = clamp_prob(raw, floor);
            if q != raw {
                clamped += 1;
            }
            total += y * q.ln() + (T::one() - y) * (T::one() - q).ln();
        }
        if clamped > 0 {
            warn!("binary cross-entropy clamped {clamped} saturated probabilities");
        }
        let n = T::from_usize(s.rows).unwrap();
        let out = Tensor::scalar(-total / n);
        Ok(self.push(Op::BinaryCrossEntropy { probs, labels, floor }, out))
    }

    /// Adjoints of every node with respect to the 1x1 `root`.
    pub fn gradients(&self, root: Var) -> Result<Gradients<T>, TapeError> {
        let rs = self.shape(root);
        if rs != Shape::new(1, 1) {
            return Err(TapeError::NonScalarRoot(rs));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::ones(1, 1));
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Back-propagates from `root` and adds parameter gradients into `store`.
    pub fn backward(&self, root: Var, store: &mut ParamStore<T>) -> Result<(), TapeError> {
        let grads = self.gradients(root)?;
        for (idx, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(name), Some(g)) = (&node.op, &grads.grads[idx]) {
                store.get_mut(name)?.grad.add_assign(g);
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[idx];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let ga = g.matmul_t(val(*b));
                let gb = val(*a).t_matmul(g);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g.zip_map(val(*b), |x, y| x * y));
                accumulate(grads, *b, g.zip_map(val(*a), |x, y| x * y));
            }
            Op::Scale(a, c) => {
                let c = *c;
                accumulate(grads, *a, g.map(|x| x * c));
            }
            Op::ConcatCols(a, b) => {
                let ca = val(*a).cols();
                let cb = val(*b).cols();
                let ga = Tensor::from_fn(g.rows(), ca, |r, c| g.get(r, c));
                let gb = Tensor::from_fn(g.rows(), cb, |r, c| g.get(r, ca + c));
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::SliceCols(a, start) => {
                let s = val(*a).shape();
                let (start, width) = (*start, g.cols());
                let ga = Tensor::from_fn(s.rows, s.cols, |r, c| {
                    if c >= start && c < start + width {
                        g.get(r, c - start)
                    } else {
                        T::zero()
                    }
                });
                accumulate(grads, *a, ga);
            }
            Op::SliceRows(a, start) => {
                let s = val(*a).shape();
                let mut ga = Tensor::zeros(s.rows, s.cols);
                ga.data_mut()[start * s.cols..start * s.cols + g.shape().len()]
                    .copy_from_slice(g.data());
                accumulate(grads, *a, ga);
            }
            Op::Reshape(a) => {
                let s = val(*a).shape();
                accumulate(grads, *a, g.clone().reshaped(s.rows, s.cols));
            }
            Op::GatherRows(a, index) => {
                let s = val(*a).shape();
                let mut ga = Tensor::zeros(s.rows, s.cols);
                for (p, &i) in index.iter().enumerate() {
                    let dst = &mut ga.data_mut()[i * s.cols..(i + 1) * s.cols];
                    for (o, &x) in dst.iter_mut().zip(g.row(p)) {
                        *o += x;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::ScatterAddRows(a, index) => {
                let cols = g.cols();
                let mut data = Vec::with_capacity(index.len() * cols);
                for &i in index.iter() {
                    data.extend_from_slice(g.row(i));
                }
                accumulate(grads, *a, Tensor::from_raw(index.len(), cols, data));
            }
            Op::ReduceSum(a) => {
                let s = val(*a).shape();
                accumulate(grads, *a, Tensor::filled(s.rows, s.cols, g.data()[0]));
            }
            Op::SquaredL2Rows(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let two = T::lit(2.0);
                let ga = Tensor::from_fn(va.rows(), va.cols(), |r, c| {
                    two * (va.get(r, c) - vb.get(r, c)) * g.data()[r]
                });
                let gb = ga.map(|x| -x);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::LeakyRelu(a, slope) => {
                let slope = *slope;
                let ga = g.zip_map(val(*a), |gx, x| if x > T::zero() { gx } else { gx * slope });
                accumulate(grads, *a, ga);
            }
            Op::Tanh(a) => {
                let ga = g.zip_map(&node.value, |gx, y| gx * (T::one() - y * y));
                accumulate(grads, *a, ga);
            }
            Op::Sigmoid(a) => {
                let ga = g.zip_map(&node.value, |gx, y| gx * y * (T::one() - y));
                accumulate(grads, *a, ga);
            }
            Op::Ln(a) => accumulate(grads, *a, g.zip_map(val(*a), |gx, x| gx / x)),
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let cols = y.cols();
                let mut data = Vec::with_capacity(y.shape().len());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot = yr.iter().zip(gr).fold(T::zero(), |acc, (&p, &q)| acc + p * q);
                    data.extend(yr.iter().zip(gr).map(|(&p, &q)| p * (q - dot)));
                }
                accumulate(grads, *a, Tensor::from_raw(y.rows(), cols, data));
            }
            Op::FacetAttention { u, v, values, pairs, facets, slope } => {
                let (vu, vv, vx) = (val(*u), val(*v), val(*values));
                let out = facet_attention::backward(
                    pairs,
                    vu.data(),
                    vv.data(),
                    vx.data(),
                    g.data(),
                    *facets,
                    *slope,
                );
                accumulate(grads, *u, Tensor::from_raw(vu.rows(), vu.cols(), out.u));
                accumulate(grads, *v, Tensor::from_raw(vv.rows(), vv.cols(), out.v));
                accumulate(grads, *values, Tensor::from_raw(vx.rows(), vx.cols(), out.values));
            }
            Op::BinaryCrossEntropy { probs, labels, floor } => {
                let p = val(*probs);
                let n = T::from_usize(p.rows()).unwrap();
                let scale = g.data()[0] / n;
                let data = p
                    .data()
                    .iter()
                    .zip(labels.iter())
                    .map(|(&raw, &y)| {
                        let q = clamp_prob(raw, *floor);
                        -scale * (y / q - (T::one() - y) / (T::one() - q))
                    })
                    .collect();
                accumulate(grads, *probs, Tensor::from_raw(p.rows(), 1, data));
            }
        }
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn clamp_prob<T: Scalar>(p: T, floor: T) -> T {
    p.max(floor).min(T::one() - floor)
}

/// Adjoints from one backward sweep.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `v`, or `None` when the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}
