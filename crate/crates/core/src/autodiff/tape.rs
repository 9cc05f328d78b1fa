//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is built fresh for every training step. Each operation pushes a
//! node holding its forward value and whatever it needs for the backward
//! rule; [`Tape::backward`] walks the nodes in reverse and accumulates
//! gradients into the [`ParamStore`]. Calling `backward` twice without
//! [`ParamStore::zero_grad`] in between adds the gradients together.

use std::f64::consts::PI;
use std::rc::Rc;

use super::matrix::{gemm_into, Matrix, Real};
use super::params::{ParamId, ParamStore};
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const LAYER_NORM_EPS: f64 = 1e-5;
const L2_NORM_EPS: f64 = 1e-12;

enum Op<T> {
    Constant,
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Transpose(Var),
    RowGather(Var, Rc<[usize]>),
    ConcatCols(Var, Var),
    Relu(Var),
    Gelu(Var),
    Sigmoid(Var),
    Exp(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Matrix<T>,
        rstd: Vec<T>,
    },
    SpMM(Rc<SparseMatrix<T>>, Var),
    SegmentMax {
        x: Var,
        argmax: Vec<usize>,
    },
    RowL2Normalize {
        x: Var,
        norms: Vec<T>,
    },
    Sum(Var),
    SumSquares(Var),
    RowDot(Var, Var),
    MaskedMse {
        pred: Var,
        diff: Vec<T>,
        count: usize,
    },
    WeightedBce {
        logits: Var,
        labels: Rc<[T]>,
        weights: Rc<[T]>,
        total_weight: T,
    },
    GaussianKl {
        mu: Var,
        log_sigma: Var,
    },
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Gradients with respect to every `Input` leaf, indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape {
        op,
        left: a,
        right: b,
    }
}

#[inline]
fn std_normal_cdf<T: Real>(x: T) -> T {
    T::from_f64(0.5) * (T::one() + (x * T::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

#[inline]
fn std_normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) * T::from_f64(0.5)).exp() * T::from_f64(1.0 / (2.0 * PI).sqrt())
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A value that takes no gradient.
    pub fn constant(&mut self, m: Matrix<T>) -> Var {
        self.push(m, Op::Constant, false)
    }

    /// A leaf whose gradient is reported by [`Tape::gradients`].
    pub fn input(&mut self, m: Matrix<T>) -> Var {
        self.push(m, Op::Input, true)
    }

    /// A leaf bound to a stored parameter; `backward` accumulates into it.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(shape_err("matmul", va.shape(), vb.shape()));
        }
        let mut out = Matrix::zeros(va.rows(), vb.cols());
        gemm_into(va, false, vb, false, T::zero(), &mut out);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    fn zip_same(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Matrix<T>> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(op, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Matrix::from_vec(va.rows(), va.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("sub", a, b, |x, y| x - y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Sub(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("mul", a, b, |x, y| x * y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    /// Adds a `1×c` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(shape_err("add_row", va.shape(), vr.shape()));
        }
        let mut out = va.clone();
        for i in 0..out.rows() {
            for (x, &b) in out.row_mut(i).iter_mut().zip(vr.data()) {
                *x += b;
            }
        }
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(out, Op::AddRow(a, row), ng))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let out = self.value(a).map(|x| x * k);
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, k), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let ng = self.ng(a);
        self.push(out, Op::Transpose(a), ng)
    }

    /// Selects rows by index; equivalent to multiplying by a one-hot matrix.
    pub fn row_gather(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let va = self.value(a);
        let cols = va.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            if i >= va.rows() {
                return Err(Error::NodeOutOfRange {
                    index: i,
                    n_nodes: va.rows(),
                });
            }
            data.extend_from_slice(va.row(i));
        }
        let out = Matrix::from_vec(idx.len(), cols, data)?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::RowGather(a, idx.into()), ng))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rows() != vb.rows() {
            return Err(shape_err("concat_cols", va.shape(), vb.shape()));
        }
        let (ca, cb) = (va.cols(), vb.cols());
        let mut out = Matrix::zeros(va.rows(), ca + cb);
        for i in 0..va.rows() {
            let r = out.row_mut(i);
            r[..ca].copy_from_slice(va.row(i));
            r[ca..].copy_from_slice(vb.row(i));
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::ConcatCols(a, b), ng))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(T::zero()));
        let ng = self.ng(a);
        self.push(out, Op::Relu(a), ng)
    }

    /// Exact GELU: `x * Φ(x)` with `Φ` the standard normal CDF.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * std_normal_cdf(x));
        let ng = self.ng(a);
        self.push(out, Op::Gelu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let ng = self.ng(a);
        self.push(out, Op::Sigmoid(a), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.exp());
        let ng = self.ng(a);
        self.push(out, Op::Exp(a), ng)
    }

    /// Normalizes each row to zero mean and unit variance, then applies the
    /// `1×c` scale and shift. Variance is guarded by `1e-5`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let vx = self.value(x);
        let (rows, cols) = vx.shape();
        for p in [gamma, beta] {
            let s = self.shape(p);
            if s != (1, cols) {
                return Err(shape_err("layer_norm", (rows, cols), s));
            }
        }
        let eps = T::from_f64(LAYER_NORM_EPS);
        let inv_c = T::from_f64(1.0 / cols as f64);
        let mut xhat = Matrix::zeros(rows, cols);
        let mut rstd = Vec::with_capacity(rows);
        for i in 0..rows {
            let r = vx.row(i);
            let mean = r.iter().copied().sum::<T>() * inv_c;
            let var = r.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
            let s = T::one() / (var + eps).sqrt();
            for (o, &v) in xhat.row_mut(i).iter_mut().zip(r) {
                *o = (v - mean) * s;
            }
            rstd.push(s);
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut out = xhat.clone();
        for i in 0..rows {
            for ((o, &gj), &bj) in out.row_mut(i).iter_mut().zip(g).zip(b) {
                *o = *o * gj + bj;
            }
        }
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            ng,
        ))
    }

    /// Sparse-dense product `s * x`.
    pub fn spmm(&mut self, s: Rc<SparseMatrix<T>>, x: Var) -> Result<Var> {
        let vx = self.value(x);
        if vx.rows() != s.n() {
            return Err(shape_err("spmm", (s.n(), s.n()), vx.shape()));
        }
        let out = s.mul(vx);
        let ng = self.ng(x);
        Ok(self.push(out, Op::SpMM(s, x), ng))
    }

    /// Column-wise max over consecutive row segments of `x`.
    ///
    /// Segment `i` covers rows `offsets[i]..offsets[i+1]`; empty segments
    /// produce a zero row.
    pub fn segment_max(&mut self, x: Var, offsets: &[usize]) -> Result<Var> {
        let vx = self.value(x);
        let n = offsets.len().saturating_sub(1);
        if offsets.last().copied().unwrap_or(0) != vx.rows() {
            return Err(shape_err("segment_max", vx.shape(), (n, vx.cols())));
        }
        let d = vx.cols();
        let mut out = Matrix::zeros(n, d);
        let mut argmax = vec![usize::MAX; n * d];
        for i in 0..n {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            if lo == hi {
                continue;
            }
            let o = out.row_mut(i);
            o.copy_from_slice(vx.row(lo));
            let am = &mut argmax[i * d..(i + 1) * d];
            am.iter_mut().for_each(|a| *a = lo);
            for r in lo + 1..hi {
                for (j, &v) in vx.row(r).iter().enumerate() {
                    if v > o[j] {
                        o[j] = v;
                        am[j] = r;
                    }
                }
            }
        }
        let ng = self.ng(x);
        Ok(self.push(out, Op::SegmentMax { x, argmax }, ng))
    }

    /// Scales each row to unit Euclidean norm (rows below `1e-12` are divided by it).
    pub fn row_l2_normalize(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let eps = T::from_f64(L2_NORM_EPS);
        let mut out = vx.clone();
        let mut norms = Vec::with_capacity(vx.rows());
        for i in 0..vx.rows() {
            let nrm = vx.row(i).iter().map(|&v| v * v).sum::<T>().sqrt().max(eps);
            out.row_mut(i).iter_mut().for_each(|v| *v = *v / nrm);
            norms.push(nrm);
        }
        let ng = self.ng(x);
        self.push(out, Op::RowL2Normalize { x, norms }, ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).sum());
        let ng = self.ng(a);
        self.push(out, Op::Sum(a), ng)
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|&x| x * x).sum();
        let ng = self.ng(a);
        self.push(Matrix::scalar(s), Op::SumSquares(a), ng)
    }

    /// Row-wise inner products, `n×1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("row_dot", va.shape(), vb.shape()));
        }
        let data = (0..va.rows())
            .map(|i| va.row(i).iter().zip(vb.row(i)).map(|(&x, &y)| x * y).sum())
            .collect();
        let out = Matrix::from_vec(va.rows(), 1, data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::RowDot(a, b), ng))
    }

    /// Mean squared error over entries whose mask is set.
    pub fn masked_mse(&mut self, pred: Var, target: &[T], mask: &[bool]) -> Result<Var> {
        let vp = self.value(pred);
        if vp.len() != target.len() || vp.len() != mask.len() {
            return Err(Error::LengthMismatch(vp.len(), target.len().min(mask.len())));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::param("masked_mse with an empty mask"));
        }
        let diff: Vec<T> = vp
            .data()
            .iter()
            .zip(target)
            .zip(mask)
            .map(|((&p, &t), &m)| if m { p - t } else { T::zero() })
            .collect();
        let loss = diff.iter().map(|&d| d * d).sum::<T>() / T::from_f64(count as f64);
        let ng = self.ng(pred);
        Ok(self.push(Matrix::scalar(loss), Op::MaskedMse { pred, diff, count }, ng))
    }

    /// Weighted binary cross-entropy on logits, normalized by the total weight.
    pub fn weighted_bce_with_logits(&mut self, logits: Var, labels: &[T], weights: &[T]) -> Result<Var> {
        let vl = self.value(logits);
        if vl.len() != labels.len() || vl.len() != weights.len() {
            return Err(Error::LengthMismatch(vl.len(), labels.len().min(weights.len())));
        }
        let total_weight: T = weights.iter().copied().sum();
        if total_weight <= T::zero() {
            return Err(Error::param("bce total weight must be positive"));
        }
        let mut acc = T::zero();
        for ((&x, &y), &w) in vl.data().iter().zip(labels).zip(weights) {
            let l = x.max(T::zero()) - x * y + (-x.abs()).exp().ln_1p();
            acc += w * l;
        }
        let ng = self.ng(logits);
        Ok(self.push(
            Matrix::scalar(acc / total_weight),
            Op::WeightedBce {
                logits,
                labels: labels.into(),
                weights: weights.into(),
                total_weight,
            },
            ng,
        ))
    }

    /// KL divergence of `N(mu, exp(log_sigma)^2)` from `N(0, 1)`, averaged over entries.
    pub fn gaussian_kl(&mut self, mu: Var, log_sigma: Var) -> Result<Var> {
        let (vm, vs) = (self.value(mu), self.value(log_sigma));
        if vm.shape() != vs.shape() {
            return Err(shape_err("gaussian_kl", vm.shape(), vs.shape()));
        }
        let half = T::from_f64(0.5);
        let two = T::from_f64(2.0);
        let s: T = vm
            .data()
            .iter()
            .zip(vs.data())
            .map(|(&m, &ls)| half * ((two * ls).exp() + m * m - T::one() - two * ls))
            .sum();
        let out = Matrix::scalar(s / T::from_f64(vm.len() as f64));
        let ng = self.ng(mu) || self.ng(log_sigma);
        Ok(self.push(out, Op::GaussianKl { mu, log_sigma }, ng))
    }

    /// Runs the backward pass and accumulates parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        let grads = self.run_backward(loss)?;
        for (node, g) in self.nodes.iter().zip(grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.get_mut(*id).grad.add_assign(&g);
            }
        }
        Ok(())
    }

    /// Runs the backward pass and returns the gradients of every leaf.
    pub fn gradients(&self, loss: Var) -> Result<Gradients<T>> {
        Ok(Gradients {
            grads: self.run_backward(loss)?,
        })
    }

    fn run_backward(&self, loss: Var) -> Result<Vec<Option<Matrix<T>>>> {
        if self.shape(loss) != (1, 1) {
            return Err(shape_err("backward (loss must be scalar)", self.shape(loss), (1, 1)));
        }
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                grads[i] = None;
                continue;
            }
            let is_leaf = matches!(node.op, Op::Constant | Op::Input | Op::Param(_));
            if is_leaf {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
        }
        Ok(grads)
    }

    fn accumulate(&self, grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node<T>, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) {
        let y = &node.value;
        match &node.op {
            Op::Constant | Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    let mut ga = Matrix::zeros(va.rows(), va.cols());
                    gemm_into(g, false, vb, true, T::zero(), &mut ga);
                    self.accumulate(grads, *a, ga);
                }
                if self.ng(*b) {
                    let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                    gemm_into(va, true, g, false, T::zero(), &mut gb);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    let d = g.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
                    self.accumulate(grads, *a, Matrix::from_vec(g.rows(), g.cols(), d).unwrap());
                }
                if self.ng(*b) {
                    let d = g.data().iter().zip(va.data()).map(|(&x, &y)| x * y).collect();
                    self.accumulate(grads, *b, Matrix::from_vec(g.rows(), g.cols(), d).unwrap());
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                if self.ng(*row) {
                    self.accumulate(grads, *row, column_sums(g));
                }
            }
            Op::Scale(a, k) => {
                let k = *k;
                self.accumulate(grads, *a, g.map(|x| x * k));
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::RowGather(a, idx) => {
                let va = self.value(*a);
                let mut ga = Matrix::zeros(va.rows(), va.cols());
                for (r, &i) in idx.iter().enumerate() {
                    for (o, &x) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let ga = Matrix::from_fn(g.rows(), ca, |i, j| g.get(i, j));
                let gb = Matrix::from_fn(g.rows(), cb, |i, j| g.get(i, ca + j));
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Relu(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gx, &yx)| if yx > T::zero() { gx } else { T::zero() })
                    .collect();
                self.accumulate(grads, *a, Matrix::from_vec(g.rows(), g.cols(), d).unwrap());
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                let d = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gx, &xv)| gx * (std_normal_cdf(xv) + xv * std_normal_pdf(xv)))
                    .collect();
                self.accumulate(grads, *a, Matrix::from_vec(g.rows(), g.cols(), d).unwrap());
            }
            Op::Sigmoid(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gx, &s)| gx * s * (T::one() - s))
                    .collect();
                self.accumulate(grads, *a, Matrix::from_vec(g.rows(), g.cols(), d).unwrap());
            }
            Op::Exp(a) => {
                let d = g.data().iter().zip(y.data()).map(|(&gx, &e)| gx * e).collect();
                self.accumulate(grads, *a, Matrix::from_vec(g.rows(), g.cols(), d).unwrap());
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let (rows, cols) = xhat.shape();
                let gam = self.value(*gamma).data();
                if self.ng(*beta) {
                    self.accumulate(grads, *beta, column_sums(g));
                }
                if self.ng(*gamma) {
                    let mut dg = Matrix::zeros(1, cols);
                    for i in 0..rows {
                        for ((o, &gx), &xh) in dg.data_mut().iter_mut().zip(g.row(i)).zip(xhat.row(i)) {
                            *o += gx * xh;
                        }
                    }
                    self.accumulate(grads, *gamma, dg);
                }
                if self.ng(*x) {
                    let inv_c = T::from_f64(1.0 / cols as f64);
                    let mut dx = Matrix::zeros(rows, cols);
                    let mut dxhat = vec![T::zero(); cols];
                    for i in 0..rows {
                        let (gr, xr) = (g.row(i), xhat.row(i));
                        for j in 0..cols {
                            dxhat[j] = gr[j] * gam[j];
                        }
                        let m1 = dxhat.iter().copied().sum::<T>() * inv_c;
                        let m2 = dxhat.iter().zip(xr).map(|(&a, &b)| a * b).sum::<T>() * inv_c;
                        for (j, o) in dx.row_mut(i).iter_mut().enumerate() {
                            *o = rstd[i] * (dxhat[j] - m1 - xr[j] * m2);
                        }
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::SpMM(s, x) => self.accumulate(grads, *x, s.mul_transposed(g)),
            Op::SegmentMax { x, argmax } => {
                let vx = self.value(*x);
                let d = vx.cols();
                let mut gx = Matrix::zeros(vx.rows(), d);
                for (k, &r) in argmax.iter().enumerate() {
                    if r != usize::MAX {
                        let j = k % d;
                        let i = k / d;
                        let cur = gx.get(r, j);
                        gx.set(r, j, cur + g.get(i, j));
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::RowL2Normalize { x, norms } => {
                let eps = T::from_f64(L2_NORM_EPS);
                let mut gx = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let nrm = norms[i];
                    let proj = if nrm > eps {
                        yr.iter().zip(gr).map(|(&a, &b)| a * b).sum::<T>()
                    } else {
                        T::zero()
                    };
                    for ((o, &yv), &gv) in gx.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = (gv - yv * proj) / nrm;
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.accumulate(grads, *a, Matrix::filled(r, c, g.get(0, 0)));
            }
            Op::SumSquares(a) => {
                let two_g = T::from_f64(2.0) * g.get(0, 0);
                self.accumulate(grads, *a, self.value(*a).map(|x| x * two_g));
            }
            Op::RowDot(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let ga = Matrix::from_fn(va.rows(), va.cols(), |i, j| g.get(i, 0) * vb.get(i, j));
                let gb = Matrix::from_fn(va.rows(), va.cols(), |i, j| g.get(i, 0) * va.get(i, j));
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::MaskedMse { pred, diff, count } => {
                let k = T::from_f64(2.0) * g.get(0, 0) / T::from_f64(*count as f64);
                let (r, c) = self.shape(*pred);
                let d = diff.iter().map(|&d| d * k).collect();
                self.accumulate(grads, *pred, Matrix::from_vec(r, c, d).unwrap());
            }
            Op::WeightedBce {
                logits,
                labels,
                weights,
                total_weight,
            } => {
                let k = g.get(0, 0) / *total_weight;
                let vl = self.value(*logits);
                let d = vl
                    .data()
                    .iter()
                    .zip(labels.iter())
                    .zip(weights.iter())
                    .map(|((&x, &y), &w)| k * w * (sigmoid(x) - y))
                    .collect();
                self.accumulate(grads, *logits, Matrix::from_vec(vl.rows(), vl.cols(), d).unwrap());
            }
            Op::GaussianKl { mu, log_sigma } => {
                let vm = self.value(*mu);
                let vs = self.value(*log_sigma);
                let k = g.get(0, 0) / T::from_f64(vm.len() as f64);
                let two = T::from_f64(2.0);
                self.accumulate(grads, *mu, vm.map(|m| m * k));
                self.accumulate(grads, *log_sigma, vs.map(|ls| ((two * ls).exp() - T::one()) * k));
            }
        }
    }
}

fn column_sums<T: Real>(g: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(1, g.cols());
    for i in 0..g.rows() {
        for (o, &x) in out.data_mut().iter_mut().zip(g.row(i)) {
            *o += x;
        }
    }
    out
}
