//! Reverse-mode differentiation over a fixed set of matrix operations.
//!
//! Values are recorded eagerly as the graph is built; [`Tape::backward`]
//! walks the nodes in reverse creation order. Parameter leaves carry a
//! `(group, offset)` so gradients can be scattered back into flat parameter
//! vectors.

use crate::error::{Error, Result};

use super::mat::{gemm, Mat};
use super::mlp::MlpParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param { group: usize, offset: usize },
    /// `x . w^T + b` with `x: n x in`, `w: out x in`, `b: 1 x out`.
    Linear { x: Var, w: Var, b: Var },
    Tanh(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Min(Var, Var),
    Clamp(Var, f64, f64),
    /// `1 x c -> n x c`.
    BroadcastRows(Var),
    /// `n x c -> n x 1`.
    SumCols(Var),
    /// `-> 1 x 1`.
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Mat,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn map(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    Mat::from_vec(a.rows, a.cols, a.data.iter().map(|v| f(*v)).collect())
}

fn zip(a: &Mat, b: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
    assert!(a.same_shape(b), "shape mismatch {}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols);
    Mat::from_vec(a.rows, a.cols, a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!((m.rows, m.cols), (1, 1), "not a scalar");
        m.data[0]
    }

    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Constant)
    }

    /// A differentiable leaf whose gradient lands at `offset..` of parameter group `group`.
    pub fn param(&mut self, value: Mat, group: usize, offset: usize) -> Var {
        self.push(value, Op::Param { group, offset })
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(xv.cols, wv.cols, "linear: input width");
        assert_eq!((bv.rows, bv.cols), (1, wv.rows), "linear: bias shape");
        let (n, k, m) = (xv.rows, xv.cols, wv.rows);
        let mut y = Mat::zeros(n, m);
        for r in 0..n {
            y.data[r * m..(r + 1) * m].copy_from_slice(&bv.data);
        }
        gemm(n, k, m, 1.0, &xv.data, k as isize, 1, &wv.data, 1, k as isize, 1.0, &mut y.data);
        self.push(y, Op::Linear { x, w, b })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = map(self.value(a), f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = zip(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = zip(self.value(a), self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = zip(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = map(self.value(a), f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = map(self.value(a), f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = map(self.value(a), |x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = map(self.value(a), |x| k * x);
        self.push(v, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = map(self.value(a), |x| x + k);
        self.push(v, Op::AddScalar(a))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let v = zip(self.value(a), self.value(b), f64::min);
        self.push(v, Op::Min(a, b))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = map(self.value(a), |x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Var {
        let av = self.value(a);
        assert_eq!(av.rows, 1, "broadcast_rows expects a row vector");
        let mut data = Vec::with_capacity(rows * av.cols);
        for _ in 0..rows {
            data.extend_from_slice(&av.data);
        }
        let v = Mat::from_vec(rows, av.cols, data);
        self.push(v, Op::BroadcastRows(a))
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = (0..av.rows).map(|r| av.row(r).iter().sum()).collect();
        let v = Mat::from_vec(av.rows, 1, data);
        self.push(v, Op::SumCols(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Mat::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let s = av.data.iter().sum::<f64>() / av.data.len() as f64;
        self.push(Mat::scalar(s), Op::Mean(a))
    }

    /// Records an MLP forward pass; parameters become leaves of `group`
    /// starting at `base_offset`.
    pub fn mlp(&mut self, params: &MlpParams, x: Var, group: usize, base_offset: usize) -> Var {
        let layout = params.layout().clone();
        let last = layout.num_layers() - 1;
        let mut h = x;
        for l in 0..=last {
            let (fan_in, fan_out) = (layout.sizes()[l], layout.sizes()[l + 1]);
            let (wo, bo) = layout.offsets(l);
            let w = self.param(Mat::from_vec(fan_out, fan_in, params.weights(l).to_vec()), group, base_offset + wo);
            let b = self.param(Mat::from_vec(1, fan_out, params.bias(l).to_vec()), group, base_offset + bo);
            h = self.linear(h, w, b);
            if l != last {
                h = self.tanh(h);
            }
        }
        h
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if (lv.rows, lv.cols) != (1, 1) {
            return Err(Error::invalid("backward needs a scalar loss"));
        }
        if !lv.data[0].is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let mut grads: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Mat::scalar(1.0));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => existing.data.iter_mut().zip(&g.data).for_each(|(e, x)| *e += x),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Constant | Op::Param { .. } => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(x), self.value(w));
                    let (n, k, m) = (xv.rows, xv.cols, wv.rows);
                    // dX = dY . W   (n x m)(m x k)
                    let mut dx = Mat::zeros(n, k);
                    gemm(n, m, k, 1.0, &g.data, m as isize, 1, &wv.data, k as isize, 1, 0.0, &mut dx.data);
                    // dW = dY^T . X (m x n)(n x k)
                    let mut dw = Mat::zeros(m, k);
                    gemm(m, n, k, 1.0, &g.data, 1, m as isize, &xv.data, k as isize, 1, 0.0, &mut dw.data);
                    let mut db = Mat::zeros(1, m);
                    for r in 0..n {
                        for (d, v) in db.data.iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    acc(&mut grads, x, dx);
                    acc(&mut grads, w, dw);
                    acc(&mut grads, b, db);
                }
                Op::Tanh(a) => {
                    let d = zip(&g, &node.value, |g, y| g * (1.0 - y * y));
                    acc(&mut grads, a, d);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, a, g.clone());
                    acc(&mut grads, b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, b, map(&g, |x| -x));
                    acc(&mut grads, a, g);
                }
                Op::Mul(a, b) => {
                    let da = zip(&g, self.value(b), |g, y| g * y);
                    let db = zip(&g, self.value(a), |g, x| g * x);
                    acc(&mut grads, a, da);
                    acc(&mut grads, b, db);
                }
                Op::Exp(a) => {
                    let d = zip(&g, &node.value, |g, y| g * y);
                    acc(&mut grads, a, d);
                }
                Op::Log(a) => {
                    let d = zip(&g, self.value(a), |g, x| g / x);
                    acc(&mut grads, a, d);
                }
                Op::Square(a) => {
                    let d = zip(&g, self.value(a), |g, x| 2.0 * g * x);
                    acc(&mut grads, a, d);
                }
                Op::Scale(a, k) => acc(&mut grads, a, map(&g, |x| k * x)),
                Op::AddScalar(a) => acc(&mut grads, a, g),
                Op::Min(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let pick_a: Vec<bool> = av.data.iter().zip(&bv.data).map(|(x, y)| x <= y).collect();
                    let mut da = g.clone();
                    let mut db = g;
                    for (j, &pa) in pick_a.iter().enumerate() {
                        if pa {
                            db.data[j] = 0.0;
                        } else {
                            da.data[j] = 0.0;
                        }
                    }
                    acc(&mut grads, a, da);
                    acc(&mut grads, b, db);
                }
                Op::Clamp(a, lo, hi) => {
                    let d = zip(&g, self.value(a), |g, x| if x < lo || x > hi { 0.0 } else { g });
                    acc(&mut grads, a, d);
                }
                Op::BroadcastRows(a) => {
                    let mut d = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (dv, v) in d.data.iter_mut().zip(g.row(r)) {
                            *dv += v;
                        }
                    }
                    acc(&mut grads, a, d);
                }
                Op::SumCols(a) => {
                    let av = self.value(a);
                    let mut d = Mat::zeros(av.rows, av.cols);
                    for r in 0..av.rows {
                        d.data[r * av.cols..(r + 1) * av.cols].fill(g.data[r]);
                    }
                    acc(&mut grads, a, d);
                }
                Op::Sum(a) => {
                    let av = self.value(a);
                    acc(&mut grads, a, Mat::from_vec(av.rows, av.cols, vec![g.data[0]; av.data.len()]));
                }
                Op::Mean(a) => {
                    let av = self.value(a);
                    let k = g.data[0] / av.data.len() as f64;
                    acc(&mut grads, a, Mat::from_vec(av.rows, av.cols, vec![k; av.data.len()]));
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Scatters leaf gradients of parameter group `group` into a flat vector of length `len`.
    pub fn param_grad(&self, grads: &Gradients, group: usize, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param { group: g, offset } = node.op {
                if g != group {
                    continue;
                }
                if let Some(Some(grad)) = grads.grads.get(i) {
                    for (o, v) in out[offset..offset + grad.data.len()].iter_mut().zip(&grad.data) {
                        *o += v;
                    }
                }
            }
        }
        out
    }
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn of(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}
