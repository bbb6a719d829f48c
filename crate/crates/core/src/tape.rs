//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value and the ids of
//! its inputs. Nodes can only reference earlier nodes, so index order is a
//! topological order and [`Tape::backward`] is a single reverse sweep.

use crate::attention::AttentionMask;
use crate::error::{dim_err, Error, Result};
use crate::tensor::{matmul_nt, matmul_raw, matmul_tn, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Softmax(Var),
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Sum(Var),
    Mean(Var),
    Mse(Var, Var),
    Sqrt(Var),
    Reshape(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                vec![*a, *b]
            }
            Op::Mse(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Transpose(a)
            | Op::Relu(a)
            | Op::Softmax(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Sqrt(a)
            | Op::Reshape(a) => vec![*a],
            Op::Affine { x, w, b } => vec![*x, *w, *b],
            Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Op::Concat { parts, .. } => parts.clone(),
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Ordered record of executed operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// Records an input. Its gradient is tracked iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs_grad = t.requires_grad();
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant (never receives a gradient).
    pub fn constant(&mut self, mut t: Tensor) -> Var {
        t.set_requires_grad(false);
        self.leaf(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated into a leaf by [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.value.zero_grad();
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ta = self.value(a);
        let tb = self.value(b);
        let (m, k) = ta.expect_matrix("matmul")?;
        let (k2, n) = tb.expect_matrix("matmul")?;
        if k != k2 {
            return Err(dim_err("matmul", ta.shape(), tb.shape()));
        }
        let out = matmul_raw(ta.data(), tb.data(), m, k, n);
        let t = Tensor::matrix(m, n, out)?;
        Ok(self.push(t, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    /// Adds a length-`c` vector to every row of an `r×c` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (r, c) = self.value(x).expect_matrix("add_row")?;
        if self.value(row).numel() != c {
            return Err(dim_err("add_row", self.shape(x), self.shape(row)));
        }
        let mut data = self.value(x).data().to_vec();
        let rv = self.value(row).data();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += rv[j];
            }
        }
        let t = Tensor::matrix(r, c, data)?;
        Ok(self.push(t, Op::AddRow(x, row)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x * s).collect())
            .expect("shape preserved");
        self.push(t, Op::Scale(a, s))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).transpose()?;
        Ok(self.push(t, Op::Transpose(a)))
    }

    /// `x·W + b` with `x: r×k`, `W: k×n`, `b: n`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (r, k) = self.value(x).expect_matrix("affine")?;
        let (k2, n) = self.value(w).expect_matrix("affine")?;
        if k != k2 {
            return Err(dim_err("affine", self.shape(x), self.shape(w)));
        }
        if self.value(b).numel() != n {
            return Err(dim_err("affine", self.shape(w), self.shape(b)));
        }
        let mut out = matmul_raw(self.value(x).data(), self.value(w).data(), r, k, n);
        let bias = self.value(b).data();
        for i in 0..r {
            for j in 0..n {
                out[i * n + j] += bias[j];
            }
        }
        let t = Tensor::matrix(r, n, out)?;
        Ok(self.push(t, Op::Affine { x, w, b }))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = Tensor::new(
            v.shape().to_vec(),
            v.data()
                .iter()
                .map(|&x| if x > 0.0 { x } else { 0.0 })
                .collect(),
        )
        .expect("shape preserved");
        self.push(t, Op::Relu(a))
    }

    /// Row-wise layer normalization with affine gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (r, c) = self.value(x).expect_matrix("layer_norm")?;
        if c < 2 {
            return Err(Error::Contract(format!(
                "layer_norm needs at least 2 columns, got {c}"
            )));
        }
        if self.value(gain).numel() != c || self.value(bias).numel() != c {
            return Err(dim_err("layer_norm", self.shape(x), self.shape(gain)));
        }
        let xs = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xs[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[i] = inv;
            for j in 0..c {
                let h = (row[j] - mean) * inv;
                xhat[i * c + j] = h;
                out[i * c + j] = h * g[j] + b[j];
            }
        }
        let t = Tensor::matrix(r, c, out)?;
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }

    /// Row-wise softmax restricted to the entries the mask allows.
    ///
    /// Denied entries are excluded from the exponentiation and come out as
    /// exactly zero. A row with no allowed entry is an error.
    pub fn masked_softmax(&mut self, scores: Var, mask: &AttentionMask) -> Result<Var> {
        let (r, c) = self.value(scores).expect_matrix("masked_softmax")?;
        if mask.rows() != r || mask.cols() != c {
            return Err(dim_err(
                "masked_softmax",
                self.shape(scores),
                &[mask.rows(), mask.cols()],
            ));
        }
        let out = masked_softmax_raw(self.value(scores).data(), r, c, mask)?;
        let t = Tensor::matrix(r, c, out)?;
        Ok(self.push(t, Op::Softmax(scores)))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let refs: Vec<&Tensor> = parts.iter().map(|v| self.value(*v)).collect();
        let t = Tensor::concat(&refs, axis)?;
        Ok(self.push(
            t,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.numel() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Mean squared error between two tensors with the same element count.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.numel() != t.numel() || p.numel() == 0 {
            return Err(dim_err("mse_loss", p.shape(), t.shape()));
        }
        let n = p.numel() as f64;
        let s = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        Ok(self.push(Tensor::scalar(s), Op::Mse(pred, target)))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().map(|x| x.sqrt()).collect(),
        )
        .expect("shape preserved");
        self.push(t, Op::Sqrt(a))
    }

    /// Reshapes to a single row `1×numel`.
    pub fn flatten(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = v.reshape(vec![1, v.numel()]).expect("numel preserved");
        self.push(t, Op::Reshape(a))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Gradients are added into every reachable leaf that requires them;
    /// calling this twice without [`Tape::zero_grad`] accumulates.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(dy) = adj[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                self.nodes[i].value.accumulate_grad(&dy);
                continue;
            }
            for (input, g) in self.local_grads(i, &dy)? {
                if !self.nodes[input.0].needs_grad {
                    continue;
                }
                match &mut adj[input.0] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, dy: &[f64]) -> Result<Vec<(Var, Vec<f64>)>> {
        let node = &self.nodes[i];
        let out = &node.value;
        let grads = match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = (ta.rows(), ta.cols());
                let n = tb.cols();
                let da = matmul_nt(dy, tb.data(), m, n, k);
                let db = matmul_tn(ta.data(), dy, m, k, n);
                vec![(*a, da), (*b, db)]
            }
            Op::Add(a, b) => vec![(*a, dy.to_vec()), (*b, dy.to_vec())],
            Op::AddRow(x, row) => {
                let c = out.cols();
                let mut dr = vec![0.0; c];
                for chunk in dy.chunks(c) {
                    dr.iter_mut().zip(chunk).for_each(|(a, b)| *a += b);
                }
                vec![(*x, dy.to_vec()), (*row, dr)]
            }
            Op::Sub(a, b) => vec![(*a, dy.to_vec()), (*b, dy.iter().map(|g| -g).collect())],
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = dy.iter().zip(tb.data()).map(|(g, y)| g * y).collect();
                let db = dy.iter().zip(ta.data()).map(|(g, x)| g * x).collect();
                vec![(*a, da), (*b, db)]
            }
            Op::Scale(a, s) => vec![(*a, dy.iter().map(|g| g * s).collect())],
            Op::Transpose(a) => {
                let t = Tensor::matrix(out.rows(), out.cols(), dy.to_vec())?.transpose()?;
                vec![(*a, t.into_data())]
            }
            Op::Affine { x, w, b } => {
                let (tx, tw) = (self.value(*x), self.value(*w));
                let (r, k) = (tx.rows(), tx.cols());
                let n = tw.cols();
                let dx = matmul_nt(dy, tw.data(), r, n, k);
                let dw = matmul_tn(tx.data(), dy, r, k, n);
                let mut db = vec![0.0; n];
                for chunk in dy.chunks(n) {
                    db.iter_mut().zip(chunk).for_each(|(a, g)| *a += g);
                }
                vec![(*x, dx), (*w, dw), (*b, db)]
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                let d = dy
                    .iter()
                    .zip(ta.data())
                    .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                    .collect();
                vec![(*a, d)]
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (r, c) = (out.rows(), out.cols());
                let g = self.value(*gain).data();
                let mut dx = vec![0.0; r * c];
                let mut dg = vec![0.0; c];
                let mut db = vec![0.0; c];
                let cf = c as f64;
                for i in 0..r {
                    let dyr = &dy[i * c..(i + 1) * c];
                    let xh = &xhat[i * c..(i + 1) * c];
                    let mut sum_dh = 0.0;
                    let mut sum_dh_xh = 0.0;
                    for j in 0..c {
                        dg[j] += dyr[j] * xh[j];
                        db[j] += dyr[j];
                        let dh = dyr[j] * g[j];
                        sum_dh += dh;
                        sum_dh_xh += dh * xh[j];
                    }
                    for j in 0..c {
                        let dh = dyr[j] * g[j];
                        dx[i * c + j] = inv_std[i] / cf * (cf * dh - sum_dh - xh[j] * sum_dh_xh);
                    }
                }
                vec![(*x, dx), (*gain, dg), (*bias, db)]
            }
            Op::Softmax(a) => {
                let (r, c) = (out.rows(), out.cols());
                let y = out.data();
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    let yr = &y[i * c..(i + 1) * c];
                    let gr = &dy[i * c..(i + 1) * c];
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        dx[i * c + j] = yr[j] * (gr[j] - dot);
                    }
                }
                vec![(*a, dx)]
            }
            Op::Concat { parts, axis } => {
                let sizes: Vec<usize> = parts
                    .iter()
                    .map(|p| {
                        let t = self.value(*p);
                        if *axis == 0 {
                            t.rows()
                        } else {
                            t.cols()
                        }
                    })
                    .collect();
                let d = Tensor::matrix(out.rows(), out.cols(), dy.to_vec())?;
                parts
                    .iter()
                    .zip(d.split(*axis, &sizes)?)
                    .map(|(p, t)| (*p, t.into_data()))
                    .collect()
            }
            Op::Sum(a) => vec![(*a, vec![dy[0]; self.value(*a).numel()])],
            Op::Mean(a) => {
                let n = self.value(*a).numel();
                vec![(*a, vec![dy[0] / n as f64; n])]
            }
            Op::Mse(p, t) => {
                let (tp, tt) = (self.value(*p), self.value(*t));
                let n = tp.numel() as f64;
                let dp: Vec<f64> = tp
                    .data()
                    .iter()
                    .zip(tt.data())
                    .map(|(a, b)| 2.0 * (a - b) / n * dy[0])
                    .collect();
                let dt = dp.iter().map(|g| -g).collect();
                vec![(*p, dp), (*t, dt)]
            }
            Op::Sqrt(a) => {
                // d√x is undefined at 0; treat it as 0 so a perfect fit stays put.
                let d = dy
                    .iter()
                    .zip(out.data())
                    .map(|(g, y)| if *y > 0.0 { g / (2.0 * y) } else { 0.0 })
                    .collect();
                vec![(*a, d)]
            }
            Op::Reshape(a) => vec![(*a, dy.to_vec())],
        };
        Ok(grads)
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| f(*x, *y))
        .collect()
}

pub(crate) fn masked_softmax_raw(
    scores: &[f64],
    r: usize,
    c: usize,
    mask: &AttentionMask,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = &scores[i * c..(i + 1) * c];
        let mut max = f64::NEG_INFINITY;
        let mut any = false;
        for (j, &s) in row.iter().enumerate() {
            if mask.is_allowed(i, j) {
                any = true;
                max = max.max(s);
            }
        }
        if !any {
            return Err(Error::DegenerateMask { row: i });
        }
        let orow = &mut out[i * c..(i + 1) * c];
        let mut total = 0.0;
        for (j, &s) in row.iter().enumerate() {
            if mask.is_allowed(i, j) {
                let e = (s - max).exp();
                orow[j] = e;
                total += e;
            }
        }
        for v in orow.iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_matmul() {
        let mut tape = Tape::new();
        let i = tape.leaf(Tensor::identity(2));
        let m = tape.leaf(t(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let out = tape.matmul(i, m).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn row_times_column() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[vec![1.0, 2.0]]));
        let b = tape.leaf(t(&[vec![3.0], vec![4.0]]));
        let out = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(out).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(vec![2, 3]));
        let b = tape.leaf(Tensor::zeros(vec![2, 3]));
        match tape.matmul(a, b) {
            Err(Error::Dimension { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn softmax_examples() {
        let mut tape = Tape::new();
        let s = tape.leaf(t(&[vec![0.0, 0.0]]));
        let p = tape.masked_softmax(s, &AttentionMask::all(1, 2)).unwrap();
        assert_eq!(tape.value(p).data(), &[0.5, 0.5]);

        let s = tape.leaf(t(&[vec![5.0, 100.0]]));
        let mask = AttentionMask::from_fn(1, 2, |_, j| j == 0);
        let p = tape.masked_softmax(s, &mask).unwrap();
        assert_eq!(tape.value(p).data(), &[1.0, 0.0]);

        let s = tape.leaf(t(&[vec![1.0, 2.0, 3.0]]));
        let p = tape.masked_softmax(s, &AttentionMask::all(1, 3)).unwrap();
        let expect = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219];
        for (a, b) in tape.value(p).data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fully_masked_row_is_an_error() {
        let mut tape = Tape::new();
        let s = tape.leaf(Tensor::zeros(vec![2, 2]));
        let mask = AttentionMask::from_fn(2, 2, |i, _| i == 0);
        assert!(matches!(
            tape.masked_softmax(s, &mask),
            Err(Error::DegenerateMask { row: 1 })
        ));
    }

    #[test]
    fn layer_norm_constant_and_pair() {
        let mut tape = Tape::new();
        let g = tape.leaf(Tensor::filled(vec![3], 1.0));
        let b = tape.leaf(Tensor::zeros(vec![3]));
        let x = tape.leaf(t(&[vec![1.0, 1.0, 1.0]]));
        let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.0]);

        let g = tape.leaf(Tensor::filled(vec![2], 1.0));
        let b = tape.leaf(Tensor::zeros(vec![2]));
        let x = tape.leaf(t(&[vec![-1.0, 1.0]]));
        let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
        let d = tape.value(y).data();
        assert!((d[0] + 1.0).abs() < 1e-9 && (d[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn layer_norm_needs_two_columns() {
        let mut tape = Tape::new();
        let g = tape.leaf(Tensor::filled(vec![1], 1.0));
        let b = tape.leaf(Tensor::zeros(vec![1]));
        let x = tape.leaf(t(&[vec![1.0]]));
        assert!(tape.layer_norm(x, g, b, 1e-12).is_err());
    }

    #[test]
    fn relu_examples() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
        let x = tape.leaf(Tensor::vector(vec![-3.0, -0.5]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn concat_examples() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[vec![1.0, 2.0]]));
        let b = tape.leaf(t(&[vec![3.0, 4.0]]));
        let c = tape.concat(&[a, b], 0).unwrap();
        assert_eq!(tape.value(c).shape(), &[2, 2]);
        let single = tape.concat(&[a], 0).unwrap();
        assert_eq!(tape.value(single), tape.value(a));
    }

    #[test]
    fn backward_sum_and_square() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]).with_grad());
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]).with_grad());
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn backward_accumulates_and_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).with_grad());
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, 2.0]);
        tape.zero_grad();
        assert!(tape.grad(x).is_none());
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).with_grad());
        let c = tape.constant(Tensor::vector(vec![3.0, 4.0]).with_grad());
        let p = tape.mul(x, c).unwrap();
        let s = tape.sum(p);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[3.0, 4.0]);
        assert!(tape.grad(c).is_none());
    }
}
