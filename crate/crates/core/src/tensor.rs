//! Dense row-major `f64` tensors.
//!
//! A [`Tensor`] is a plain value: shape plus flat data, with an optional
//! gradient buffer that only the tape writes to. All model math is done on
//! rank-1 and rank-2 tensors; a scalar has shape `[]`.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    #[serde(default)]
    requires_grad: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Contract(format!(
                "shape {shape:?} needs {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Builds a matrix from nested rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Contract(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::matrix(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn accumulate_grad(&mut self, g: &[f64]) {
        debug_assert_eq!(g.len(), self.data.len());
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => self.grad = Some(g.to_vec()),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 | 1 => self.shape.first().copied().unwrap_or(1),
            _ => self.shape[1],
        }
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn expect_matrix(&self, op: &'static str) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(dim_err(op, &self.shape, &[]));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.expect_matrix("transpose")?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::matrix(c, r, out)
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    /// Concatenates matrices along `axis` (0 = rows, 1 = columns).
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero parts".into()))?;
        let (r0, c0) = first.expect_matrix("concat")?;
        match axis {
            0 => {
                let mut data = Vec::new();
                let mut rows = 0;
                for p in parts {
                    let (r, c) = p.expect_matrix("concat")?;
                    if c != c0 {
                        return Err(dim_err("concat", &first.shape, &p.shape));
                    }
                    rows += r;
                    data.extend_from_slice(&p.data);
                }
                Tensor::matrix(rows, c0, data)
            }
            1 => {
                let mut cols = 0;
                for p in parts {
                    let (r, c) = p.expect_matrix("concat")?;
                    if r != r0 {
                        return Err(dim_err("concat", &first.shape, &p.shape));
                    }
                    cols += c;
                }
                let mut data = Vec::with_capacity(r0 * cols);
                for i in 0..r0 {
                    for p in parts {
                        data.extend_from_slice(p.row(i));
                    }
                }
                Tensor::matrix(r0, cols, data)
            }
            _ => Err(Error::Contract(format!("concat axis {axis} out of range"))),
        }
    }

    /// Inverse of [`Tensor::concat`]: cuts a matrix into pieces of the given sizes along `axis`.
    pub fn split(&self, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor>> {
        let (r, c) = self.expect_matrix("split")?;
        let total: usize = sizes.iter().sum();
        let along = if axis == 0 { r } else { c };
        if axis > 1 || total != along {
            return Err(dim_err("split", &self.shape, sizes));
        }
        let mut out = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for &s in sizes {
            let piece = if axis == 0 {
                Tensor::matrix(s, c, self.data[offset * c..(offset + s) * c].to_vec())?
            } else {
                let mut data = Vec::with_capacity(r * s);
                for i in 0..r {
                    data.extend_from_slice(&self.data[i * c + offset..i * c + offset + s]);
                }
                Tensor::matrix(r, s, data)?
            };
            out.push(piece);
            offset += s;
        }
        Ok(out)
    }

    /// Rows `start..start + count` of a matrix.
    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Tensor> {
        let (r, c) = self.expect_matrix("slice_rows")?;
        if start + count > r {
            return Err(dim_err("slice_rows", &self.shape, &[start, count]));
        }
        Tensor::matrix(count, c, self.data[start * c..(start + count) * c].to_vec())
    }
}

/// Plain (untracked) matrix product, shared by the tape forward and backward passes.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// `aᵀ · b` for `a: k×m`, `b: k×n`.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &api) in arow.iter().enumerate() {
            if api == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += api * bv;
            }
        }
    }
    out
}

/// `a · bᵀ` for `a: m×k`, `b: n×k`.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}
