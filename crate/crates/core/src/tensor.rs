//! Dense row-major `f64` tensors.
//!
//! Only the handful of shapes the library needs are supported: scalars
//! (rank 0), vectors (rank 1) and matrices (rank 2). Batched states are
//! `[batch, dim]` matrices and layer weights are `[out, in]` matrices.
//!
//! Every reduction sums left to right in row-major order, so results are
//! bit-identical across runs and platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Serialized form; deserialization re-checks the length invariant.
#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<TensorRepr> for Tensor {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        Tensor::new(r.shape, r.data)
    }
}

impl From<Tensor> for TensorRepr {
    fn from(t: Tensor) -> Self {
        TensorRepr {
            shape: t.shape,
            data: t.data,
        }
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                op: "new",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::NonScalar(self.shape.clone()))
        }
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: vec![0, 0],
            }),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, rhs: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: rhs.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Self> {
        self.zip(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Self> {
        self.zip(rhs, "sub", |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Self> {
        self.zip(rhs, "mul", |a, b| a * b)
    }

    /// Elementwise quotient; any zero in `rhs` is a [`Error::Singular`].
    pub fn div(&self, rhs: &Tensor) -> Result<Self> {
        if rhs.data.contains(&0.0) {
            return Err(Error::Singular { op: "div" });
        }
        self.zip(rhs, "div", |a, b| a / b)
    }

    /// `self + c * rhs`
    pub fn axpy(&self, c: f64, rhs: &Tensor) -> Result<Self> {
        self.zip(rhs, "axpy", |a, b| a + c * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn exp(&self) -> Self {
        self.map(f64::exp)
    }

    pub fn sin(&self) -> Self {
        self.map(f64::sin)
    }

    pub fn cos(&self) -> Self {
        self.map(f64::cos)
    }

    pub fn tanh(&self) -> Self {
        self.map(f64::tanh)
    }

    pub fn ln(&self) -> Self {
        self.map(f64::ln)
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self) -> Self {
        Tensor::scalar(self.data.iter().sum())
    }

    /// Matrix-vector product of a `[m, n]` matrix with an `[n]` vector.
    pub fn matvec(&self, x: &Tensor) -> Result<Self> {
        let (m, n) = self.dims2("matvec")?;
        if x.shape != [n] {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                left: self.shape.clone(),
                right: x.shape.clone(),
            });
        }
        let data = (0..m)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(&x.data)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(Tensor::from_vec(data))
    }

    /// Appends `s` to a vector.
    pub fn concat_scalar(&self, s: f64) -> Result<Self> {
        if self.rank() != 1 {
            return Err(Error::ShapeMismatch {
                op: "concat_scalar",
                left: self.shape.clone(),
                right: vec![1],
            });
        }
        let mut data = self.data.clone();
        data.push(s);
        Ok(Tensor::from_vec(data))
    }

    /// Row-batched affine map `x W^T + b` for `x: [B, n]`, `W: [m, n]`, `b: [m]`.
    pub fn linear(&self, w: &Tensor, b: Option<&Tensor>) -> Result<Self> {
        let (rows, n) = self.dims2("linear")?;
        let (m, wn) = w.dims2("linear")?;
        if wn != n {
            return Err(Error::ShapeMismatch {
                op: "linear",
                left: self.shape.clone(),
                right: w.shape.clone(),
            });
        }
        if let Some(b) = b {
            if b.shape != [m] {
                return Err(Error::ShapeMismatch {
                    op: "linear bias",
                    left: w.shape.clone(),
                    right: b.shape.clone(),
                });
            }
        }
        let mut out = Vec::with_capacity(rows * m);
        for r in 0..rows {
            let x = &self.data[r * n..(r + 1) * n];
            for i in 0..m {
                let wrow = &w.data[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for (a, c) in wrow.iter().zip(x) {
                    acc += a * c;
                }
                if let Some(b) = b {
                    acc += b.data[i];
                }
                out.push(acc);
            }
        }
        Tensor::matrix(rows, m, out)
    }

    /// Row-batched product `x W` for `x: [B, m]`, `W: [m, n]`.
    pub fn linear_t(&self, w: &Tensor) -> Result<Self> {
        let (rows, m) = self.dims2("linear_t")?;
        let (wm, n) = w.dims2("linear_t")?;
        if wm != m {
            return Err(Error::ShapeMismatch {
                op: "linear_t",
                left: self.shape.clone(),
                right: w.shape.clone(),
            });
        }
        let mut out = vec![0.0; rows * n];
        for r in 0..rows {
            let o = &mut out[r * n..(r + 1) * n];
            for i in 0..m {
                let xi = self.data[r * m + i];
                for (oj, wij) in o.iter_mut().zip(&w.data[i * n..(i + 1) * n]) {
                    *oj += xi * wij;
                }
            }
        }
        Tensor::matrix(rows, n, out)
    }

    /// `self^T rhs` for `self: [B, m]`, `rhs: [B, n]`, giving `[m, n]`.
    pub fn t_matmul(&self, rhs: &Tensor) -> Result<Self> {
        let (rows, m) = self.dims2("t_matmul")?;
        let (rrows, n) = rhs.dims2("t_matmul")?;
        if rows != rrows {
            return Err(Error::ShapeMismatch {
                op: "t_matmul",
                left: self.shape.clone(),
                right: rhs.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        for r in 0..rows {
            for i in 0..m {
                let a = self.data[r * m + i];
                for (o, b) in out[i * n..(i + 1) * n]
                    .iter_mut()
                    .zip(&rhs.data[r * n..(r + 1) * n])
                {
                    *o += a * b;
                }
            }
        }
        Tensor::matrix(m, n, out)
    }

    /// Column-wise concatenation of two matrices with equal row counts.
    pub fn concat_cols(&self, rhs: &Tensor) -> Result<Self> {
        let (rows, a) = self.dims2("concat_cols")?;
        let (rrows, b) = rhs.dims2("concat_cols")?;
        if rows != rrows {
            return Err(Error::ShapeMismatch {
                op: "concat_cols",
                left: self.shape.clone(),
                right: rhs.shape.clone(),
            });
        }
        let mut out = Vec::with_capacity(rows * (a + b));
        for r in 0..rows {
            out.extend_from_slice(&self.data[r * a..(r + 1) * a]);
            out.extend_from_slice(&rhs.data[r * b..(r + 1) * b]);
        }
        Tensor::matrix(rows, a + b, out)
    }

    /// Columns `start..start + len` of a matrix.
    pub fn take_cols(&self, start: usize, len: usize) -> Result<Self> {
        let (rows, cols) = self.dims2("take_cols")?;
        if start + len > cols {
            return Err(Error::ShapeMismatch {
                op: "take_cols",
                left: self.shape.clone(),
                right: vec![start, len],
            });
        }
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&self.data[r * cols + start..r * cols + start + len]);
        }
        Tensor::matrix(rows, len, out)
    }

    /// Places a `[B, len]` block at column `start` of a `[B, cols]` zero matrix.
    pub fn pad_cols(&self, start: usize, cols: usize) -> Result<Self> {
        let (rows, len) = self.dims2("pad_cols")?;
        if start + len > cols {
            return Err(Error::ShapeMismatch {
                op: "pad_cols",
                left: self.shape.clone(),
                right: vec![start, cols],
            });
        }
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            out[r * cols + start..r * cols + start + len]
                .copy_from_slice(&self.data[r * len..(r + 1) * len]);
        }
        Tensor::matrix(rows, cols, out)
    }

    /// Per-row sums of a matrix, as a `[B, 1]` matrix.
    pub fn row_sum(&self) -> Result<Self> {
        let (rows, cols) = self.dims2("row_sum")?;
        let out = (0..rows)
            .map(|r| self.data[r * cols..(r + 1) * cols].iter().sum())
            .collect();
        Tensor::matrix(rows, 1, out)
    }

    /// Per-column sums of a matrix, as a vector.
    pub fn col_sum(&self) -> Result<Self> {
        let (rows, cols) = self.dims2("col_sum")?;
        let mut out = vec![0.0; cols];
        for r in 0..rows {
            for (o, v) in out.iter_mut().zip(&self.data[r * cols..(r + 1) * cols]) {
                *o += v;
            }
        }
        Ok(Tensor::from_vec(out))
    }

    /// Repeats a `[B, 1]` column `n` times.
    pub fn broadcast_cols(&self, n: usize) -> Result<Self> {
        let (rows, cols) = self.dims2("broadcast_cols")?;
        if cols != 1 {
            return Err(Error::ShapeMismatch {
                op: "broadcast_cols",
                left: self.shape.clone(),
                right: vec![rows, 1],
            });
        }
        let out = self
            .data
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, n))
            .collect();
        Tensor::matrix(rows, n, out)
    }

    /// Row `r` of a matrix as a vector.
    pub fn row(&self, r: usize) -> Result<Self> {
        let (rows, cols) = self.dims2("row")?;
        if r >= rows {
            return Err(Error::ShapeMismatch {
                op: "row",
                left: self.shape.clone(),
                right: vec![r],
            });
        }
        Ok(Tensor::from_vec(self.data[r * cols..(r + 1) * cols].to_vec()))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack_rows(rows: &[Tensor]) -> Result<Self> {
        let cols = rows.first().map_or(0, Tensor::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    left: vec![cols],
                    right: r.shape.clone(),
                });
            }
            data.extend_from_slice(&r.data);
        }
        Tensor::matrix(rows.len(), cols, data)
    }

    /// Views a vector as a single-row matrix; matrices pass through.
    pub fn as_batch(&self) -> Result<Self> {
        match self.rank() {
            1 => self.reshape(vec![1, self.len()]),
            2 => Ok(self.clone()),
            _ => Err(Error::ShapeMismatch {
                op: "as_batch",
                left: self.shape.clone(),
                right: vec![1, 0],
            }),
        }
    }
}
