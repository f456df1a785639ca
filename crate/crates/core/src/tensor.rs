//! Dense third-order tensors, matrices, and the contractions the estimators use.
//!
//! Layouts are fixed:
//! * [`Tensor3`] is mode-1-major: entry `(i, j, k)` lives at `(i * d2 + j) * d3 + k`
//!   (0-based), so the mode-1 unfolding is the same buffer read as a
//!   `d1 × (d2·d3)` row-major matrix.
//! * [`Matrix`] is row-major.
//!
//! Every contraction accumulates each output entry from `0.0` in ascending
//! order of the contracted index, so results are bit-reproducible against a
//! plain loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plain dense vector.
pub type Vector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `a` to unit norm in place and returns the original norm.
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "Matrix::new",
                expected: format!("{} entries ({rows}x{cols})", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch {
                op: "Matrix::from_columns",
                expected: format!("columns of length {rows}"),
                got: format!("a column of length {}", bad.len()),
            });
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Leading `k` columns.
    pub fn first_columns(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.rows, k, |i, j| self.get(i, j))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: format!("{} rows on the right", self.cols),
                got: format!("{}", other.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for p in 0..self.cols {
                let a = self.data[i * self.cols + p];
                if a == 0.0 {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(other.row(p)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                expected: format!("vector of length {}", self.cols),
                got: format!("{}", x.len()),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "tr_matvec",
                expected: format!("vector of length {}", self.rows),
                got: format!("{}", x.len()),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    /// Multiplies column `j` by `-1`.
    pub fn negate_column(&mut self, j: usize) {
        for i in 0..self.rows {
            let idx = i * self.cols + j;
            self.data[idx] = -self.data[idx];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(d1: usize, d2: usize, d3: usize, data: Vec<f64>) -> Result<Self> {
        let expected = d1
            .checked_mul(d2)
            .and_then(|x| x.checked_mul(d3))
            .ok_or_else(|| Error::InvalidArgument(format!("dims {d1}x{d2}x{d3} overflow")))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                op: "Tensor3::new",
                expected: format!("{expected} entries ({d1}x{d2}x{d3})"),
                got: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            let (i, j, k) = (pos / (d2 * d3), (pos / d3) % d2, pos % d3);
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({}, {}, {})",
                i + 1,
                j + 1,
                k + 1
            )));
        }
        Ok(Self {
            dims: [d1, d2, d3],
            data,
        })
    }

    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: [d1, d2, d3],
            data: vec![0.0; d1 * d2 * d3],
        }
    }

    pub fn from_fn(
        d1: usize,
        d2: usize,
        d3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(d1 * d2 * d3);
        for i in 0..d1 {
            for j in 0..d2 {
                for k in 0..d3 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self {
            dims: [d1, d2, d3],
            data,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dims[0], self.dims[1], self.dims[2])
    }

    /// Length along a 1-based mode.
    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode - 1]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    /// The `d2 × d3` slice of gene `i`.
    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.dims[1] * self.dims[2];
        &self.data[i * n..(i + 1) * n]
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                op: "axpy",
                expected: format!("{:?}", self.dims),
                got: format!("{:?}", other.dims),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }
}

fn check_mode(op: &'static str, t: &Tensor3, x: &[f64], mode: usize) -> Result<()> {
    if !(1..=3).contains(&mode) {
        return Err(Error::InvalidArgument(format!(
            "{op}: mode must be 1, 2 or 3, got {mode}"
        )));
    }
    if x.len() != t.dim(mode) {
        return Err(Error::ModeMismatch {
            op,
            mode,
            expected: t.dim(mode),
            got: x.len(),
        });
    }
    Ok(())
}

/// `T ×_mode x`: the matrix over the two remaining modes in ascending order.
pub fn mode_product(t: &Tensor3, x: &[f64], mode: usize) -> Result<Matrix> {
    check_mode("mode_product", t, x, mode)?;
    let (d1, d2, d3) = t.dims();
    let data = &t.data;
    Ok(match mode {
        1 => {
            let mut out = vec![0.0; d2 * d3];
            for (i, &xi) in x.iter().enumerate() {
                for (o, v) in out.iter_mut().zip(t.slice(i)) {
                    *o += v * xi;
                }
            }
            Matrix {
                rows: d2,
                cols: d3,
                data: out,
            }
        }
        2 => {
            let mut out = vec![0.0; d1 * d3];
            for i in 0..d1 {
                let dst = &mut out[i * d3..(i + 1) * d3];
                for (j, &xj) in x.iter().enumerate() {
                    let src = &data[(i * d2 + j) * d3..(i * d2 + j + 1) * d3];
                    for (o, v) in dst.iter_mut().zip(src) {
                        *o += v * xj;
                    }
                }
            }
            Matrix {
                rows: d1,
                cols: d3,
                data: out,
            }
        }
        _ => {
            let out = data.chunks_exact(d3).map(|fiber| dot(fiber, x)).collect();
            Matrix {
                rows: d1,
                cols: d2,
                data: out,
            }
        }
    })
}

/// Contracts the tensor with `x` along `modes.0` and `y` along `modes.1`,
/// leaving a vector along the remaining mode.
pub fn mode_product_vec(
    t: &Tensor3,
    x: &[f64],
    y: &[f64],
    modes: (usize, usize),
) -> Result<Vector> {
    let (p, q) = modes;
    if p == q {
        return Err(Error::InvalidArgument(format!(
            "mode_product_vec: modes must be distinct, got ({p}, {q})"
        )));
    }
    check_mode("mode_product_vec", t, x, p)?;
    check_mode("mode_product_vec", t, y, q)?;
    let m = mode_product(t, x, p)?;
    // the remaining modes keep ascending order, so q is the row mode iff it is the smaller one
    let row_mode = if p == 1 { 2 } else { 1 };
    if q == row_mode {
        m.tr_matvec(y)
    } else {
        m.matvec(y)
    }
}

/// Mode-1 matricization `M(T)`, a `d1 × (d2·d3)` matrix with
/// `[M(T)]_{i, j·d3 + k} = T_{ijk}` (0-based).
pub fn unfold1(t: &Tensor3) -> Matrix {
    let (d1, d2, d3) = t.dims();
    Matrix {
        rows: d1,
        cols: d2 * d3,
        data: t.data.clone(),
    }
}

/// Inverse of [`unfold1`].
pub fn refold1(m: &Matrix, d2: usize, d3: usize) -> Result<Tensor3> {
    if m.cols != d2 * d3 {
        return Err(Error::DimensionMismatch {
            op: "refold1",
            expected: format!("{} columns", d2 * d3),
            got: format!("{}", m.cols),
        });
    }
    Ok(Tensor3 {
        dims: [m.rows, d2, d3],
        data: m.data.clone(),
    })
}

/// Reshapes a length `ds·dt` vector into a `ds × dt` matrix row by row.
pub fn vec_inv(h: &[f64], ds: usize, dt: usize) -> Result<Matrix> {
    if h.len() != ds * dt {
        return Err(Error::DimensionMismatch {
            op: "vec_inv",
            expected: format!("length {} ({ds}x{dt})", ds * dt),
            got: format!("{}", h.len()),
        });
    }
    Ok(Matrix {
        rows: ds,
        cols: dt,
        data: h.to_vec(),
    })
}

pub fn outer3(u: &[f64], v: &[f64], w: &[f64]) -> Tensor3 {
    Tensor3::from_fn(u.len(), v.len(), w.len(), |i, j, k| u[i] * v[j] * w[k])
}

/// Removes the mean spatial and mean temporal effect from every gene slice:
/// `x̃_gst = x_gst − x̄_g·t − x̄_gs· + x̄_g··`.
pub fn double_center(t: &Tensor3) -> Tensor3 {
    let (_, d2, d3) = t.dims();
    let mut out = t.data.clone();
    let mut row_mean = vec![0.0; d2];
    let mut col_mean = vec![0.0; d3];
    for slice in out.chunks_exact_mut(d2 * d3) {
        row_mean.iter_mut().for_each(|m| *m = 0.0);
        col_mean.iter_mut().for_each(|m| *m = 0.0);
        for j in 0..d2 {
            for k in 0..d3 {
                let v = slice[j * d3 + k];
                row_mean[j] += v;
                col_mean[k] += v;
            }
        }
        row_mean.iter_mut().for_each(|m| *m /= d3 as f64);
        col_mean.iter_mut().for_each(|m| *m /= d2 as f64);
        let grand = row_mean.iter().sum::<f64>() / d2 as f64;
        for j in 0..d2 {
            for k in 0..d3 {
                slice[j * d3 + k] = slice[j * d3 + k] - col_mean[k] - row_mean[j] + grand;
            }
        }
    }
    Tensor3 {
        dims: t.dims,
        data: out,
    }
}
