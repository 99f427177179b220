//! Dense row-major `f64` matrices.
//!
//! Every tensor in the lab is two-dimensional; scalars are `[1, 1]` and bias
//! rows are `[1, m]`. Elementwise binary operations broadcast a `[1, m]`
//! right-hand side over the leading batch dimension and nothing else.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: [usize; 2], data: Vec<f64>) -> Result<Self> {
        let [rows, cols] = shape;
        if rows == 0 || cols == 0 {
            return Err(Error::shape(
                "tensor",
                format!("zero-sized shape {shape:?}"),
            ));
        }
        if rows * cols != data.len() {
            return Err(Error::shape(
                "tensor",
                format!(
                    "shape {shape:?} needs {} values, got {}",
                    rows * cols,
                    data.len()
                ),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn row(values: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values,
        }
    }

    /// Stacks equally long rows into a matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Empty("tensor rows"));
        };
        let cols = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    "from_rows",
                    format!("row {i} has {} values, expected {cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::new([rows.len(), cols], data)
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Value of a `[1, 1]` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| {
            if v.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(v.abs())
            }
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Index of the largest entry in each row (first one on ties).
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row_slice(r);
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self @ rhs`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "matmul",
                format!("inner dims differ: {:?} @ {:?}", self.shape(), rhs.shape()),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &rhs.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `selfᵀ @ rhs`.
    pub(crate) fn t_matmul(&self, rhs: &Tensor) -> Tensor {
        debug_assert_eq!(self.rows, rhs.rows);
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; k * m];
        for i in 0..n {
            let b_row = &rhs.data[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Tensor {
            rows: k,
            cols: m,
            data: out,
        }
    }

    /// `self @ rhsᵀ`.
    pub(crate) fn matmul_t(&self, rhs: &Tensor) -> Tensor {
        debug_assert_eq!(self.cols, rhs.cols);
        let (n, k, m) = (self.rows, self.cols, rhs.rows);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b_row = &rhs.data[j * k..(j + 1) * k];
                out[i * m + j] = a_row.iter().zip(b_row).map(|(a, b)| a * b).sum();
            }
        }
        Tensor {
            rows: n,
            cols: m,
            data: out,
        }
    }

    /// Column sums as a `[1, cols]` row.
    pub(crate) fn sum_rows(&self) -> Tensor {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row_slice(r)) {
                *o += v;
            }
        }
        Tensor::row(out)
    }

    /// Horizontal concatenation.
    pub fn concat_cols(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.rows != rhs.rows {
            return Err(Error::shape(
                "concat_cols",
                format!("row counts differ: {:?} vs {:?}", self.shape(), rhs.shape()),
            ));
        }
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row_slice(r));
            data.extend_from_slice(rhs.row_slice(r));
        }
        Ok(Tensor {
            rows: self.rows,
            cols,
            data,
        })
    }
}

/// Checks that `rhs` either matches `lhs` or is a `[1, m]` row broadcast over it.
pub(crate) fn broadcast_ok(lhs: &Tensor, rhs: &Tensor) -> bool {
    lhs.cols == rhs.cols && (lhs.rows == rhs.rows || rhs.rows == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_data_length() {
        assert!(Tensor::new([2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new([0, 3], vec![]).is_err());
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::new([2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::new([3, 2], vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[58., 64., 139., 154.]);

        let at = Tensor::new([3, 2], vec![1., 4., 2., 5., 3., 6.]).unwrap();
        assert_eq!(at.t_matmul(&b).data(), ab.data());

        let bt = Tensor::new([2, 3], vec![7., 9., 11., 8., 10., 12.]).unwrap();
        assert_eq!(a.matmul_t(&bt).data(), ab.data());
    }

    #[test]
    fn matmul_inner_dim_mismatch_is_shape_error() {
        let a = Tensor::zeros(2, 3);
        let err = a.matmul(&Tensor::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::Shape { op: "matmul", .. }));
    }

    #[test]
    fn argmax_takes_first_on_ties() {
        let t = Tensor::new([2, 3], vec![1., 1., 0., 0., 2., 2.]).unwrap();
        assert_eq!(t.argmax_rows(), vec![0, 1]);
    }
}
