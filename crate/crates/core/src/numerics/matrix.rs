//! Dense column-major matrices and the Householder QR used by the solvers.

use crate::error::{Error, Result};

/// Dense real matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a list of equal-length columns.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Argument(format!(
                    "column {j} has length {} but {rows} rows were requested",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    /// Builds a matrix from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n, p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Argument(format!(
                    "row {i} has length {} but expected {p}",
                    r.len()
                )));
            }
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[j * rows + i] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mul_vec");
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a * vj;
            }
        }
        out
    }

    /// `selfᵀ * v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "dimension mismatch in tr_mul_vec");
        (0..self.cols).map(|j| dot(self.column(j), v)).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let col = self.mul_vec(other.column(j));
            out.column_mut(j).copy_from_slice(&col);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for j in 0..self.cols {
            let src = self.column(j);
            for (dst, &i) in out.column_mut(j).iter_mut().zip(rows) {
                *dst = src[i];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regressor matrix with one label per column.
///
/// Storage is column-major. By convention column 0 is the intercept when the
/// generating formula includes one.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: Matrix,
    pub labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(values: Matrix, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.cols() {
            return Err(Error::Argument(format!(
                "{} labels for {} columns",
                labels.len(),
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(Error::Argument("design matrix has non-finite entries".into()));
        }
        Ok(Self { values, labels })
    }

    /// Unlabelled design; columns are named `c0`, `c1`, ...
    pub fn from_matrix(values: Matrix) -> Result<Self> {
        let labels = (0..values.cols()).map(|j| format!("c{j}")).collect();
        Self::new(values, labels)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.values.column(j)
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            values: self.values.select_rows(rows),
            labels: self.labels.clone(),
        }
    }
}

/// Householder QR factorisation of a tall matrix, `A = Q R`.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    /// Lower part holds the Householder vectors, upper triangle holds `R`.
    packed: Matrix,
    /// Scaling factor `tau` for each reflector.
    tau: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if m < n {
            return Err(Error::Argument(format!(
                "QR needs rows >= cols, got {m}x{n}"
            )));
        }
        let mut packed = a.clone();
        let mut tau = vec![0.0; n];
        for k in 0..n {
            let col = &mut packed.column_mut(k)[k..];
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let alpha = if col[0] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, normalised so v[0] = 1
            let v0 = col[0] - alpha;
            for v in col[1..].iter_mut() {
                *v /= v0;
            }
            col[0] = alpha;
            tau[k] = -v0 / alpha;
            // apply H = I - tau v vᵀ to the remaining columns
            for j in (k + 1)..n {
                let mut s = packed[(k, j)];
                for i in (k + 1)..m {
                    s += packed[(i, k)] * packed[(i, j)];
                }
                s *= tau[k];
                packed[(k, j)] -= s;
                for i in (k + 1)..m {
                    let vik = packed[(i, k)];
                    packed[(i, j)] -= s * vik;
                }
            }
        }
        Ok(Self { packed, tau })
    }

    pub fn ncols(&self) -> usize {
        self.packed.cols()
    }

    /// Diagonal of `R`.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.ncols()).map(|k| self.packed[(k, k)]).collect()
    }

    /// The `n x n` upper-triangular factor.
    pub fn r(&self) -> Matrix {
        let n = self.ncols();
        Matrix::from_fn(n, n, |i, j| if i <= j { self.packed[(i, j)] } else { 0.0 })
    }

    /// Computes `Qᵀ b` in place.
    pub fn apply_qt(&self, b: &mut [f64]) {
        let m = self.packed.rows();
        assert_eq!(b.len(), m);
        for k in 0..self.ncols() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = b[k];
            for i in (k + 1)..m {
                s += self.packed[(i, k)] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in (k + 1)..m {
                b[i] -= s * self.packed[(i, k)];
            }
        }
    }

    /// Full `m x m` orthogonal factor. Only used for small constraint matrices.
    pub fn q_full(&self) -> Matrix {
        let m = self.packed.rows();
        let mut q = Matrix::identity(m);
        // Q = H_0 H_1 ... H_{n-1}; apply to identity from the right-most reflector
        for k in (0..self.ncols()).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            for j in 0..m {
                let mut s = q[(k, j)];
                for i in (k + 1)..m {
                    s += self.packed[(i, k)] * q[(i, j)];
                }
                s *= self.tau[k];
                q[(k, j)] -= s;
                for i in (k + 1)..m {
                    let v = self.packed[(i, k)];
                    q[(i, j)] -= s * v;
                }
            }
        }
        q
    }
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn back_substitute(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = r.cols();
    let mut x = b[..n].to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

/// Inverse of an upper-triangular matrix.
pub fn upper_triangular_inverse(r: &Matrix) -> Matrix {
    let n = r.cols();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = back_substitute(r, &e);
        inv.column_mut(j).copy_from_slice(&col);
    }
    inv
}
