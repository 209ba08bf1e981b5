//! Small dense linear algebra: a row-major matrix and a Householder QR.
//!
//! Designs in this crate are tall and thin (hundreds of rows, under a dozen
//! columns), so plain loops are fast enough and keep the scalar type generic.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        assert!(
            columns.iter().all(|c| c.len() == rows),
            "columns must have equal length"
        );
        let mut m = Self::zeros(rows, cols);
        for (j, column) in columns.iter().enumerate() {
            for (i, &v) in column.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "rows must have equal length");
        Self {
            rows: n,
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[T]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Computes `selfᵀ v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o = *o + x * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Quadratic form `vᵀ self v` for a square matrix.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        assert_eq!(self.rows, self.cols);
        dot(v, &self.mul_vec(v))
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
            .max(T::min_positive_value());
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[(r, col)].abs().partial_cmp(&a[(s, col)].abs()).unwrap())
                .unwrap();
            if a[(pivot, col)].abs() <= T::epsilon() * scale {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] = a[(col, j)] / p;
                inv[(col, j)] = inv[(col, j)] / p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] = a[(r, j)] - f * a[(col, j)];
                    inv[(r, j)] = inv[(r, j)] - f * inv[(col, j)];
                }
            }
        }
        Some(inv)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Householder QR factorization `X = QR` of a tall matrix, without pivoting.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    rows: usize,
    cols: usize,
    // Column-major; the strict lower part of column j holds the Householder vector.
    factors: Vec<Vec<T>>,
    r_diag: Vec<T>,
    betas: Vec<T>,
}

impl<T: Scalar> Qr<T> {
    /// Factorizes `x`. Fails with the index of the first column whose
    /// component orthogonal to the previous columns is below
    /// `tolerance × ‖column‖`.
    pub fn new(x: &Matrix<T>, tolerance: T) -> Result<Self, usize> {
        let (n, k) = (x.rows(), x.cols());
        assert!(n >= k, "QR requires rows >= cols");
        let mut factors: Vec<Vec<T>> = (0..k).map(|j| x.column(j)).collect();
        let norms: Vec<T> = factors.iter().map(|c| norm(c)).collect();
        let mut r_diag = vec![T::zero(); k];
        let mut betas = vec![T::zero(); k];

        for j in 0..k {
            let tail_norm = norm(&factors[j][j..]);
            if tail_norm <= tolerance * norms[j] || tail_norm == T::zero() {
                return Err(j);
            }
            let x0 = factors[j][j];
            let alpha = if x0 >= T::zero() { -tail_norm } else { tail_norm };
            factors[j][j] = x0 - alpha;
            let v_sq = dot(&factors[j][j..], &factors[j][j..]);
            let beta = T::lit(2.0) / v_sq;
            r_diag[j] = alpha;
            betas[j] = beta;

            let (head, rest) = factors.split_at_mut(j + 1);
            let v = &head[j][j..];
            for col in rest.iter_mut() {
                let s = beta * dot(v, &col[j..]);
                for (c, &vi) in col[j..].iter_mut().zip(v) {
                    *c = *c - s * vi;
                }
            }
        }

        Ok(Self {
            rows: n,
            cols: k,
            factors,
            r_diag,
            betas,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn r(&self, i: usize, j: usize) -> T {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.factors[j][i],
            std::cmp::Ordering::Equal => self.r_diag[i],
            std::cmp::Ordering::Greater => T::zero(),
        }
    }

    /// Applies `Qᵀ` to a vector of length `rows`.
    pub fn apply_qt(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows);
        let mut out = y.to_vec();
        for j in 0..self.cols {
            self.reflect(j, &mut out);
        }
        out
    }

    /// Applies `Q` to a vector of length `rows`.
    pub fn apply_q(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows);
        let mut out = y.to_vec();
        for j in (0..self.cols).rev() {
            self.reflect(j, &mut out);
        }
        out
    }

    fn reflect(&self, j: usize, out: &mut [T]) {
        let v = &self.factors[j][j..];
        let s = self.betas[j] * dot(v, &out[j..]);
        for (o, &vi) in out[j..].iter_mut().zip(v) {
            *o = *o - s * vi;
        }
    }

    /// Least-squares solution of `X b ≈ y`.
    pub fn solve(&self, y: &[T]) -> Vec<T> {
        let qty = self.apply_qt(y);
        let mut b = vec![T::zero(); self.cols];
        for i in (0..self.cols).rev() {
            let mut s = qty[i];
            for j in i + 1..self.cols {
                s = s - self.r(i, j) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
        b
    }

    /// `R⁻¹` (upper triangular, `cols × cols`).
    pub fn r_inverse(&self) -> Matrix<T> {
        let k = self.cols;
        let mut inv = Matrix::zeros(k, k);
        for col in 0..k {
            for i in (0..=col).rev() {
                let mut s = if i == col { T::one() } else { T::zero() };
                for j in i + 1..=col {
                    s = s - self.r(i, j) * inv[(j, col)];
                }
                inv[(i, col)] = s / self.r(i, i);
            }
        }
        inv
    }

    /// `(XᵀX)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn xtx_inverse(&self) -> Matrix<T> {
        let r_inv = self.r_inverse();
        r_inv.matmul(&r_inv.transpose())
    }

    /// The first `cols` columns of `Q`, an orthonormal basis of the column space.
    pub fn thin_q(&self) -> Vec<Vec<T>> {
        (0..self.cols)
            .map(|j| {
                let mut e = vec![T::zero(); self.rows];
                e[j] = T::one();
                self.apply_q(&e)
            })
            .collect()
    }
}
