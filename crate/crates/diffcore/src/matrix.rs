use crate::error::DiffError;
use crate::real::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, DiffError> {
        if data.len() != rows * cols {
            return Err(DiffError::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn scalar(value: T) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows. An empty slice gives a 0×0 matrix.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, DiffError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(DiffError::shape("from_rows", (1, cols), (1, r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Value of a 1×1 matrix.
    pub fn item(&self) -> Option<T> {
        (self.rows == 1 && self.cols == 1).then(|| self.data[0])
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self, DiffError> {
        self.same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub(crate) fn same_shape(&self, other: &Self, op: &'static str) -> Result<(), DiffError> {
        if self.shape() != other.shape() {
            return Err(DiffError::shape(op, self.shape(), other.shape()));
        }
        Ok(())
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Self) -> Result<(), DiffError> {
        self.same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, DiffError> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, DiffError> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self, DiffError> {
        self.zip_map(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn sq_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self, DiffError> {
        if self.cols != rhs.rows {
            return Err(DiffError::shape("matmul", self.shape(), rhs.shape()));
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![T::zero(); n * m];
        T::gemm(n, k, m, &self.data, (k, 1), &rhs.data, (m, 1), &mut out);
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, rhs: &Self) -> Result<Self, DiffError> {
        if self.cols != rhs.cols {
            return Err(DiffError::shape("matmul_nt", self.shape(), rhs.shape()));
        }
        let (n, k, m) = (self.rows, self.cols, rhs.rows);
        let mut out = vec![T::zero(); n * m];
        T::gemm(n, k, m, &self.data, (k, 1), &rhs.data, (1, k), &mut out);
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn matmul_tn(&self, rhs: &Self) -> Result<Self, DiffError> {
        if self.rows != rhs.rows {
            return Err(DiffError::shape("matmul_tn", self.shape(), rhs.shape()));
        }
        let (k, n, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![T::zero(); n * m];
        T::gemm(n, k, m, &self.data, (1, n), &rhs.data, (m, 1), &mut out);
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `x · W + b` with `b` a `1×dout` row broadcast over the batch.
    pub fn linear(&self, weight: &Self, bias: &Self) -> Result<Self, DiffError> {
        let mut out = self.matmul(weight)?;
        out.add_row_inplace(bias)?;
        Ok(out)
    }

    pub(crate) fn add_row_inplace(&mut self, bias: &Self) -> Result<(), DiffError> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(DiffError::shape("add_row", self.shape(), bias.shape()));
        }
        for i in 0..self.rows {
            for (o, &b) in self.row_mut(i).iter_mut().zip(&bias.data) {
                *o = *o + b;
            }
        }
        Ok(())
    }

    pub fn relu(&self) -> Self {
        self.map(|x| if x > T::zero() { x } else { T::zero() })
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = out.row_mut(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total = total + *x;
            }
            for x in row.iter_mut() {
                *x = *x / total;
            }
        }
        out
    }

    /// Euclidean norm of every column.
    pub fn col_norms(&self) -> Vec<T> {
        let mut acc = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (a, &x) in acc.iter_mut().zip(self.row(i)) {
                *a = *a + x * x;
            }
        }
        acc.into_iter().map(T::sqrt).collect()
    }

    /// Divides each column by `max(norm, eps)`.
    pub fn l2_normalize_cols(&self, eps: T) -> Self {
        let norms: Vec<T> = self.col_norms().into_iter().map(|n| n.max(eps)).collect();
        let mut out = self.clone();
        for i in 0..self.rows {
            for (x, &n) in out.row_mut(i).iter_mut().zip(&norms) {
                *x = *x / n;
            }
        }
        out
    }

    /// Divides each row by `max(norm, eps)`.
    pub fn l2_normalize_rows(&self, eps: T) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = out.row_mut(i);
            let n = row.iter().map(|&x| x * x).sum::<T>().sqrt().max(eps);
            for x in row.iter_mut() {
                *x = *x / n;
            }
        }
        out
    }

    /// Mean of each column as a `1×cols` row.
    pub fn col_mean(&self) -> Self {
        let mut acc = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (a, &x) in acc.iter_mut().zip(self.row(i)) {
                *a = *a + x;
            }
        }
        let n = T::of(self.rows as f64);
        Self {
            rows: 1,
            cols: self.cols,
            data: acc.into_iter().map(|a| a / n).collect(),
        }
    }

    /// Index of the largest entry of each row; ties go to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (j, &x) in row.iter().enumerate().skip(1) {
                    if x > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}
