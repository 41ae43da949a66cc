use crate::error::{LelaError, Result};
use crate::linalg::dot;

/// Real matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Build from column-major data. Rejects length mismatches and
    /// non-finite entries.
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(LelaError::param(format!(
                "data length {} does not match {}x{}",
                data.len(),
                n_rows,
                n_cols
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(LelaError::param(format!(
                "non-finite entry at ({}, {})",
                pos % n_rows.max(1),
                pos / n_rows.max(1)
            )));
        }
        Ok(Self { n_rows, n_cols, data })
    }

    /// Build from row-major nested slices; handy for small literals.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(LelaError::param("ragged rows"));
        }
        let mut data = vec![0.0; n * d];
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                data[j * n + i] = x;
            }
        }
        Self::new(n, d, data)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// `f(i, j)` must return finite values; panics otherwise.
    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for j in 0..n_cols {
            for i in 0..n_rows {
                let x = f(i, j);
                assert!(x.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(x);
            }
        }
        Self { n_rows, n_cols, data }
    }

    /// Internal constructor for kernels that guarantee finiteness.
    pub(crate) fn from_col_major_unchecked(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n_rows * n_cols);
        Self { n_rows, n_cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Column-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n_rows + i]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[j * self.n_rows + i] = x;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.n_rows;
        &mut self.data[j * n..(j + 1) * n]
    }

    /// Copy of row `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols).map(|j| self.get(i, j)).collect()
    }


    pub fn transpose(&self) -> Self {
        let (n, d) = self.shape();
        let mut data = vec![0.0; n * d];
        for j in 0..d {
            for i in 0..n {
                data[i * d + j] = self.data[j * n + i];
            }
        }
        Self { n_rows: d, n_cols: n, data }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(LelaError::param(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let n = self.n_rows;
        let mut out = vec![0.0; n * other.n_cols];
        for j in 0..other.n_cols {
            let oc = &mut out[j * n..(j + 1) * n];
            for (k, &b) in other.col(j).iter().enumerate() {
                if b != 0.0 {
                    for (o, &a) in oc.iter_mut().zip(self.col(k)) {
                        *o += a * b;
                    }
                }
            }
        }
        Ok(Self { n_rows: n, n_cols: other.n_cols, data: out })
    }

    /// `selfᵀ * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.n_rows != other.n_rows {
            return Err(LelaError::param(format!(
                "t_matmul shape mismatch: ({}x{})ᵀ * {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let k = self.n_cols;
        let mut out = vec![0.0; k * other.n_cols];
        for j in 0..other.n_cols {
            for i in 0..k {
                out[j * k + i] = dot(self.col(i), other.col(j));
            }
        }
        Ok(Self { n_rows: k, n_cols: other.n_cols, data: out })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n_rows: self.n_rows, n_cols: self.n_cols, data: self.data.iter().map(|x| x * c).collect() }
    }

    /// `self - other`, shapes must agree.
    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(LelaError::param("sub shape mismatch"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, data })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(LelaError::param("add shape mismatch"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, data })
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Self {
        let n = self.n_rows;
        Self {
            n_rows: n,
            n_cols: range.len(),
            data: self.data[range.start * n..range.end * n].to_vec(),
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<Self> {
        if self.n_rows != other.n_rows {
            return Err(LelaError::param("hstack row mismatch"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols + other.n_cols, data })
    }
}

/// Rank-r approximation kept in factored form `u · vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl Factorization {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(LelaError::param(format!(
                "factor ranks differ: u has {} columns, v has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n: usize, d: usize, r: usize) -> Self {
        Self { u: DenseMatrix::zeros(n, r), v: DenseMatrix::zeros(d, r) }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..self.rank() {
            s += self.u.get(i, k) * self.v.get(j, k);
        }
        s
    }

    /// Materialize `u vᵀ`. Only for small matrices and tests.
    pub fn to_dense(&self) -> DenseMatrix {
        self.u.matmul(&self.v.transpose()).expect("factor shapes agree")
    }

    /// Factorization of the transpose.
    pub fn transpose(&self) -> Self {
        Self { u: self.v.clone(), v: self.u.clone() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { u: self.u.scaled(c), v: self.v.clone() }
    }
}

/// Exact (or oracle) top-r SVD `u_star · diag(sigma_star) · v_starᵀ`.
#[derive(Debug, Clone)]
pub struct OracleDecomposition {
    pub u_star: DenseMatrix,
    pub sigma_star: Vec<f64>,
    pub v_star: DenseMatrix,
}

impl OracleDecomposition {
    pub fn rank(&self) -> usize {
        self.sigma_star.len()
    }

    /// σ₁/σ_r; infinite when σ_r vanishes.
    pub fn kappa(&self) -> f64 {
        match (self.sigma_star.first(), self.sigma_star.last()) {
            (Some(&a), Some(&b)) if b > 0.0 => a / b,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// `(u_star · diag(sigma), v_star)`.
    pub fn to_factorization(&self) -> Factorization {
        let mut u = self.u_star.clone();
        for (k, &s) in self.sigma_star.iter().enumerate() {
            u.col_mut(k).iter_mut().for_each(|x| *x *= s);
        }
        Factorization { u, v: self.v_star.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn layout_is_column_major() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(m.data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.transpose().get(0, 1), 3.0);
        let p = m.matmul(&m).unwrap();
        assert_eq!(p, DenseMatrix::from_rows(&[&[7.0, 10.0], &[15.0, 22.0]]).unwrap());
        assert_eq!(m.t_matmul(&m).unwrap(), m.transpose().matmul(&m).unwrap());
    }

    #[test]
    fn factorization_entry_matches_dense() {
        let u = DenseMatrix::from_rows(&[&[1.0, 0.5], &[2.0, -1.0], &[0.0, 3.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[&[1.0, 1.0], &[-2.0, 0.25]]).unwrap();
        let f = Factorization::new(u, v).unwrap();
        let dense = f.to_dense();
        for i in 0..3 {
            for j in 0..2 {
                assert!((f.entry(i, j) - dense.get(i, j)).abs() < 1e-15);
            }
        }
        assert!(Factorization::new(DenseMatrix::zeros(3, 2), DenseMatrix::zeros(2, 1)).is_err());
    }
}
