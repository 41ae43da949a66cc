use crate::error::{LelaError, Result};
use crate::linalg::{DenseMatrix, MatrixStats};

/// Closed form used for the per-cell probability q_ij.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElementLaw {
    /// `m·((‖Mⁱ‖² + ‖M_j‖²)/(2(n+d)‖M‖_F²) + |M_ij|/(2‖M‖_{1,1}))`.
    #[default]
    Balanced,
    /// The distributed-protocol form
    /// `m·((‖Mⁱ‖² + ‖M_j‖²)/(2n‖M‖_F²) + |M_ij|/‖M‖_{1,1})`.
    Distributed,
}

impl ElementLaw {
    /// Unclipped q for one cell.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn q(self, m: f64, n: usize, d: usize, row_sq: f64, col_sq: f64, fro_sq: f64, l11: f64, abs_mij: f64) -> f64 {
        match self {
            ElementLaw::Balanced => m * ((row_sq + col_sq) / (2.0 * (n + d) as f64 * fro_sq) + abs_mij / (2.0 * l11)),
            ElementLaw::Distributed => m * ((row_sq + col_sq) / (2.0 * n as f64 * fro_sq) + abs_mij / l11),
        }
    }
}

/// Precomputed element-sampling distribution for one matrix.
///
/// Besides the statistics it holds the multinomial row marginal and, per
/// row, the nonzero columns with their magnitudes (the row-local part of
/// the within-row law). Built in a single pass over `M`.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub m: usize,
    pub stats: MatrixStats,
    pub law: ElementLaw,
    /// Multinomial mass per row, sums to one.
    pub row_marginal: Vec<f64>,
    pub(crate) nz_ptr: Vec<usize>,
    pub(crate) nz_col: Vec<u32>,
    pub(crate) nz_abs: Vec<f64>,
}

/// Build the sampling plan for `M` with target sample count `m`.
pub fn build_plan(mat: &DenseMatrix, m: usize) -> Result<SamplingPlan> {
    SamplingPlan::with_law(mat, m, ElementLaw::Balanced)
}

impl SamplingPlan {
    pub fn with_law(mat: &DenseMatrix, m: usize, law: ElementLaw) -> Result<Self> {
        if m == 0 {
            return Err(LelaError::param("sample budget m must be at least 1"));
        }
        let (n, d) = mat.shape();
        let mut row_sq_norms = vec![0.0; n];
        let mut row_l1 = vec![0.0; n];
        let mut col_sq_norms = vec![0.0; d];
        let mut row_nz: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (j, cs) in col_sq_norms.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, &x) in mat.col(j).iter().enumerate() {
                acc += x * x;
                row_sq_norms[i] += x * x;
                row_l1[i] += x.abs();
                if x != 0.0 {
                    row_nz[i].push((j as u32, x.abs()));
                }
            }
            *cs = acc;
        }
        let fro_sq: f64 = row_sq_norms.iter().sum();
        let l11: f64 = row_l1.iter().sum();
        if !(fro_sq > 0.0) || !(l11 > 0.0) {
            return Err(LelaError::degenerate("all-zero matrix: sampling distribution undefined"));
        }
        let nnz = row_nz.iter().map(Vec::len).sum();
        let mut nz_ptr = Vec::with_capacity(n + 1);
        let mut nz_col = Vec::with_capacity(nnz);
        let mut nz_abs = Vec::with_capacity(nnz);
        nz_ptr.push(0);
        for row in row_nz {
            for (j, a) in row {
                nz_col.push(j);
                nz_abs.push(a);
            }
            nz_ptr.push(nz_col.len());
        }
        let stats = MatrixStats { n_rows: n, n_cols: d, row_sq_norms, col_sq_norms, row_l1, fro_sq, l11, nnz };
        let nd = (n + d) as f64;
        let row_marginal = (0..n)
            .map(|i| 0.5 * (d as f64 * stats.row_sq_norms[i] / (nd * fro_sq) + 1.0 / nd) + 0.5 * stats.row_l1[i] / l11)
            .collect();
        Ok(Self { m, stats, law, row_marginal, nz_ptr, nz_col, nz_abs })
    }

    pub fn nrows(&self) -> usize {
        self.stats.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.stats.n_cols
    }

    /// Unclipped q_ij given the cell value.
    #[inline]
    pub fn q(&self, i: usize, j: usize, mij: f64) -> f64 {
        let s = &self.stats;
        self.law.q(self.m as f64, s.n_rows, s.n_cols, s.row_sq_norms[i], s.col_sq_norms[j], s.fro_sq, s.l11, mij.abs())
    }

    /// q̂_ij = min(q_ij, 1).
    #[inline]
    pub fn q_hat(&self, i: usize, j: usize, mij: f64) -> f64 {
        self.q(i, j, mij).min(1.0)
    }

    /// Nonzero columns of row `i` and their magnitudes.
    pub(crate) fn row_nonzeros(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.nz_ptr[i]..self.nz_ptr[i + 1];
        (&self.nz_col[r.clone()], &self.nz_abs[r])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identity_hand_values() {
        let m = DenseMatrix::identity(2);
        let plan = build_plan(&m, 4).unwrap();
        assert!((plan.q(0, 0, 1.0) - 1.5).abs() < 1e-15);
        assert_eq!(plan.q_hat(0, 0, 1.0), 1.0);
        assert!((plan.q(0, 1, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_budget_and_zero_matrix_rejected() {
        assert!(matches!(build_plan(&DenseMatrix::identity(2), 0), Err(LelaError::Parameter(_))));
        assert!(matches!(build_plan(&DenseMatrix::zeros(3, 2), 5), Err(LelaError::Degenerate(_))));
    }

    #[test]
    fn random_10x8_sums() {
        let mut rng = crate::rng::stream(3, 0, 0);
        let mat = DenseMatrix::from_fn(10, 8, |_, _| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-2.0..2.0) });
        let plan = build_plan(&mat, 40).unwrap();
        let (mut total, mut clipped) = (0.0, 0.0);
        for i in 0..10 {
            for j in 0..8 {
                total += plan.q(i, j, mat.get(i, j));
                clipped += plan.q_hat(i, j, mat.get(i, j));
                assert!(plan.q_hat(i, j, mat.get(i, j)) > 0.0);
            }
        }
        assert!((total - 40.0).abs() < 1e-10);
        assert!(clipped <= 40.0 + 1e-12);
        let s: f64 = plan.row_marginal.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_marginal_formula() {
        let mat = DenseMatrix::from_rows(&[&[1.0, -2.0, 0.0], &[0.0, 0.5, 3.0]]).unwrap();
        let plan = build_plan(&mat, 3).unwrap();
        let s = &plan.stats;
        let (n, d) = (2.0, 3.0);
        for i in 0..2 {
            let want = 0.5 * (d * s.row_sq_norms[i] / ((n + d) * s.fro_sq) + 1.0 / (n + d)) + 0.5 * s.row_l1[i] / s.l11;
            assert!((plan.row_marginal[i] - want).abs() < 1e-15);
        }
        let (cols, abs) = plan.row_nonzeros(1);
        assert_eq!(cols, &[1, 2]);
        assert_eq!(abs, &[0.5, 3.0]);
    }
}
