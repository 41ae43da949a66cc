use crate::linalg::DenseMatrix;

/// Row/column norms and global norms gathered in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixStats {
    pub n_rows: usize,
    pub n_cols: usize,
    /// ‖Mⁱ‖² per row.
    pub row_sq_norms: Vec<f64>,
    /// ‖M_j‖² per column.
    pub col_sq_norms: Vec<f64>,
    /// ‖Mⁱ‖₁ per row.
    pub row_l1: Vec<f64>,
    /// ‖M‖_F².
    pub fro_sq: f64,
    /// ‖M‖_{1,1}.
    pub l11: f64,
    pub nnz: usize,
}

impl MatrixStats {
    pub fn fro_norm(&self) -> f64 {
        self.fro_sq.sqrt()
    }
}

pub fn compute_stats(m: &DenseMatrix) -> MatrixStats {
    let (n, d) = m.shape();
    let mut row_sq_norms = vec![0.0; n];
    let mut row_l1 = vec![0.0; n];
    let mut col_sq_norms = vec![0.0; d];
    let mut nnz = 0usize;
    for (j, cs) in col_sq_norms.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &x) in m.col(j).iter().enumerate() {
            let sq = x * x;
            acc += sq;
            row_sq_norms[i] += sq;
            row_l1[i] += x.abs();
            if x != 0.0 {
                nnz += 1;
            }
        }
        *cs = acc;
    }
    let fro_sq = row_sq_norms.iter().sum();
    let l11 = row_l1.iter().sum();
    MatrixStats { n_rows: n, n_cols: d, row_sq_norms, col_sq_norms, row_l1, fro_sq, l11, nnz }
}
