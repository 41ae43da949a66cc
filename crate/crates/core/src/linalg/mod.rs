//! Numerical substrate: dense column-major matrices, norms, QR, the
//! small-rank SVD and the per-row weighted least-squares kernel.

mod dense;
pub(crate) mod lsq;
mod matrix;
mod operator;
mod qr;
mod stats;
mod svd;

pub mod io;

pub use dense::{dense_svd, truncated_svd, DenseSvd, ORACLE_GUARD};
pub use lsq::{solve_weighted_row_ls, LsqOutcome, LsqTarget, PSEUDO_SOLVE_RTOL};
pub use matrix::{DenseMatrix, Factorization, OracleDecomposition};
pub use operator::{LinearOperator, Product, Residual};
pub use qr::{householder_qr, qr_orthonormalize, RANK_TOL};
pub use stats::{compute_stats, MatrixStats};
pub use svd::{operator_norm, spectral_error, spectral_norm_power, topk_svd, DEFAULT_SVD_ITERS};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
