//! Dense SVD used for oracle metrics and for the small `k x k` cores
//! that arise when truncating factored products. Backed by nalgebra.

use nalgebra::DMatrix;

use crate::error::{LelaError, Result};
use crate::linalg::{householder_qr, DenseMatrix, Factorization, OracleDecomposition};

/// Largest `min(n, d)` for which a dense SVD is attempted.
pub const ORACLE_GUARD: usize = 2000;

/// Full thin SVD with singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct DenseSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.nrows(), m.ncols(), m.data())
}

/// Backward-error budget for accepting a computed SVD.
const SVD_CHECK_RTOL: f64 = 1e-10;

pub fn dense_svd(m: &DenseMatrix) -> Result<DenseSvd> {
    let k = m.nrows().min(m.ncols());
    if k > ORACLE_GUARD {
        return Err(LelaError::OracleTooLarge { dim: k, guard: ORACLE_GUARD });
    }
    if k == 0 {
        return Ok(DenseSvd { u: DenseMatrix::zeros(m.nrows(), 0), sigma: vec![], v: DenseMatrix::zeros(m.ncols(), 0) });
    }
    // nalgebra's bidiagonal SVD occasionally returns a wrong
    // factorization on rank-deficient input, so every result is checked
    // and the transpose, then one-sided Jacobi, are tried in turn.
    if let Some(svd) = nalgebra_svd(m).filter(|s| s.is_accurate(m)) {
        return Ok(svd);
    }
    if let Some(svd) = nalgebra_svd(&m.transpose()).map(DenseSvd::transposed).filter(|s| s.is_accurate(m)) {
        return Ok(svd);
    }
    Ok(jacobi_svd(m))
}

fn nalgebra_svd(m: &DenseMatrix) -> Option<DenseSvd> {
    let k = m.nrows().min(m.ncols());
    let svd = to_na(m).try_svd(true, true, f64::EPSILON, 10_000)?;
    let u = svd.u?;
    let vt = svd.v_t?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let uu = DenseMatrix::from_fn(m.nrows(), k, |i, c| u[(i, order[c])]);
    let vv = DenseMatrix::from_fn(m.ncols(), k, |j, c| vt[(order[c], j)]);
    Some(DenseSvd { u: uu, sigma, v: vv })
}

fn orthonormality_gap(q: &DenseMatrix) -> f64 {
    let g = q.t_matmul(q).expect("square gram");
    g.sub(&DenseMatrix::identity(q.ncols())).expect("same shape").max_abs()
}

/// Orthonormal basis completing the first `keep` columns of `q`.
fn complete_basis(q: &mut DenseMatrix, keep: usize) {
    let (n, k) = q.shape();
    let mut next = 0;
    for c in keep..k {
        loop {
            let mut cand = vec![0.0; n];
            cand[next % n] = 1.0;
            next += 1;
            for _ in 0..2 {
                for p in 0..c {
                    let s = crate::linalg::dot(q.col(p), &cand);
                    cand.iter_mut().zip(q.col(p)).for_each(|(x, y)| *x -= s * y);
                }
            }
            let nn = crate::linalg::norm2(&cand);
            if nn > 0.5 {
                q.col_mut(c).iter_mut().zip(&cand).for_each(|(x, y)| *x = y / nn);
                break;
            }
        }
    }
}

/// One-sided (Hestenes) Jacobi SVD; slow but unconditionally accurate.
fn jacobi_svd(m: &DenseMatrix) -> DenseSvd {
    if m.nrows() < m.ncols() {
        return jacobi_svd(&m.transpose()).transposed();
    }
    let (n, d) = m.shape();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(d);
    let dot = crate::linalg::dot;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let (alpha, beta, gamma) = (dot(a.col(p), a.col(p)), dot(a.col(q), a.col(q)), dot(a.col(p), a.col(q)));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat.get(i, p), mat.get(i, q));
                        mat.set(i, p, c * x - s * y);
                        mat.set(i, q, s * x + c * y);
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..d).map(|c| crate::linalg::norm2(a.col(c))).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma: Vec<f64> = order.iter().map(|&c| norms[c]).collect();
    let tiny = sigma[0] * f64::EPSILON * n as f64;
    let keep = sigma.iter().take_while(|&&s| s > tiny && s > 0.0).count();
    let mut u = DenseMatrix::from_fn(n, d, |i, c| if c < keep { a.get(i, order[c]) / sigma[c] } else { 0.0 });
    complete_basis(&mut u, keep);
    let vv = DenseMatrix::from_fn(d, d, |j, c| v.get(j, order[c]));
    DenseSvd { u, sigma, v: vv }
}

impl DenseSvd {
    fn transposed(self) -> Self {
        DenseSvd { u: self.v, sigma: self.sigma, v: self.u }
    }

    fn is_accurate(&self, m: &DenseMatrix) -> bool {
        let scale = self.sigma.first().copied().unwrap_or(0.0).max(m.max_abs());
        if !self.sigma.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return false;
        }
        let us = DenseMatrix::from_fn(self.u.nrows(), self.u.ncols(), |i, c| self.u.get(i, c) * self.sigma[c]);
        let back = us.matmul(&self.v.transpose()).expect("conformant");
        let tol = SVD_CHECK_RTOL * (m.nrows().max(m.ncols()) as f64).sqrt();
        back.sub(m).expect("same shape").max_abs() <= tol * scale.max(f64::MIN_POSITIVE)
            && orthonormality_gap(&self.u) <= tol
            && orthonormality_gap(&self.v) <= tol
    }

    /// Leading `r` triplets.
    pub fn truncate(&self, r: usize) -> OracleDecomposition {
        let r = r.min(self.sigma.len());
        OracleDecomposition {
            u_star: self.u.columns(0..r),
            sigma_star: self.sigma[..r].to_vec(),
            v_star: self.v.columns(0..r),
        }
    }

    /// ‖M − M_r‖ and ‖M − M_r‖_F.
    pub fn tail_errors(&self, r: usize) -> (f64, f64) {
        let tail = self.sigma.get(r..).unwrap_or(&[]);
        (tail.first().copied().unwrap_or(0.0), tail.iter().map(|s| s * s).sum::<f64>().sqrt())
    }
}

/// Best rank-`r` approximation of a dense matrix.
pub fn truncated_svd(m: &DenseMatrix, r: usize) -> Result<OracleDecomposition> {
    Ok(dense_svd(m)?.truncate(r))
}

impl Factorization {
    /// Exact SVD of `u vᵀ` computed through thin QRs of both factors
    /// and an SVD of the `k x k` core. Never forms the `n x d` product.
    pub fn svd(&self) -> Result<OracleDecomposition> {
        let k = self.rank();
        if k > self.nrows() || k > self.ncols() {
            // fall back to stacking: the product has rank <= min(n, d)
            let dense = self.to_dense();
            return Ok(dense_svd(&dense)?.truncate(self.nrows().min(self.ncols())));
        }
        let (qu, ru) = householder_qr(&self.u)?;
        let (qv, rv) = householder_qr(&self.v)?;
        let core = ru.matmul(&rv.transpose())?;
        let s = dense_svd(&core)?;
        Ok(OracleDecomposition {
            u_star: qu.matmul(&s.u)?,
            sigma_star: s.sigma,
            v_star: qv.matmul(&s.v)?,
        })
    }

    /// Best rank-`r` approximation of `u vᵀ`, again in factored form.
    pub fn truncated(&self, r: usize) -> Result<Factorization> {
        let svd = self.svd()?;
        let mut t = svd.clone();
        let r = r.min(svd.rank());
        t.u_star = svd.u_star.columns(0..r);
        t.v_star = svd.v_star.columns(0..r);
        t.sigma_star.truncate(r);
        Ok(t.to_factorization())
    }
}
