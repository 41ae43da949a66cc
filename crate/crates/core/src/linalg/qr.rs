use crate::error::{LelaError, Result};
use crate::linalg::{dot, DenseMatrix};

/// Relative pivot threshold below which a column counts as dependent.
pub const RANK_TOL: f64 = 1e-12;

/// Thin Householder QR of an `n x k` matrix with `k <= n`.
///
/// Returns `(Q, R)` with `Q` having orthonormal columns and `R` upper
/// triangular with a nonnegative diagonal. Rank-deficient input is
/// accepted: `Q` is still orthonormal and `range(X) ⊆ range(Q)`.
pub fn householder_qr(x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, k) = x.shape();
    if k > n {
        return Err(LelaError::param(format!("thin QR needs k <= n, got {n}x{k}")));
    }
    let mut a = x.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for c in 0..k {
        let col = &a.col(c)[c..];
        let norm = dot(col, col).sqrt();
        let mut v = col.to_vec();
        if norm > 0.0 {
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vn = dot(&v, &v).sqrt();
            if vn > 0.0 {
                v.iter_mut().for_each(|t| *t /= vn);
            }
            for cc in c..k {
                let tail = &mut a.col_mut(cc)[c..];
                let s = 2.0 * dot(&v, tail);
                tail.iter_mut().zip(&v).for_each(|(t, vi)| *t -= s * vi);
            }
        } else {
            v.iter_mut().for_each(|t| *t = 0.0);
        }
        reflectors.push(v);
    }

    let mut r = DenseMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..=j {
            r.set(i, j, a.get(i, j));
        }
    }
    let mut q = DenseMatrix::zeros(n, k);
    for j in 0..k {
        let col = q.col_mut(j);
        col[j] = 1.0;
        for c in (0..k).rev() {
            let v = &reflectors[c];
            let tail = &mut col[c..];
            let s = 2.0 * dot(v, tail);
            if s != 0.0 {
                tail.iter_mut().zip(v).for_each(|(t, vi)| *t -= s * vi);
            }
        }
    }
    for c in 0..k {
        if r.get(c, c) < 0.0 {
            q.col_mut(c).iter_mut().for_each(|t| *t = -*t);
            for j in c..k {
                let val = r.get(c, j);
                r.set(c, j, -val);
            }
        }
    }
    Ok((q, r))
}

/// Orthonormal basis of `range(X)`; fails if `X` is numerically rank
/// deficient, naming the first dependent column.
pub fn qr_orthonormalize(x: &DenseMatrix) -> Result<DenseMatrix> {
    let (q, r) = householder_qr(x)?;
    let largest = (0..x.ncols()).map(|j| dot(x.col(j), x.col(j)).sqrt()).fold(0.0f64, f64::max);
    for c in 0..x.ncols() {
        if r.get(c, c) <= RANK_TOL * largest || largest == 0.0 {
            return Err(LelaError::degenerate(format!(
                "rank-deficient factor: column {c} is dependent on the preceding columns"
            )));
        }
    }
    Ok(q)
}
