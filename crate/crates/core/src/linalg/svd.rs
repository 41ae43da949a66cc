use crate::error::{LelaError, Result};
use crate::linalg::{dense_svd, dot, householder_qr, norm2, DenseMatrix, LinearOperator, OracleDecomposition, Residual};
use crate::rng::{domain, normal, stream};

pub const DEFAULT_SVD_ITERS: usize = 100;

/// Extra block columns carried by the subspace iteration.
const OVERSAMPLE: usize = 5;

fn gaussian_block(rows: usize, cols: usize, seed: u64, dom: u64) -> DenseMatrix {
    let mut rng = stream(seed, dom, 0);
    DenseMatrix::from_fn(rows, cols, |_, _| normal(&mut rng))
}

/// Approximate top-`r` singular triplets of `op` by blocked subspace
/// iteration with a QR after every operator application, followed by a
/// Rayleigh–Ritz step.
pub fn topk_svd<A: LinearOperator + ?Sized>(op: &A, r: usize, iters: usize, seed: u64) -> Result<OracleDecomposition> {
    let (n, d) = (op.nrows(), op.ncols());
    if r == 0 || r > n.min(d) {
        return Err(LelaError::param(format!("rank {r} must lie in [1, {}]", n.min(d))));
    }
    if iters == 0 {
        return Err(LelaError::param("topk_svd needs at least one iteration"));
    }
    let block = (r + OVERSAMPLE).min(n.min(d));
    let (mut v, _) = householder_qr(&gaussian_block(d, block, seed, domain::SVD_INIT))?;
    for _ in 0..iters {
        let (u, _) = householder_qr(&op.apply_block(&v))?;
        (v, _) = householder_qr(&op.apply_t_block(&u))?;
    }
    let w = op.apply_block(&v);
    let (qw, rw) = householder_qr(&w)?;
    let core = dense_svd(&rw)?;
    let u_star = qw.matmul(&core.u.columns(0..r))?;
    let v_star = v.matmul(&core.v.columns(0..r))?;
    Ok(OracleDecomposition { u_star, sigma_star: core.sigma[..r].to_vec(), v_star })
}

/// Power-iteration estimate of ‖A‖ after `iters` steps on AᵀA. The
/// estimates form a nondecreasing sequence of lower bounds.
pub fn spectral_norm_power<A: LinearOperator + ?Sized>(op: &A, iters: usize, seed: u64) -> f64 {
    let (n, d) = (op.nrows(), op.ncols());
    if n == 0 || d == 0 {
        return 0.0;
    }
    let mut rng = stream(seed, domain::POWER, 0);
    let mut x: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|t| *t /= nx);
    let mut y = vec![0.0; n];
    for _ in 0..iters {
        op.apply(&x, &mut y);
        op.apply_t(&y, &mut x);
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|t| *t /= nx);
    }
    op.apply(&x, &mut y);
    norm2(&y)
}

/// ‖M − U Vᵀ‖ estimated by power iteration on the implicit residual.
pub fn spectral_error<A: LinearOperator + ?Sized, B: LinearOperator + ?Sized>(m: &A, f: &B, iters: usize, seed: u64) -> f64 {
    spectral_norm_power(&Residual::new(m, f), iters, seed)
}

/// ‖A‖ by Golub–Kahan–Lanczos bidiagonalization with full
/// reorthogonalization. Runs until the leading Ritz value stalls to
/// `rtol`, the Krylov space is exhausted, or `min(n, d)` steps.
pub fn operator_norm<A: LinearOperator + ?Sized>(op: &A, rtol: f64, seed: u64) -> f64 {
    let (n, d) = (op.nrows(), op.ncols());
    let kmax = n.min(d);
    if kmax == 0 {
        return 0.0;
    }
    let mut rng = stream(seed, domain::POWER, 1);
    let mut v: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|t| *t /= nv);

    let mut vs: Vec<Vec<f64>> = vec![v];
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut best = 0.0f64;
    let mut u = vec![0.0; n];
    let reorth = |x: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for b in basis {
                let s = dot(x, b);
                x.iter_mut().zip(b).for_each(|(a, bb)| *a -= s * bb);
            }
        }
    };
    for k in 0..kmax {
        op.apply(&vs[k], &mut u);
        if k > 0 {
            let beta = betas[k - 1];
            let prev = &us[k - 1];
            u.iter_mut().zip(prev).for_each(|(a, b)| *a -= beta * b);
        }
        let mut uu = u.clone();
        reorth(&mut uu, &us);
        let alpha = norm2(&uu);
        alphas.push(alpha);
        let scale_ref = best.max(alpha);
        if alpha <= 1e-14 * scale_ref.max(f64::MIN_POSITIVE) {
            alphas.pop();
            break;
        }
        uu.iter_mut().for_each(|t| *t /= alpha);
        us.push(uu);

        let mut w = vec![0.0; d];
        op.apply_t(&us[k], &mut w);
        w.iter_mut().zip(&vs[k]).for_each(|(a, b)| *a -= alpha * b);
        reorth(&mut w, &vs);
        let beta = norm2(&w);

        let steps = alphas.len();
        let check = steps % 4 == 0 || beta <= 1e-14 * scale_ref || steps == kmax;
        if check {
            let est = bidiagonal_norm(&alphas, &betas);
            let converged = (est - best).abs() <= rtol * est;
            best = best.max(est);
            if converged && steps >= 8 {
                break;
            }
        }
        if beta <= 1e-14 * scale_ref {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|t| *t /= beta);
        vs.push(w);
    }
    best.max(bidiagonal_norm(&alphas, &betas))
}

/// Largest singular value of the upper bidiagonal matrix with diagonal
/// `alphas` and superdiagonal `betas`.
fn bidiagonal_norm(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    if k == 0 {
        return 0.0;
    }
    let b = DenseMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if j == i + 1 && i < betas.len() {
            betas[i]
        } else {
            0.0
        }
    });
    dense_svd(&b).map(|s| s.sigma[0]).unwrap_or(0.0)
}
