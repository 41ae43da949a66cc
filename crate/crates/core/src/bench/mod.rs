//! Synthetic instances, the Gaussian-projection baseline and the
//! experiment runner behind the `bench` subcommand.

mod experiment;

pub use experiment::{run_experiment, summarize, write_rows, write_summary, Algorithm, ExperimentConfig, ExperimentRow, SummaryRow, CSV_HEADER, SUMMARY_HEADER};

use crate::error::{LelaError, Result};
use crate::linalg::{householder_qr, operator_norm, qr_orthonormalize, truncated_svd, DenseMatrix, Factorization, OracleDecomposition, ORACLE_GUARD};
use crate::rng::{domain, normal, stream};

fn gaussian(n: usize, d: usize, seed: u64, dom: u64, index: u64) -> DenseMatrix {
    let mut rng = stream(seed, dom, index);
    DenseMatrix::from_fn(n, d, |_, _| normal(&mut rng))
}

fn random_orthonormal(n: usize, r: usize, seed: u64, index: u64) -> Result<DenseMatrix> {
    qr_orthonormalize(&gaussian(n, r, seed, domain::GENERATOR, index))
}

/// Power-law instance `D U Vᵀ D` with `D_ii ∝ 1/i^α`, rescaled so that
/// all r singular values equal one. Returns the matrix and its SVD.
pub fn gen_powerlaw(n: usize, d: usize, r: usize, alpha: f64, seed: u64) -> Result<(DenseMatrix, OracleDecomposition)> {
    if r == 0 || r > n.min(d) {
        return Err(LelaError::param(format!("rank {r} must lie in [1, {}]", n.min(d))));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(LelaError::param(format!("power-law exponent {alpha} must be finite and nonnegative")));
    }
    let dim = n.min(d);
    if dim > ORACLE_GUARD {
        return Err(LelaError::OracleTooLarge { dim, guard: ORACLE_GUARD });
    }
    let u = random_orthonormal(n, r, seed, 0)?;
    let v = random_orthonormal(d, r, seed, 1)?;
    let du = DenseMatrix::from_fn(n, r, |i, k| u.get(i, k) / ((i + 1) as f64).powf(alpha));
    let dv = DenseMatrix::from_fn(d, r, |j, k| v.get(j, k) / ((j + 1) as f64).powf(alpha));
    // D U Vᵀ D = Q1 (R1 R2ᵀ) Q2ᵀ; the r×r core carries the spectrum.
    let (q1, r1) = householder_qr(&du)?;
    let (q2, r2) = householder_qr(&dv)?;
    let core = r1.matmul(&r2.transpose())?;
    let small = truncated_svd(&core, r)?;
    let u_star = q1.matmul(&small.u_star)?;
    let v_star = q2.matmul(&small.v_star)?;
    let m = u_star.matmul(&v_star.transpose())?;
    Ok((m, OracleDecomposition { u_star, sigma_star: vec![1.0; r], v_star }))
}

/// Leverage scores ‖(U*)ⁱ‖² of an orthonormal factor.
pub fn leverage_scores(u: &DenseMatrix) -> Vec<f64> {
    (0..u.nrows()).map(|i| (0..u.ncols()).map(|k| u.get(i, k).powi(2)).sum()).collect()
}

/// `M + Z` with Gaussian Z rescaled to spectral norm `noise_spectral`.
pub fn add_noise(m: &DenseMatrix, noise_spectral: f64, seed: u64) -> Result<DenseMatrix> {
    if !(noise_spectral >= 0.0) || !noise_spectral.is_finite() {
        return Err(LelaError::param(format!("noise level {noise_spectral} must be finite and nonnegative")));
    }
    if noise_spectral == 0.0 {
        return Ok(m.clone());
    }
    let z = gaussian(m.nrows(), m.ncols(), seed, domain::NOISE, 0);
    let scale = noise_spectral / operator_norm(&z, 1e-12, seed);
    m.add(&z.scaled(scale))
}

/// Randomized range finder with l Gaussian test vectors, then the
/// rank-r truncation of Q Qᵀ M.
pub fn gaussian_projection_baseline(m: &DenseMatrix, r: usize, l: usize, power_steps: usize, seed: u64) -> Result<Factorization> {
    let (n, d) = m.shape();
    if r == 0 || r > l || l > n.min(d) {
        return Err(LelaError::param(format!("need 1 <= r ({r}) <= l ({l}) <= {}", n.min(d))));
    }
    let g = gaussian(d, l, seed, domain::SKETCH, 0);
    let mut q = householder_qr(&m.matmul(&g)?)?.0;
    for _ in 0..power_steps {
        let w = householder_qr(&m.t_matmul(&q)?)?.0;
        q = householder_qr(&m.matmul(&w)?)?.0;
    }
    let b = q.t_matmul(m)?;
    let small = truncated_svd(&b, r)?.to_factorization();
    Factorization::new(q.matmul(&small.u)?, small.v)
}

/// A product whose factors' leading subspaces are mutually orthogonal:
/// `A = 2·P₁X₁ᵀ + P₂X₂ᵀ`, `B = 2·X₃Q₁ᵀ + X₂Q₂ᵀ`, so `A·B = P₂Q₂ᵀ` while
/// the rank-r parts of A and B multiply to zero. Needs `d ≥ 3r`.
#[derive(Debug, Clone)]
pub struct AdversarialProduct {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    /// `A·B` in factored form.
    pub product: Factorization,
}

pub fn adversarial_product(n1: usize, d: usize, n2: usize, r: usize, seed: u64) -> Result<AdversarialProduct> {
    if r == 0 || 3 * r > d || 2 * r > n1.min(n2) {
        return Err(LelaError::param(format!("adversarial product needs 3r <= d and 2r <= n (r={r}, d={d})")));
    }
    let p = random_orthonormal(n1, 2 * r, seed, 2)?;
    let x = random_orthonormal(d, 3 * r, seed, 3)?;
    let q = random_orthonormal(n2, 2 * r, seed, 4)?;
    let (p1, p2) = (p.columns(0..r), p.columns(r..2 * r));
    let (x1, x2, x3) = (x.columns(0..r), x.columns(r..2 * r), x.columns(2 * r..3 * r));
    let (q1, q2) = (q.columns(0..r), q.columns(r..2 * r));
    let a = p1.matmul(&x1.transpose())?.scaled(2.0).add(&p2.matmul(&x2.transpose())?)?;
    let b = x3.matmul(&q1.transpose())?.scaled(2.0).add(&x2.matmul(&q2.transpose())?)?;
    Ok(AdversarialProduct { a, b, product: Factorization::new(p2, q2)? })
}
