//! Rank-r approximation of a product A·B from sampled entries of the
//! product itself, the covariance case Y·Yᵀ, and the stagewise baselines.

use crate::error::{LelaError, Result};
use crate::lela::{lela_run, LelaConfig};
use crate::linalg::{DenseMatrix, Factorization, DEFAULT_SVD_ITERS};
use crate::rng::{derive_seed, domain};
use crate::sampling::{build_product_plan, materialize_product_samples, SamplerKind};
use crate::waltmin::{waltmin, SplitMode, TrimReference, WaltMinConfig};

#[derive(Debug, Clone)]
pub struct ProductTask<'a> {
    pub a: &'a DenseMatrix,
    pub b: &'a DenseMatrix,
    pub rank: usize,
    pub m: usize,
    pub iterations: usize,
    pub split: SplitMode,
    pub seed: u64,
}

impl<'a> ProductTask<'a> {
    pub fn new(a: &'a DenseMatrix, b: &'a DenseMatrix, rank: usize, m: usize, iterations: usize, seed: u64) -> Self {
        Self { a, b, rank, m, iterations, split: SplitMode::Reuse, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.ncols() != self.b.nrows() {
            return Err(LelaError::param(format!(
                "inner dimensions differ: A is {}x{}, B is {}x{}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        let cap = self.a.nrows().min(self.b.ncols());
        if self.rank == 0 || self.rank > cap {
            return Err(LelaError::param(format!("rank {} must lie in [1, {cap}]", self.rank)));
        }
        if self.iterations == 0 {
            return Err(LelaError::param("iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Sample cells of A·B, compute them exactly and run WAltMin on them.
pub fn lowrank_product(task: &ProductTask) -> Result<Factorization> {
    task.validate()?;
    let plan = build_product_plan(task.a, task.b, task.m)?;
    let samples = materialize_product_samples(task.a, task.b, &plan, derive_seed(task.seed, domain::TRIAL, 0));
    if samples.is_empty() {
        return Err(LelaError::degenerate("product sampler drew no entries"));
    }
    let cfg = WaltMinConfig {
        rank: task.rank,
        iterations: task.iterations,
        split_mode: task.split,
        init_svd_iters: DEFAULT_SVD_ITERS,
        seed: derive_seed(task.seed, domain::SVD_INIT, 1),
        cross_validate: false,
    };
    Ok(waltmin(&samples, &TrimReference::from_scores(plan.row_scores()), &cfg)?.factorization)
}

/// Rank-r approximation of Y·Yᵀ through the product path.
pub fn lowrank_covariance(y: &DenseMatrix, r: usize, m: usize, iterations: usize, seed: u64) -> Result<Factorization> {
    let yt = y.transpose();
    lowrank_product(&ProductTask::new(y, &yt, r, m, iterations, seed))
}

/// Best rank-r factorization of (F + Fᵀ)/2 for a square F.
pub fn symmetrized(f: &Factorization, r: usize) -> Result<Factorization> {
    if f.nrows() != f.ncols() {
        return Err(LelaError::param("symmetrization needs a square factorization"));
    }
    let left = f.u.hstack(&f.v)?.scaled(0.5);
    let right = f.v.hstack(&f.u)?;
    Factorization::new(left, right)?.truncated(r)
}

fn stage_config(rank: usize, m: usize, iterations: usize, seed: u64) -> LelaConfig {
    LelaConfig::new(rank, m, iterations, seed).with_sampler(SamplerKind::Multinomial)
}

/// Approximate A and B separately (m samples each) and multiply.
pub fn stagewise_product_baseline(task: &ProductTask) -> Result<Factorization> {
    task.validate()?;
    let ra = task.rank.min(task.a.nrows().min(task.a.ncols()));
    let rb = task.rank.min(task.b.nrows().min(task.b.ncols()));
    let fa = lela_run(task.a, &stage_config(ra, task.m, task.iterations, derive_seed(task.seed, domain::TRIAL, 1)))?.result.factorization;
    let fb = lela_run(task.b, &stage_config(rb, task.m, task.iterations, derive_seed(task.seed, domain::TRIAL, 2)))?.result.factorization;
    // Ua Vaᵀ Ub Vbᵀ = (Ua (Vaᵀ Ub)) Vbᵀ
    let core = fa.v.t_matmul(&fb.u)?;
    let fac = Factorization::new(fa.u.matmul(&core)?, fb.v)?;
    if ra == rb {
        Ok(fac)
    } else {
        fac.truncated(ra.min(rb))
    }
}

/// Approximate Y at rank r and form Ŷ Ŷᵀ = U (VᵀV) Uᵀ.
pub fn stagewise_covariance_baseline(y: &DenseMatrix, r: usize, m: usize, iterations: usize, seed: u64) -> Result<Factorization> {
    let cap = y.nrows().min(y.ncols());
    if r == 0 || r > cap {
        return Err(LelaError::param(format!("rank {r} must lie in [1, {cap}]")));
    }
    let f = lela_run(y, &stage_config(r, m, iterations, derive_seed(seed, domain::TRIAL, 1)))?.result.factorization;
    let gram = f.v.t_matmul(&f.v)?;
    Factorization::new(f.u.matmul(&gram)?, f.u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{qr_orthonormalize, truncated_svd};
    use crate::rng::{normal, stream};

    fn gaussian(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream(seed, 0, 0);
        DenseMatrix::from_fn(n, d, |_, _| normal(&mut rng))
    }

    #[test]
    fn rank_one_outer_product() {
        let u = DenseMatrix::from_fn(30, 1, |i, _| 1.0 + (i as f64 * 0.3).sin() * 0.5);
        let v = DenseMatrix::from_fn(1, 25, |_, j| 1.0 + (j as f64 * 0.7).cos() * 0.5);
        let truth = u.matmul(&v).unwrap();
        let f = lowrank_product(&ProductTask::new(&u, &v, 1, 30 * 25 * 4, 5, 1)).unwrap();
        let rel = f.to_dense().sub(&truth).unwrap().fro_norm() / truth.fro_norm();
        assert!(rel <= 1e-8, "{rel}");
    }

    #[test]
    fn covariance_of_scaled_orthonormal_columns() {
        let q = qr_orthonormalize(&gaussian(40, 2, 3)).unwrap();
        let y = DenseMatrix::from_fn(40, 2, |i, k| q.get(i, k) * [3.0, 2.0][k]);
        let truth = y.matmul(&y.transpose()).unwrap();
        let f = lowrank_covariance(&y, 2, 40 * 40 * 2, 5, 2).unwrap();
        let rel = f.to_dense().sub(&truth).unwrap().fro_norm() / truth.fro_norm();
        assert!(rel <= 1e-8, "{rel}");
        let s = symmetrized(&f, 2).unwrap().to_dense();
        assert!(s.sub(&s.transpose()).unwrap().max_abs() <= 1e-12 * s.fro_norm());
        assert!(s.sub(&truth).unwrap().fro_norm() <= 1e-8 * truth.fro_norm());
    }

    #[test]
    fn deterministic() {
        let (a, b) = (gaussian(20, 6, 1), gaussian(6, 15, 2));
        let t = ProductTask::new(&a, &b, 2, 200, 4, 9);
        assert_eq!(lowrank_product(&t).unwrap(), lowrank_product(&t).unwrap());
        assert_eq!(stagewise_product_baseline(&t).unwrap(), stagewise_product_baseline(&t).unwrap());
    }

    #[test]
    fn stagewise_identity() {
        let i = DenseMatrix::identity(12);
        let f = stagewise_product_baseline(&ProductTask::new(&i, &i, 12, 12 * 12 * 4, 3, 1)).unwrap();
        assert!(f.to_dense().sub(&i).unwrap().max_abs() <= 1e-8);
        assert_eq!(f.rank(), 12);
    }

    #[test]
    fn stagewise_covariance_is_symmetric_psd_form() {
        let y = gaussian(15, 8, 4);
        let f = stagewise_covariance_baseline(&y, 3, 15 * 8 * 20, 4, 1).unwrap();
        let d = f.to_dense();
        assert!(d.sub(&d.transpose()).unwrap().max_abs() <= 1e-10 * d.fro_norm());
        let best = truncated_svd(&y, 3).unwrap().to_factorization().to_dense();
        let want = best.matmul(&best.transpose()).unwrap();
        assert!(d.sub(&want).unwrap().fro_norm() <= 1e-6 * want.fro_norm());
    }

    #[test]
    fn validation() {
        let (a, b) = (gaussian(5, 3, 1), gaussian(4, 5, 2));
        assert!(matches!(lowrank_product(&ProductTask::new(&a, &b, 1, 10, 1, 1)), Err(LelaError::Parameter(_))));
        let b = gaussian(3, 5, 2);
        assert!(matches!(lowrank_product(&ProductTask::new(&a, &b, 6, 10, 1, 1)), Err(LelaError::Parameter(_))));
        assert!(matches!(lowrank_product(&ProductTask::new(&a, &b, 1, 0, 1, 1)), Err(LelaError::Parameter(_))));
    }
}
