//! End-to-end driver: stats pass, sampling pass, weighted alternating
//! minimization, and error reporting against the best rank-r fit.

use crate::error::{LelaError, Result};
use crate::linalg::{dense_svd, operator_norm, DenseMatrix, Factorization, LinearOperator, Residual, DEFAULT_SVD_ITERS, ORACLE_GUARD};
use crate::rng::{derive_seed, domain};
use crate::sampling::{build_plan, draw_bernoulli, draw_multinomial_with, SamplerKind, SampleSet, SamplingPlan, WithinRowLaw};
use crate::waltmin::{waltmin, SplitMode, TrimReference, WaltMinConfig, WaltMinResult};

/// Relative tolerance for Lanczos norm estimates in reports.
pub const NORM_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LelaConfig {
    pub rank: usize,
    pub m: usize,
    pub iterations: usize,
    pub sampler: SamplerKind,
    pub split: SplitMode,
    pub init_svd_iters: usize,
    pub cross_validate: bool,
    pub seed: u64,
    /// Compute ‖M − M_r‖ and ‖M − M_r‖_F with a dense SVD.
    pub with_oracle: bool,
}

impl LelaConfig {
    pub fn new(rank: usize, m: usize, iterations: usize, seed: u64) -> Self {
        Self {
            rank,
            m,
            iterations,
            sampler: SamplerKind::Multinomial,
            split: SplitMode::Reuse,
            init_svd_iters: DEFAULT_SVD_ITERS,
            cross_validate: false,
            seed,
            with_oracle: false,
        }
    }

    pub fn with_sampler(mut self, sampler: SamplerKind) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_oracle(mut self, on: bool) -> Self {
        self.with_oracle = on;
        self
    }

    fn waltmin_config(&self) -> WaltMinConfig {
        WaltMinConfig {
            rank: self.rank,
            iterations: self.iterations,
            split_mode: self.split,
            init_svd_iters: self.init_svd_iters,
            seed: derive_seed(self.seed, domain::SVD_INIT, 1),
            cross_validate: self.cross_validate,
        }
    }
}

/// Error metrics for a candidate factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBundle {
    pub spectral_err: f64,
    pub fro_err: f64,
    pub oracle_spectral: Option<f64>,
    pub oracle_fro: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LelaReport {
    pub factorization: Factorization,
    pub spectral_err: f64,
    pub fro_err: f64,
    pub oracle_spectral: Option<f64>,
    pub oracle_fro: Option<f64>,
    pub sample_count: usize,
    pub passes_over_m: usize,
    /// Sampler work counter (multinomial path only).
    pub sampler_ops: Option<u64>,
    pub unobserved_rows: Vec<usize>,
    pub unobserved_cols: Vec<usize>,
    pub trimmed_rows: Vec<usize>,
}

/// Everything produced before evaluation.
#[derive(Debug, Clone)]
pub struct LelaRun {
    pub samples: SampleSet,
    pub plan: SamplingPlan,
    pub result: WaltMinResult,
    pub passes_over_m: usize,
    pub sampler_ops: Option<u64>,
}

/// Counts full sweeps over M made by the pipeline.
#[derive(Debug, Default)]
struct PassAudit {
    passes: usize,
}

impl PassAudit {
    fn sweep<T>(&mut self, f: impl FnOnce() -> T) -> T {
        self.passes += 1;
        f()
    }
}

/// Sample and factorize without evaluating.
pub fn lela_run(m: &DenseMatrix, cfg: &LelaConfig) -> Result<LelaRun> {
    let (n, d) = m.shape();
    if cfg.rank == 0 || cfg.rank > n.min(d) {
        return Err(LelaError::param(format!("rank {} must lie in [1, {}]", cfg.rank, n.min(d))));
    }
    if cfg.iterations == 0 {
        return Err(LelaError::param("iterations must be at least 1"));
    }
    let mut audit = PassAudit::default();
    let plan = audit.sweep(|| build_plan(m, cfg.m))?;
    let sample_seed = derive_seed(cfg.seed, domain::TRIAL, 0);
    let (samples, sampler_ops) = audit.sweep(|| match cfg.sampler {
        SamplerKind::Bernoulli => (draw_bernoulli(&plan, m, sample_seed), None),
        SamplerKind::Multinomial | SamplerKind::MultinomialStated => {
            let law = if cfg.sampler == SamplerKind::Multinomial { WithinRowLaw::Exact } else { WithinRowLaw::Stated };
            let (s, cost) = draw_multinomial_with(&plan, m, law, sample_seed);
            (s, Some(cost.ops))
        }
    });
    if samples.is_empty() {
        return Err(LelaError::degenerate("sampler drew no entries"));
    }
    let result = waltmin(&samples, &TrimReference::from_stats(&plan.stats), &cfg.waltmin_config())?;
    Ok(LelaRun { samples, plan, result, passes_over_m: audit.passes, sampler_ops })
}

/// Full pipeline with error reporting on M.
pub fn lela(m: &DenseMatrix, cfg: &LelaConfig) -> Result<LelaReport> {
    let run = lela_run(m, cfg)?;
    let errs = evaluate(m, &run.result.factorization, cfg.rank, cfg.with_oracle)?;
    Ok(LelaReport {
        factorization: run.result.factorization,
        spectral_err: errs.spectral_err,
        fro_err: errs.fro_err,
        oracle_spectral: errs.oracle_spectral,
        oracle_fro: errs.oracle_fro,
        sample_count: run.samples.len(),
        passes_over_m: run.passes_over_m,
        sampler_ops: run.sampler_ops,
        unobserved_rows: run.result.unobserved_rows,
        unobserved_cols: run.result.unobserved_cols,
        trimmed_rows: run.result.init.trimmed_rows,
    })
}

/// ‖M − UVᵀ‖_F accumulated column by column, never forming UVᵀ.
pub fn fro_error(m: &DenseMatrix, f: &Factorization) -> f64 {
    let (n, d) = m.shape();
    let r = f.rank();
    let mut acc = 0.0;
    let mut vrow = vec![0.0; r];
    for j in 0..d {
        for (k, x) in vrow.iter_mut().enumerate() {
            *x = f.v.get(j, k);
        }
        let col = m.col(j);
        for (i, mij) in col.iter().enumerate().take(n) {
            let fij: f64 = (0..r).map(|k| f.u.get(i, k) * vrow[k]).sum();
            acc += (mij - fij).powi(2);
        }
    }
    acc.sqrt()
}

/// Spectral norm of any implicit operator at report accuracy.
pub fn spectral_norm<A: LinearOperator + ?Sized>(op: &A) -> f64 {
    operator_norm(op, NORM_RTOL, 0x5eed)
}

/// Errors of F against M, optionally with the best rank-r baseline.
pub fn evaluate(m: &DenseMatrix, f: &Factorization, r: usize, with_oracle: bool) -> Result<ErrorBundle> {
    if m.shape() != (f.nrows(), f.ncols()) {
        return Err(LelaError::param(format!("factorization shape {:?} does not match matrix {:?}", (f.nrows(), f.ncols()), m.shape())));
    }
    let spectral_err = spectral_norm(&Residual::new(m, f));
    let fro_err = fro_error(m, f);
    let (oracle_spectral, oracle_fro) = if with_oracle {
        let dim = m.nrows().min(m.ncols());
        if dim > ORACLE_GUARD {
            return Err(LelaError::OracleTooLarge { dim, guard: ORACLE_GUARD });
        }
        let (s, fr) = dense_svd(m)?.tail_errors(r);
        (Some(s), Some(fr))
    } else {
        (None, None)
    };
    Ok(ErrorBundle { spectral_err, fro_err, oracle_spectral, oracle_fro })
}

/// m = ⌈c · n r³ κ² log n / ε²⌉ with n = max(n, d); constants are the caller's.
pub fn suggest_m(n: usize, d: usize, r: usize, kappa: f64, eps: f64, c: f64) -> Result<usize> {
    if r == 0 || !(eps > 0.0) || !(kappa >= 1.0) || !(c > 0.0) {
        return Err(LelaError::param("suggest_m needs r ≥ 1, ε > 0, κ ≥ 1, c > 0"));
    }
    let nn = n.max(d) as f64;
    let m = c * nn * (r as f64).powi(3) * kappa * kappa * nn.ln().max(1.0) / (eps * eps);
    Ok((m.ceil() as usize).min(n * d))
}
