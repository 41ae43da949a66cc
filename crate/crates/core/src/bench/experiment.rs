use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::bench::{adversarial_product, add_noise, gaussian_projection_baseline, gen_powerlaw, AdversarialProduct};
use crate::distpca::{run_distpca, DistConfig};
use crate::error::{LelaError, Result};
use crate::lela::{lela_run, spectral_norm, LelaConfig};
use crate::linalg::{dense_svd, DenseMatrix, Factorization, Product, Residual};
use crate::matprod::{lowrank_covariance, lowrank_product, stagewise_covariance_baseline, stagewise_product_baseline, ProductTask};
use crate::rng::{derive_seed, domain};
use crate::sampling::SamplerKind;
use crate::waltmin::SplitMode;

pub const CSV_HEADER: &str = "algorithm,m,l,trial,spectral_err,residual_err,wall_time,error";
pub const SUMMARY_HEADER: &str = "algorithm,m,l,median,q1,q3,ok,failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Lela,
    GaussianProjection,
    ProductDirect,
    ProductStagewise,
    CovarianceDirect,
    CovarianceStagewise,
    DistPca,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Lela,
        Algorithm::GaussianProjection,
        Algorithm::ProductDirect,
        Algorithm::ProductStagewise,
        Algorithm::CovarianceDirect,
        Algorithm::CovarianceStagewise,
        Algorithm::DistPca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lela => "lela",
            Algorithm::GaussianProjection => "gaussian-projection",
            Algorithm::ProductDirect => "product-direct",
            Algorithm::ProductStagewise => "product-stagewise",
            Algorithm::CovarianceDirect => "covariance-direct",
            Algorithm::CovarianceStagewise => "covariance-stagewise",
            Algorithm::DistPca => "distpca",
        }
    }

    fn uses_product(self) -> bool {
        matches!(self, Algorithm::ProductDirect | Algorithm::ProductStagewise)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LelaError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| LelaError::param(format!("unknown algorithm {s}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub alpha: f64,
    pub noise_spectral: f64,
    pub m_grid: Vec<usize>,
    /// Sketch sizes paired with `m_grid`, each `m / n`.
    pub l_grid: Vec<usize>,
    pub trials: usize,
    pub iterations: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub sampler: SamplerKind,
    pub split: SplitMode,
    pub servers: usize,
    pub power_steps: usize,
    /// Fill the wall_time column; off keeps the CSV reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let (n, r) = (500, 5);
        Self {
            n,
            d: n,
            r,
            alpha: 0.0,
            noise_spectral: 0.0,
            m_grid: Vec::new(),
            l_grid: Vec::new(),
            trials: 20,
            iterations: 15,
            seed: 0,
            algorithms: vec![Algorithm::Lela, Algorithm::GaussianProjection],
            sampler: SamplerKind::Multinomial,
            split: SplitMode::Reuse,
            servers: 4,
            power_steps: 0,
            timing: false,
        }
        .with_multipliers(&[4, 8, 16, 32])
    }
}

impl ExperimentConfig {
    /// Set the budgets to `c·n·r` for each c, pairing `l = m/n`.
    pub fn with_multipliers(mut self, mults: &[usize]) -> Self {
        self.m_grid = mults.iter().map(|c| c * self.n * self.r).collect();
        self.l_grid = self.m_grid.iter().map(|m| m / self.n).collect();
        self
    }

    pub fn with_budgets(mut self, m_grid: Vec<usize>) -> Self {
        self.l_grid = m_grid.iter().map(|m| m / self.n).collect();
        self.m_grid = m_grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(LelaError::param("trials must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(LelaError::param("iterations must be at least 1"));
        }
        if self.m_grid.is_empty() || self.algorithms.is_empty() {
            return Err(LelaError::param("need at least one budget and one algorithm"));
        }
        if self.l_grid.len() != self.m_grid.len() || self.m_grid.iter().zip(&self.l_grid).any(|(m, l)| m / self.n != *l) {
            return Err(LelaError::param("every projection size l must equal its paired m / n"));
        }
        if self.r == 0 || self.r > self.n.min(self.d) {
            return Err(LelaError::param(format!("rank {} must lie in [1, {}]", self.r, self.n.min(self.d))));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub algorithm: Algorithm,
    pub m: usize,
    pub l: Option<usize>,
    pub trial: usize,
    /// Distance to the target low-rank matrix.
    pub spectral_err: Option<f64>,
    /// Distance to the full (noisy) matrix.
    pub residual_err: Option<f64>,
    pub wall_time: Option<f64>,
    pub error: Option<String>,
}

struct Instance {
    matrix: DenseMatrix,
    target: Factorization,
}

struct CovarianceInstance {
    target: Factorization,
}

struct TrialData {
    low_rank: Option<Instance>,
    covariance: Option<CovarianceInstance>,
    product: Option<AdversarialProduct>,
}

fn build_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialData> {
    let seed = derive_seed(cfg.seed, domain::TRIAL, trial as u64);
    let need_low = cfg.algorithms.iter().any(|a| !a.uses_product());
    let need_cov = cfg.algorithms.iter().any(|a| matches!(a, Algorithm::CovarianceDirect | Algorithm::CovarianceStagewise));
    let low_rank = if need_low {
        let (mr, svd) = gen_powerlaw(cfg.n, cfg.d, cfg.r, cfg.alpha, seed)?;
        let matrix = add_noise(&mr, cfg.noise_spectral, derive_seed(seed, domain::NOISE, 0))?;
        Some(Instance { matrix, target: svd.to_factorization() })
    } else {
        None
    };
    let covariance = match (&low_rank, need_cov) {
        (Some(inst), true) => {
            let svd = dense_svd(&inst.matrix)?.truncate(cfg.r);
            let u = DenseMatrix::from_fn(cfg.n, cfg.r, |i, k| svd.u_star.get(i, k) * svd.sigma_star[k] * svd.sigma_star[k]);
            Some(CovarianceInstance { target: Factorization::new(u, svd.u_star)? })
        }
        _ => None,
    };
    let product = if cfg.algorithms.iter().any(|a| a.uses_product()) {
        Some(adversarial_product(cfg.n, cfg.d, cfg.n, cfg.r, derive_seed(seed, domain::GENERATOR, 1))?)
    } else {
        None
    };
    Ok(TrialData { low_rank, covariance, product })
}

fn run_one(cfg: &ExperimentConfig, data: &TrialData, alg: Algorithm, budget: usize, trial: usize) -> Result<(f64, f64)> {
    let m = cfg.m_grid[budget];
    let seed = derive_seed(derive_seed(cfg.seed, domain::TRIAL, trial as u64), domain::TRIAL, 1 + budget as u64);
    let low = || data.low_rank.as_ref().expect("instance built");
    let errs_vs = |inst: &Instance, f: &Factorization| (spectral_norm(&Residual::new(&inst.target, f)), spectral_norm(&Residual::new(&inst.matrix, f)));
    match alg {
        Algorithm::Lela => {
            let mut lc = LelaConfig::new(cfg.r, m, cfg.iterations, seed).with_sampler(cfg.sampler);
            lc.split = cfg.split;
            let f = lela_run(&low().matrix, &lc)?.result.factorization;
            Ok(errs_vs(low(), &f))
        }
        Algorithm::GaussianProjection => {
            let f = gaussian_projection_baseline(&low().matrix, cfg.r, cfg.l_grid[budget], cfg.power_steps, seed)?;
            Ok(errs_vs(low(), &f))
        }
        Algorithm::DistPca => {
            let mut dc = DistConfig::new(cfg.servers, cfg.r, m, cfg.iterations, seed);
            dc.split = cfg.split;
            let out = run_distpca(&low().matrix, &dc)?;
            Ok(errs_vs(low(), &out.factorization))
        }
        Algorithm::ProductDirect | Algorithm::ProductStagewise => {
            let inst = data.product.as_ref().expect("instance built");
            let mut task = ProductTask::new(&inst.a, &inst.b, cfg.r, m, cfg.iterations, seed);
            task.split = cfg.split;
            let f = if alg == Algorithm::ProductDirect { lowrank_product(&task)? } else { stagewise_product_baseline(&task)? };
            let err = spectral_norm(&Residual::new(&inst.product, &f));
            Ok((err, err))
        }
        Algorithm::CovarianceDirect | Algorithm::CovarianceStagewise => {
            let y = &low().matrix;
            let f = if alg == Algorithm::CovarianceDirect {
                lowrank_covariance(y, cfg.r, m, cfg.iterations, seed)?
            } else {
                stagewise_covariance_baseline(y, cfg.r, m, cfg.iterations, seed)?
            };
            let target = &data.covariance.as_ref().expect("instance built").target;
            let yt = y.transpose();
            let full = Product::new(y, &yt);
            Ok((spectral_norm(&Residual::new(target, &f)), spectral_norm(&Residual::new(&full, &f))))
        }
    }
}

/// Run algorithm × budget × trial; rows come back in that order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let trials: Vec<std::result::Result<TrialData, String>> =
        (0..cfg.trials).into_par_iter().map(|t| build_trial(cfg, t).map_err(|e| e.to_string())).collect();
    let jobs: Vec<(Algorithm, usize, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.m_grid.len()).flat_map(move |b| (0..cfg.trials).map(move |t| (a, b, t))))
        .collect();
    let rows = jobs
        .into_par_iter()
        .map(|(alg, budget, trial)| {
            let start = Instant::now();
            let outcome = match &trials[trial] {
                Ok(data) => run_one(cfg, data, alg, budget, trial).map_err(|e| e.to_string()),
                Err(e) => Err(format!("instance: {e}")),
            };
            let wall_time = cfg.timing.then(|| start.elapsed().as_secs_f64());
            let l = (alg == Algorithm::GaussianProjection).then(|| cfg.l_grid[budget]);
            let (spectral_err, residual_err, error) = match outcome {
                Ok((s, r)) => (Some(s), Some(r), None),
                Err(e) => (None, None, Some(e)),
            };
            ExperimentRow { algorithm: alg, m: cfg.m_grid[budget], l, trial, spectral_err, residual_err, wall_time, error }
        })
        .collect();
    Ok(rows)
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn write_rows<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.algorithm.to_string(),
            r.m.to_string(),
            opt(&r.l),
            r.trial.to_string(),
            opt(&r.spectral_err),
            opt(&r.residual_err),
            opt(&r.wall_time),
            opt(&r.error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub m: usize,
    pub l: Option<usize>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub ok: usize,
    pub failed: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per (algorithm, m) cell: median and quartiles of `spectral_err`.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryRow> {
    let mut cells: Vec<(Algorithm, usize, Option<usize>, Vec<f64>, usize)> = Vec::new();
    for r in rows {
        let pos = match cells.iter().position(|c| c.0 == r.algorithm && c.1 == r.m) {
            Some(p) => p,
            None => {
                cells.push((r.algorithm, r.m, r.l, Vec::new(), 0));
                cells.len() - 1
            }
        };
        match r.spectral_err {
            Some(e) => cells[pos].3.push(e),
            None => cells[pos].4 += 1,
        }
    }
    cells
        .into_iter()
        .map(|(algorithm, m, l, mut vals, failed)| {
            vals.sort_by(f64::total_cmp);
            let q = |p| (!vals.is_empty()).then(|| quantile(&vals, p));
            SummaryRow { algorithm, m, l, median: q(0.5), q1: q(0.25), q3: q(0.75), ok: vals.len(), failed }
        })
        .collect()
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER.split(','))?;
    for s in summary {
        w.write_record([
            s.algorithm.to_string(),
            s.m.to_string(),
            opt(&s.l),
            opt(&s.median),
            opt(&s.q1),
            opt(&s.q3),
            s.ok.to_string(),
            s.failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig { n: 40, d: 40, r: 2, trials: 1, iterations: 3, seed: 5, ..ExperimentConfig::default() }.with_multipliers(&[8])
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.iterations, c.trials, c.r, c.n), (15, 20, 5, 500));
        assert_eq!(c.m_grid, vec![10_000, 20_000, 40_000, 80_000]);
        assert_eq!(c.l_grid, vec![20, 40, 80, 160]);
        c.validate().unwrap();
    }

    #[test]
    fn one_row_per_cell() {
        let cfg = ExperimentConfig { algorithms: vec![Algorithm::Lela], ..small() };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].spectral_err.unwrap() >= 0.0);
        assert!(rows[0].error.is_none());
    }

    #[test]
    fn golden_header_and_byte_identical_rerun() {
        let cfg = ExperimentConfig { algorithms: Algorithm::ALL.to_vec(), trials: 2, ..small() };
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_rows(&run_experiment(&cfg).unwrap(), &mut a).unwrap();
        write_rows(&run_experiment(&cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().next().unwrap(), "algorithm,m,l,trial,spectral_err,residual_err,wall_time,error");
        assert_eq!(text.lines().count(), 1 + 7 * 2);
        assert!(text.lines().nth(1).unwrap().starts_with("lela,640,,0,"));
    }

    #[test]
    fn failures_become_rows() {
        // l = m/n = 1 is below the rank, so the sketch is rejected per row.
        let cfg = ExperimentConfig { algorithms: vec![Algorithm::GaussianProjection, Algorithm::Lela], ..small() }.with_budgets(vec![40, 640]);
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].error.is_some() && rows[0].spectral_err.is_none());
        assert!(rows[1].error.is_none());
        let s = summarize(&rows);
        assert_eq!((s[0].ok, s[0].failed, s[0].median), (0, 1, None));
    }

    #[test]
    fn validation_rejects_bad_pairing() {
        let mut cfg = small();
        cfg.l_grid = vec![3];
        assert!(matches!(run_experiment(&cfg), Err(LelaError::Parameter(_))));
        assert!(run_experiment(&ExperimentConfig { trials: 0, ..small() }).is_err());
    }

    #[test]
    fn quartiles() {
        let rows: Vec<ExperimentRow> = [4.0, 1.0, 3.0, 2.0, 5.0]
            .iter()
            .enumerate()
            .map(|(t, &e)| ExperimentRow { algorithm: Algorithm::Lela, m: 10, l: None, trial: t, spectral_err: Some(e), residual_err: None, wall_time: None, error: None })
            .collect();
        let s = summarize(&rows);
        assert_eq!((s[0].median, s[0].q1, s[0].q3), (Some(3.0), Some(2.0), Some(4.0)));
        let mut out = Vec::new();
        write_summary(&s, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "algorithm,m,l,median,q1,q3,ok,failed\nlela,10,,3,2,4,5,0\n");
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("svd".parse::<Algorithm>().is_err());
    }
}
