//! Weighted alternating minimization over a sampled set Ω.
//!
//! Pipeline: optional split of Ω into `2T+1` parts, spectral
//! initialization of R_{Ω₀}(M) with row trimming, then `T` rounds of
//! weighted least squares alternating between V and U.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{LelaError, Result};
use crate::linalg::lsq::{accumulate, solve_normal_equations};
use crate::linalg::{qr_orthonormalize, topk_svd, DenseMatrix, Factorization, LsqOutcome, MatrixStats, DEFAULT_SVD_ITERS};
use crate::rng::{derive_seed, domain, stream};
use crate::sampling::SampleSet;

/// Multiplier of the trimming rule ‖(U⁰)ⁱ‖ ≥ 4‖Mⁱ‖/‖M‖_F.
pub const TRIM_FACTOR: f64 = 4.0;

/// Share of Ω held out when cross-validated stopping is on.
pub const HOLDOUT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Independent parts Ω₀ … Ω_{2T}, one per step.
    Fresh,
    /// The whole of Ω for initialization and every step.
    #[default]
    Reuse,
}

impl std::str::FromStr for SplitMode {
    type Err = LelaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh" => Ok(Self::Fresh),
            "reuse" => Ok(Self::Reuse),
            other => Err(LelaError::param(format!("unknown split mode {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaltMinConfig {
    pub rank: usize,
    pub iterations: usize,
    pub split_mode: SplitMode,
    pub init_svd_iters: usize,
    pub seed: u64,
    /// Hold out [`HOLDOUT_FRACTION`] of Ω and stop once the held-out
    /// weighted error rises two rounds in a row.
    pub cross_validate: bool,
}

impl WaltMinConfig {
    pub fn new(rank: usize, iterations: usize, seed: u64) -> Self {
        Self { rank, iterations, split_mode: SplitMode::Reuse, init_svd_iters: DEFAULT_SVD_ITERS, seed, cross_validate: false }
    }

    pub fn with_split(mut self, mode: SplitMode) -> Self {
        self.split_mode = mode;
        self
    }
}

/// Reference row scores ‖Mⁱ‖/‖M‖_F for the trimming rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimReference {
    pub row_scores: Vec<f64>,
}

impl TrimReference {
    pub fn from_stats(stats: &MatrixStats) -> Self {
        let f = stats.fro_norm();
        Self { row_scores: stats.row_sq_norms.iter().map(|r| r.sqrt() / f).collect() }
    }

    pub fn from_scores(row_scores: Vec<f64>) -> Self {
        Self { row_scores }
    }
}

impl From<&MatrixStats> for TrimReference {
    fn from(stats: &MatrixStats) -> Self {
        Self::from_stats(stats)
    }
}

/// Output of the spectral initialization.
#[derive(Debug, Clone)]
pub struct InitResult {
    /// Orthonormal n×r starting factor Û⁽⁰⁾.
    pub u0: DenseMatrix,
    pub trimmed_rows: Vec<usize>,
    pub sigma0: Vec<f64>,
}

/// Partition Ω into `parts` equal-sized, uniformly random subsets.
pub fn split_samples(s: &SampleSet, parts: usize, seed: u64) -> Result<Vec<SampleSet>> {
    if parts == 0 {
        return Err(LelaError::param("need at least one part"));
    }
    if s.is_empty() || parts > s.len() {
        return Err(LelaError::degenerate(format!("cannot split {} samples into {parts} nonempty parts", s.len())));
    }
    if parts == 1 {
        return Ok(vec![s.clone()]);
    }
    let len = s.len();
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut stream(seed, domain::SPLIT, 0));
    let mut assignment = vec![0usize; len];
    for k in 0..parts {
        for &p in &order[k * len / parts..(k + 1) * len / parts] {
            assignment[p] = k;
        }
    }
    Ok((0..parts).map(|k| s.filter(|p, _| assignment[p] == k)).collect())
}

/// Zero the rows of `u` whose norm reaches `TRIM_FACTOR · score`.
/// Returns the rows that were nonzero and got cleared.
pub fn trim_rows(u: &mut DenseMatrix, reference: &TrimReference) -> Vec<usize> {
    let (n, r) = u.shape();
    let mut trimmed = Vec::new();
    for i in 0..n {
        let norm = (0..r).map(|k| u.get(i, k).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 && norm >= TRIM_FACTOR * reference.row_scores[i] {
            for k in 0..r {
                u.set(i, k, 0.0);
            }
            trimmed.push(i);
        }
    }
    trimmed
}

/// Top-r left factor of R_{Ω₀}(M), trimmed, then orthonormalized.
pub fn initialize(s0: &SampleSet, reference: &TrimReference, r: usize, init_svd_iters: usize, seed: u64) -> Result<InitResult> {
    if s0.is_empty() {
        return Err(LelaError::degenerate("initialization needs at least one sample"));
    }
    if reference.row_scores.len() != s0.nrows() {
        return Err(LelaError::param("trim reference does not match the sample set's row count"));
    }
    let svd = topk_svd(s0, r, init_svd_iters, derive_seed(seed, domain::SVD_INIT, 0))?;
    let mut u = svd.u_star;
    let trimmed_rows = trim_rows(&mut u, reference);
    if u.data().iter().all(|x| *x == 0.0) {
        return Err(LelaError::degenerate("trimming removed every row of the initial factor"));
    }
    let u0 = qr_orthonormalize(&u)
        .map_err(|e| LelaError::degenerate(format!("trimmed initial factor lost rank: {e}")))?;
    Ok(InitResult { u0, trimmed_rows, sigma0: svd.sigma_star })
}

/// Which factor a half step solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve V with U fixed (one LS per column j).
    UpdateV,
    /// Solve U with V fixed (one LS per row i).
    UpdateU,
}

#[derive(Debug, Clone)]
pub struct HalfStep {
    pub factor: DenseMatrix,
    /// Rows of the updated factor with no samples (set to zero).
    pub unobserved: Vec<usize>,
    /// Rows of the updated factor solved through the pseudo-inverse.
    pub pseudo_solved: Vec<usize>,
}

/// One exact block-coordinate step of the weighted objective.
pub fn als_half_step(fixed: &DenseMatrix, s: &SampleSet, side: Side) -> HalfStep {
    let r = fixed.ncols();
    let fixed_rows = fixed.transpose();
    let (count, expected_fixed) = match side {
        Side::UpdateV => (s.ncols(), s.nrows()),
        Side::UpdateU => (s.nrows(), s.ncols()),
    };
    assert_eq!(fixed.nrows(), expected_fixed, "fixed factor does not match the sample set");
    let solved: Vec<(Vec<f64>, LsqOutcome)> = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut b = vec![0.0; r * r];
            let mut z = vec![0.0; r];
            let mut seen = false;
            match side {
                Side::UpdateV => {
                    for e in s.col(t) {
                        accumulate(&mut b, &mut z, e.weight, e.value, fixed_rows.col(e.i));
                        seen = true;
                    }
                }
                Side::UpdateU => {
                    for e in s.row(t) {
                        accumulate(&mut b, &mut z, e.weight, e.value, fixed_rows.col(e.j));
                        seen = true;
                    }
                }
            }
            if seen {
                solve_normal_equations(&b, &z, r)
            } else {
                (vec![0.0; r], LsqOutcome::Unobserved)
            }
        })
        .collect();
    let mut factor = DenseMatrix::zeros(count, r);
    let mut unobserved = Vec::new();
    let mut pseudo_solved = Vec::new();
    for (t, (x, outcome)) in solved.into_iter().enumerate() {
        for (k, v) in x.into_iter().enumerate() {
            factor.set(t, k, v);
        }
        match outcome {
            LsqOutcome::Unobserved => unobserved.push(t),
            LsqOutcome::PseudoSolved => pseudo_solved.push(t),
            LsqOutcome::Solved => {}
        }
    }
    HalfStep { factor, unobserved, pseudo_solved }
}

/// Σ_{(i,j)∈Ω} w_ij (M_ij − (U Vᵀ)_ij)².
pub fn objective(s: &SampleSet, f: &Factorization) -> f64 {
    s.entries().iter().map(|e| e.weight * (e.value - f.entry(e.i, e.j)).powi(2)).sum()
}

#[derive(Debug, Clone)]
pub struct WaltMinResult {
    pub factorization: Factorization,
    pub init: InitResult,
    /// Rows with no samples in the final U step.
    pub unobserved_rows: Vec<usize>,
    /// Columns with no samples in the final V step.
    pub unobserved_cols: Vec<usize>,
    /// Objective on the fitting set after every half step (V then U).
    pub objective_trace: Vec<f64>,
    pub rounds_run: usize,
    pub stopped_early: bool,
}

fn orthonormal_or_raw(x: &DenseMatrix) -> DenseMatrix {
    qr_orthonormalize(x).unwrap_or_else(|_| x.clone())
}

/// Run the full weighted alternating minimization.
pub fn waltmin(s: &SampleSet, reference: &TrimReference, cfg: &WaltMinConfig) -> Result<WaltMinResult> {
    let (n, d) = (s.nrows(), s.ncols());
    if cfg.rank == 0 || cfg.rank > n.min(d) {
        return Err(LelaError::param(format!("rank {} must lie in [1, {}]", cfg.rank, n.min(d))));
    }
    if cfg.iterations == 0 {
        return Err(LelaError::param("WAltMin needs at least one iteration"));
    }
    if s.is_empty() {
        return Err(LelaError::degenerate("empty sample set"));
    }

    let (train, holdout) = if cfg.cross_validate {
        let mut rng = stream(cfg.seed, domain::HOLDOUT, 0);
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.shuffle(&mut rng);
        let h = ((s.len() as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, s.len().saturating_sub(1).max(1));
        let mut held = vec![false; s.len()];
        for &p in &order[..h] {
            held[p] = true;
        }
        (s.filter(|p, _| !held[p]), Some(s.filter(|p, _| held[p])))
    } else {
        (s.clone(), None)
    };

    let t_rounds = cfg.iterations;
    let parts = match cfg.split_mode {
        SplitMode::Fresh => split_samples(&train, 2 * t_rounds + 1, derive_seed(cfg.seed, domain::SPLIT, 0))?,
        SplitMode::Reuse => vec![train.clone()],
    };
    let part = |k: usize| -> &SampleSet {
        match cfg.split_mode {
            SplitMode::Fresh => &parts[k],
            SplitMode::Reuse => &parts[0],
        }
    };

    let init = initialize(part(0), reference, cfg.rank, cfg.init_svd_iters, cfg.seed)?;
    let mut u_fixed = init.u0.clone();
    let mut trace = Vec::with_capacity(2 * t_rounds);
    let mut current = Factorization::zeros(n, d, cfg.rank);
    let mut unobserved_rows = Vec::new();
    let mut unobserved_cols = Vec::new();
    let mut best: Option<(f64, Factorization)> = None;
    let mut rises = 0;
    let mut last_holdout = f64::INFINITY;
    let mut rounds_run = 0;
    let mut stopped_early = false;

    for t in 0..t_rounds {
        let vstep = als_half_step(&u_fixed, part(2 * t + 1), Side::UpdateV);
        trace.push(objective(&train, &Factorization { u: u_fixed.clone(), v: vstep.factor.clone() }));
        let v = orthonormal_or_raw(&vstep.factor);
        let ustep = als_half_step(&v, part(2 * t + 2), Side::UpdateU);
        current = Factorization { u: ustep.factor, v };
        trace.push(objective(&train, &current));
        unobserved_cols = vstep.unobserved;
        unobserved_rows = ustep.unobserved;
        rounds_run = t + 1;

        if let Some(h) = &holdout {
            let err = objective(h, &current);
            if best.as_ref().is_none_or(|(b, _)| err < *b) {
                best = Some((err, current.clone()));
            }
            rises = if err > last_holdout { rises + 1 } else { 0 };
            last_holdout = err;
            if rises >= 2 {
                stopped_early = true;
                break;
            }
        }
        if t + 1 < t_rounds {
            u_fixed = orthonormal_or_raw(&current.u);
        }
    }
    let factorization = match (stopped_early, best) {
        (true, Some((_, f))) => f,
        _ => current,
    };
    Ok(WaltMinResult { factorization, init, unobserved_rows, unobserved_cols, objective_trace: trace, rounds_run, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{compute_stats, dense_svd};
    use crate::sampling::{build_plan, draw_bernoulli, Sample};
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream(seed, 0, 0);
        DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    fn full(m: &DenseMatrix) -> SampleSet {
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push(Sample { i, j, value: m.get(i, j), weight: 1.0 });
            }
        }
        SampleSet::from_entries(m.nrows(), m.ncols(), entries).unwrap()
    }

    #[test]
    fn split_partitions_exactly() {
        let m = random(10, 10, 1);
        let s = full(&m).filter(|p, _| p < 100);
        assert_eq!(split_samples(&s, 1, 3).unwrap()[0], s);
        let parts = split_samples(&s, 5, 3).unwrap();
        assert_eq!(parts.iter().map(SampleSet::len).sum::<usize>(), 100);
        assert!(parts.iter().all(|p| p.len() == 20));
        let mut all: Vec<(usize, usize)> = parts.iter().flat_map(|p| p.entries().iter().map(|e| (e.i, e.j))).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 100);
        assert!(matches!(split_samples(&s, 101, 3), Err(LelaError::Degenerate(_))));
    }

    #[test]
    fn rank_one_fully_observed_init() {
        let u: Vec<f64> = (0..12).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        let v: Vec<f64> = (0..9).map(|j| 1.0 + 0.1 * (j as f64).cos()).collect();
        let m = DenseMatrix::from_fn(12, 9, |i, j| u[i] * v[j]);
        let init = initialize(&full(&m), &TrimReference::from_stats(&compute_stats(&m)), 1, 50, 4).unwrap();
        assert!(init.trimmed_rows.is_empty());
        let un = crate::linalg::norm2(&u);
        let c: f64 = (0..12).map(|i| init.u0.get(i, 0) * u[i] / un).sum();
        assert!((c.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overweighted_light_row_is_trimmed() {
        // Row 0 has a tiny norm in M but its samples carry a huge weight,
        // so it dominates R_Ω(M) while 4‖M⁰‖/‖M‖_F stays small.
        let mut m = random(20, 15, 2);
        for j in 0..15 {
            m.set(0, j, 0.01 * m.get(0, j));
        }
        let stats = compute_stats(&m);
        let reference = TrimReference::from_stats(&stats);
        let s = full(&m);
        let entries: Vec<Sample> = s.entries().iter().map(|e| if e.i == 0 { Sample { weight: 1e5, ..*e } } else { *e }).collect();
        let s = SampleSet::from_entries(20, 15, entries).unwrap();
        let init = initialize(&s, &reference, 2, 100, 1).unwrap();
        // hand check of the rule for row 0
        let threshold = 4.0 * stats.row_sq_norms[0].sqrt() / stats.fro_sq.sqrt();
        assert!(threshold < 0.05);
        assert!(init.trimmed_rows.contains(&0));
        assert!((0..2).all(|k| init.u0.get(0, k).abs() < 1e-12));
    }

    #[test]
    fn trimming_is_idempotent() {
        let mut u = random(10, 2, 3);
        let reference = TrimReference::from_scores((0..10).map(|i| 0.05 * i as f64).collect());
        let first = trim_rows(&mut u, &reference);
        assert!(!first.is_empty());
        let snapshot = u.clone();
        assert!(trim_rows(&mut u, &reference).is_empty());
        assert_eq!(u, snapshot);
    }

    #[test]
    fn init_is_deterministic_and_orthonormal() {
        let m = random(30, 20, 5);
        let plan = build_plan(&m, 300).unwrap();
        let s = draw_bernoulli(&plan, &m, 1);
        let reference = TrimReference::from_stats(&plan.stats);
        let a = initialize(&s, &reference, 3, 50, 9).unwrap();
        let b = initialize(&s, &reference, 3, 50, 9).unwrap();
        assert_eq!(a.u0, b.u0);
        let g = a.u0.t_matmul(&a.u0).unwrap();
        assert!(g.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn rank_one_half_step_is_exact() {
        let u = DenseMatrix::new(4, 1, vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        let v = DenseMatrix::new(3, 1, vec![2.0, 0.0, 1.0]).unwrap();
        let m = u.matmul(&v.transpose()).unwrap();
        let un = u.fro_norm();
        let step = als_half_step(&u.scaled(1.0 / un), &full(&m), Side::UpdateV);
        for j in 0..3 {
            assert!((step.factor.get(j, 0) - un * v.get(j, 0)).abs() < 1e-12);
        }
        let zero = als_half_step(&DenseMatrix::zeros(4, 1), &full(&m), Side::UpdateV);
        assert!(zero.factor.data().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn half_steps_never_increase_objective() {
        let m = random(12, 10, 6);
        let plan = build_plan(&m, 60).unwrap();
        let s = draw_bernoulli(&plan, &m, 2);
        let res = waltmin(&s, &TrimReference::from_stats(&plan.stats), &WaltMinConfig::new(2, 6, 1)).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn full_data_matches_truncated_svd() {
        let m = random(30, 25, 7);
        let stats = compute_stats(&m);
        let res = waltmin(&full(&m), &TrimReference::from_stats(&stats), &WaltMinConfig::new(3, 3, 2)).unwrap();
        let svd = dense_svd(&m).unwrap();
        let best = svd.truncate(3).to_factorization();
        let diff = crate::linalg::Residual::new(&res.factorization, &best);
        let gap = crate::linalg::operator_norm(&diff, 1e-13, 1);
        assert!(gap <= 1e-6 * svd.sigma[0], "gap {gap}");
    }

    #[test]
    fn scaling_invariance() {
        let m = random(20, 16, 8);
        let plan = build_plan(&m, 150).unwrap();
        let s = draw_bernoulli(&plan, &m, 3);
        let reference = TrimReference::from_stats(&plan.stats);
        let cfg = WaltMinConfig::new(2, 5, 4);
        let a = waltmin(&s, &reference, &cfg).unwrap().factorization.to_dense();
        let b = waltmin(&s.map_values(|x| 3.5 * x), &reference, &cfg).unwrap().factorization.to_dense();
        assert!(b.sub(&a.scaled(3.5)).unwrap().max_abs() <= 1e-10 * b.max_abs());
    }

    #[test]
    fn rejects_bad_config() {
        let m = random(6, 5, 1);
        let s = full(&m);
        let reference = TrimReference::from_stats(&compute_stats(&m));
        assert!(matches!(waltmin(&s, &reference, &WaltMinConfig::new(2, 0, 1)), Err(LelaError::Parameter(_))));
        assert!(matches!(waltmin(&s, &reference, &WaltMinConfig::new(0, 2, 1)), Err(LelaError::Parameter(_))));
    }

    #[test]
    fn unobserved_rows_are_reported() {
        let m = random(8, 6, 2);
        let s = full(&m).filter(|_, e| e.i != 3);
        let res = waltmin(&s, &TrimReference::from_stats(&compute_stats(&m)), &WaltMinConfig::new(2, 2, 1)).unwrap();
        assert_eq!(res.unobserved_rows, vec![3]);
        assert_eq!(res.unobserved_rows, s.unobserved_rows());
        assert_eq!(res.factorization.rank(), 2);
    }

    #[test]
    fn fresh_mode_and_cross_validation_run() {
        let m = random(25, 20, 3);
        let plan = build_plan(&m, 400).unwrap();
        let s = draw_bernoulli(&plan, &m, 5);
        let reference = TrimReference::from_stats(&plan.stats);
        let res = waltmin(&s, &reference, &WaltMinConfig::new(2, 3, 1).with_split(SplitMode::Fresh)).unwrap();
        assert_eq!(res.rounds_run, 3);
        let mut cfg = WaltMinConfig::new(2, 8, 1);
        cfg.cross_validate = true;
        let res = waltmin(&s, &reference, &cfg).unwrap();
        assert!(res.rounds_run >= 1 && res.rounds_run <= 8);
    }
}
