use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::linalg::DenseMatrix;
use crate::rng::{domain, stream};
use crate::sampling::{Sample, SampleSet, SamplingPlan};

/// Work performed by the multinomial sampler beyond its O(n + d) setup.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MultinomialCost {
    /// Abstract operation count: row draws, lazy table construction,
    /// within-row draws (binary search cost included) and deduplication.
    pub ops: u64,
    pub draws: usize,
    pub distinct: usize,
}

fn ilog2_ceil(x: usize) -> u64 {
    if x <= 1 {
        1
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as u64
    }
}

/// Column law used once a row has been drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WithinRowLaw {
    /// q_ij / Σ_j q_ij: a uniform part (from the row-norm term), the shared
    /// column-norm table and the row's own |M_ij|. Row draw times column draw
    /// is exactly q_ij / m.
    #[default]
    Exact,
    /// `½‖M_j‖²/‖M‖_F² + ½|M_ij|/‖M‖_{1,1}`, no uniform part. Starves
    /// low-norm columns on coherent inputs.
    Stated,
}

/// Fast sampler: `m` multinomial row draws, then with-replacement column
/// draws per row. Collisions collapse to one entry whose weight is the
/// Bernoulli 1/q̂_ij.
pub fn draw_multinomial(plan: &SamplingPlan, mat: &DenseMatrix, seed: u64) -> SampleSet {
    draw_multinomial_audited(plan, mat, seed).0
}

pub fn draw_multinomial_audited(plan: &SamplingPlan, mat: &DenseMatrix, seed: u64) -> (SampleSet, MultinomialCost) {
    draw_multinomial_with(plan, mat, WithinRowLaw::Exact, seed)
}

pub fn draw_multinomial_with(plan: &SamplingPlan, mat: &DenseMatrix, law: WithinRowLaw, seed: u64) -> (SampleSet, MultinomialCost) {
    let (n, d) = mat.shape();
    let stats = &plan.stats;
    let mut cost = MultinomialCost::default();

    // Setup, O(n + d): alias tables for the row marginal and for the
    // shared column-norm term of the within-row law.
    let rows = WeightedAliasIndex::new(plan.row_marginal.clone()).expect("row marginal is a valid distribution");
    let base = WeightedAliasIndex::new(stats.col_sq_norms.clone()).expect("column norms are not all zero");

    let mut counts = vec![0usize; n];
    let mut rng = stream(seed, domain::MULTINOMIAL_ROWS, 0);
    for _ in 0..plan.m {
        counts[rows.sample(&mut rng)] += 1;
        cost.ops += 1;
    }
    cost.draws = plan.m;

    let mut entries = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut cdf: Vec<f64> = Vec::new();
    for (i, &mi) in counts.iter().enumerate() {
        if mi == 0 {
            continue;
        }
        let mut rrng = stream(seed, domain::MULTINOMIAL_WITHIN, i as u64);
        let (nz_cols, nz_abs) = plan.row_nonzeros(i);
        cdf.clear();
        let mut acc = 0.0;
        for a in nz_abs {
            acc += a;
            cdf.push(acc);
        }
        cost.ops += nz_abs.len() as u64;
        // Component masses: uniform, column table, row nonzeros.
        let nd = (n + d) as f64;
        let (w_uni, w_col) = match law {
            WithinRowLaw::Exact => (d as f64 * stats.row_sq_norms[i] / (2.0 * nd * stats.fro_sq), 1.0 / (2.0 * nd)),
            WithinRowLaw::Stated => (0.0, 0.5),
        };
        let w_abs = 0.5 * stats.row_l1[i] / stats.l11;
        let total = w_uni + w_col + w_abs;
        let search = ilog2_ceil(nz_abs.len());

        cols.clear();
        for _ in 0..mi {
            let coin = rrng.random::<f64>() * total;
            if coin < w_uni {
                cols.push(rrng.random_range(0..d));
                cost.ops += 2;
            } else if coin < w_uni + w_col || nz_abs.is_empty() {
                cols.push(base.sample(&mut rrng));
                cost.ops += 2;
            } else {
                let u = rrng.random::<f64>() * acc;
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                cols.push(nz_cols[k] as usize);
                cost.ops += 2 + search;
            }
        }
        cols.sort_unstable();
        cols.dedup();
        cost.ops += mi as u64 * ilog2_ceil(mi);
        for &j in &cols {
            let value = mat.get(i, j);
            let qh = plan.q_hat(i, j, value);
            debug_assert!(qh > 0.0);
            entries.push(Sample { i, j, value, weight: 1.0 / qh });
        }
    }
    cost.distinct = entries.len();
    (SampleSet::from_sorted_unchecked(n, d, entries), cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::build_plan;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn chi_square_upper(x: f64, k: f64) -> f64 {
        1.0 - ChiSquared::new(k).unwrap().cdf(x)
    }

    /// Raw draws observed one at a time through a budget-1 plan so that
    /// collisions do not hide multiplicities.
    fn single_draw_counts(mat: &DenseMatrix, law: WithinRowLaw, draws: u64) -> Vec<f64> {
        let (n, d) = mat.shape();
        let single = build_plan(mat, 1).unwrap();
        let mut counts = vec![0.0; n * d];
        for k in 0..draws {
            let (set, _) = draw_multinomial_with(&single, mat, law, k);
            assert_eq!(set.len(), 1);
            let e = set.entries()[0];
            counts[e.i * d + e.j] += 1.0;
        }
        counts
    }

    fn chi_square_p(counts: &[f64], law: &[f64]) -> f64 {
        let draws: f64 = counts.iter().sum();
        let total: f64 = law.iter().sum();
        let support: Vec<usize> = (0..law.len()).filter(|&k| law[k] > 0.0).collect();
        let stat: f64 = support.iter().map(|&k| {
            let e = draws * law[k] / total;
            (counts[k] - e).powi(2) / e
        }).sum();
        chi_square_upper(stat, (support.len() - 1) as f64)
    }

    #[test]
    fn joint_draw_law_is_q_over_m() {
        let mut rng = stream(12, 0, 0);
        let mat = DenseMatrix::from_fn(4, 5, |i, j| if (i + 2 * j) % 4 == 0 { 0.0 } else { rng.random_range(-2.0..2.0) * (i + 1) as f64 });
        let plan = build_plan(&mat, 7).unwrap();
        let law: Vec<f64> = (0..4).flat_map(|i| (0..5).map(move |j| (i, j))).map(|(i, j)| plan.q(i, j, mat.get(i, j)) / 7.0).collect();
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let counts = single_draw_counts(&mat, WithinRowLaw::Exact, 10_000);
        let p = chi_square_p(&counts, &law);
        assert!(p > 0.001, "chi-square p = {p}");
    }

    #[test]
    fn single_row_stated_law() {
        let vals = [3.0, -1.0, 0.0, 2.0, 0.5, 1.5];
        let mat = DenseMatrix::new(1, 6, vals.to_vec()).unwrap();
        let plan = build_plan(&mat, 200).unwrap();
        let s = &plan.stats;
        let law: Vec<f64> = (0..6).map(|j| 0.5 * s.col_sq_norms[j] / s.fro_sq + 0.5 * vals[j].abs() / s.l11).collect();
        let counts = single_draw_counts(&mat, WithinRowLaw::Stated, 10_000);
        let p = chi_square_p(&counts, &law);
        assert!(p > 0.001, "chi-square p = {p}");
        assert_eq!(counts[2], 0.0);

        let set = draw_multinomial(&plan, &mat, 1);
        assert!(set.entries().iter().all(|e| e.i == 0));
    }

    #[test]
    fn exact_law_reaches_zero_columns() {
        // A column of zeros still carries the row-norm part of q.
        let mat = DenseMatrix::from_rows(&[&[1.0, 0.0, 2.0], &[3.0, 0.0, 1.0]]).unwrap();
        let counts = single_draw_counts(&mat, WithinRowLaw::Exact, 2000);
        assert!(counts[1] + counts[4] > 0.0);
        let counts = single_draw_counts(&mat, WithinRowLaw::Stated, 2000);
        assert_eq!(counts[1] + counts[4], 0.0);
    }

    #[test]
    fn saturated_weights_are_one() {
        let mut rng = stream(8, 0, 0);
        let mat = DenseMatrix::from_fn(8, 6, |_, _| rng.random_range(0.5..1.0));
        let plan = build_plan(&mat, 100_000).unwrap();
        let set = draw_multinomial(&plan, &mat, 2);
        assert!(set.entries().iter().all(|e| e.weight == 1.0));
    }

    #[test]
    fn no_duplicates_and_in_range() {
        let mut rng = stream(9, 0, 0);
        let mat = DenseMatrix::from_fn(30, 20, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-1.0..1.0) });
        let plan = build_plan(&mat, 400).unwrap();
        let (set, cost) = draw_multinomial_audited(&plan, &mat, 4);
        let rebuilt = SampleSet::from_entries(30, 20, set.entries().to_vec()).unwrap();
        assert_eq!(rebuilt, set);
        assert_eq!(cost.draws, 400);
        assert_eq!(cost.distinct, set.len());
        assert!(set.len() <= 400);
        assert_eq!(draw_multinomial(&plan, &mat, 4), set);
    }
}
