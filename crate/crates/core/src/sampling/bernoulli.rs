use rand::Rng;
use rayon::prelude::*;

use crate::linalg::DenseMatrix;
use crate::rng::{domain, stream};
use crate::sampling::{Sample, SampleSet, SamplingPlan};

/// Independent Bernoulli coins for row `i` on the row's own stream.
/// `cell(j)` returns `(q̂_ij, M_ij)`.
pub(crate) fn bernoulli_row(i: usize, d: usize, seed: u64, dom: u64, mut cell: impl FnMut(usize) -> (f64, f64)) -> Vec<Sample> {
    let mut rng = stream(seed, dom, i as u64);
    let mut out = Vec::new();
    for j in 0..d {
        let u: f64 = rng.random();
        let (qh, value) = cell(j);
        if qh > 0.0 && u < qh {
            out.push(Sample { i, j, value, weight: 1.0 / qh });
        }
    }
    out
}

/// Exact reference sampler: every cell is kept independently with
/// probability q̂_ij. O(n·d).
pub fn draw_bernoulli(plan: &SamplingPlan, mat: &DenseMatrix, seed: u64) -> SampleSet {
    let (n, d) = mat.shape();
    let rows: Vec<Vec<Sample>> = (0..n)
        .into_par_iter()
        .map(|i| {
            bernoulli_row(i, d, seed, domain::BERNOULLI_ROW, |j| {
                let x = mat.get(i, j);
                (plan.q_hat(i, j, x), x)
            })
        })
        .collect();
    SampleSet::from_sorted_unchecked(n, d, rows.into_iter().flatten().collect())
}
