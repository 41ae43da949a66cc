use rayon::prelude::*;

use crate::error::{LelaError, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::rng::domain;
use crate::sampling::{bernoulli_row, Sample, SampleSet};

/// Sampling distribution over the cells of `A·B` built from the row
/// norms of `A` and the column norms of `B` only.
#[derive(Debug, Clone)]
pub struct ProductSamplingPlan {
    pub m: usize,
    pub row_sq_norms_a: Vec<f64>,
    pub col_sq_norms_b: Vec<f64>,
    pub fro_sq_a: f64,
    pub fro_sq_b: f64,
}

impl ProductSamplingPlan {
    pub fn nrows(&self) -> usize {
        self.row_sq_norms_a.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_sq_norms_b.len()
    }

    /// `m·(‖Aⁱ‖²/(n₂‖A‖_F²) + ‖B_j‖²/(n₁‖B‖_F²))`.
    #[inline]
    pub fn q(&self, i: usize, j: usize) -> f64 {
        let (n1, n2) = (self.nrows() as f64, self.ncols() as f64);
        self.m as f64 * (self.row_sq_norms_a[i] / (n2 * self.fro_sq_a) + self.col_sq_norms_b[j] / (n1 * self.fro_sq_b))
    }

    #[inline]
    pub fn q_hat(&self, i: usize, j: usize) -> f64 {
        self.q(i, j).min(1.0)
    }

    /// Normalized row scores ‖Aⁱ‖/‖A‖_F used as trimming reference.
    pub fn row_scores(&self) -> Vec<f64> {
        let f = self.fro_sq_a.sqrt();
        self.row_sq_norms_a.iter().map(|r| r.sqrt() / f).collect()
    }
}

pub fn build_product_plan(a: &DenseMatrix, b: &DenseMatrix, m: usize) -> Result<ProductSamplingPlan> {
    if a.ncols() != b.nrows() {
        return Err(LelaError::param(format!(
            "inner dimensions differ: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if m == 0 {
        return Err(LelaError::param("sample budget m must be at least 1"));
    }
    let mut row_sq_norms_a = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        for (r, x) in row_sq_norms_a.iter_mut().zip(a.col(j)) {
            *r += x * x;
        }
    }
    let col_sq_norms_b: Vec<f64> = (0..b.ncols()).map(|j| dot(b.col(j), b.col(j))).collect();
    let fro_sq_a: f64 = row_sq_norms_a.iter().sum();
    let fro_sq_b: f64 = col_sq_norms_b.iter().sum();
    if !(fro_sq_a > 0.0) {
        return Err(LelaError::degenerate("A is the zero matrix"));
    }
    if !(fro_sq_b > 0.0) {
        return Err(LelaError::degenerate("B is the zero matrix"));
    }
    Ok(ProductSamplingPlan { m, row_sq_norms_a, col_sq_norms_b, fro_sq_a, fro_sq_b })
}

/// Draw Ω over the cells of `A·B` and compute exactly those entries,
/// one length-`d` dot product each.
pub fn materialize_product_samples(a: &DenseMatrix, b: &DenseMatrix, plan: &ProductSamplingPlan, seed: u64) -> SampleSet {
    let (n1, n2) = (plan.nrows(), plan.ncols());
    assert_eq!((a.nrows(), b.ncols()), (n1, n2), "plan was built for different matrices");
    let at = a.transpose();
    let rows: Vec<Vec<Sample>> = (0..n1)
        .into_par_iter()
        .map(|i| {
            let mut cells = bernoulli_row(i, n2, seed, domain::PRODUCT_ROW, |j| (plan.q_hat(i, j), 0.0));
            let arow = at.col(i);
            for c in &mut cells {
                c.value = dot(arow, b.col(c.j));
            }
            cells
        })
        .collect();
    SampleSet::from_sorted_unchecked(n1, n2, rows.into_iter().flatten().collect())
}
