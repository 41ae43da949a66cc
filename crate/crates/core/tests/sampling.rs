mod common;

use std::collections::HashSet;

use lela::linalg::io::{read_matrix_market, write_matrix_market_array, write_matrix_market_coordinate};
use lela::linalg::DenseMatrix;
use lela::sampling::{build_plan, draw_bernoulli, draw_multinomial, SampleSet};
use proptest::prelude::*;

#[test]
fn reweighted_reconstruction_is_unbiased() {
    let n = 15;
    let mat = common::lowrank_plus_noise(n, n, 2, 0.3, 5);
    let plan = build_plan(&mat, 60).unwrap();
    let draws = 2000usize;
    let mut sum = vec![0.0; n * n];
    let mut sum_sq = vec![0.0; n * n];
    for t in 0..draws {
        let s = draw_bernoulli(&plan, &mat, t as u64);
        for e in s.entries() {
            let x = e.value * e.weight;
            sum[e.i * n + e.j] += x;
            sum_sq[e.i * n + e.j] += x * x;
        }
    }
    let (mut worst_dev, mut worst_se) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let mean = sum[i * n + j] / draws as f64;
            let var = sum_sq[i * n + j] / draws as f64 - mean * mean;
            worst_se = worst_se.max((var.max(0.0) / draws as f64).sqrt());
            worst_dev = worst_dev.max((mean - mat.get(i, j)).abs());
        }
    }
    assert!(worst_dev <= 5.0 * worst_se, "deviation {worst_dev} vs stderr {worst_se}");
}

#[test]
fn sample_file_round_trip() {
    let mat = common::gaussian(12, 9, 3);
    let plan = build_plan(&mat, 40).unwrap();
    let s = draw_multinomial(&plan, &mat, 17);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("omega.txt");
    s.write(&path).unwrap();
    assert_eq!(SampleSet::read(&path).unwrap(), s);
}

#[test]
fn matrix_market_round_trips() {
    let mat = DenseMatrix::from_fn(7, 5, |i, j| if (i + j) % 3 == 0 { 0.0 } else { (i as f64 - 2.5) * 0.1 + j as f64 });
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mtx");
    let c = dir.path().join("c.mtx");
    write_matrix_market_array(&a, &mat).unwrap();
    write_matrix_market_coordinate(&c, &mat).unwrap();
    assert_eq!(read_matrix_market(&a).unwrap(), mat);
    assert_eq!(read_matrix_market(&c).unwrap(), mat);
}

#[test]
fn truncated_sample_file_is_rejected() {
    let text = "%lela-samples 3 3 2\n0 0 1e0 1e0\n";
    assert!(SampleSet::from_text(text).is_err());
}

fn small_matrix() -> impl Strategy<Value = DenseMatrix> {
    (2usize..12, 2usize..12).prop_flat_map(|(n, d)| {
        proptest::collection::vec(prop_oneof![Just(0.0), -3.0..3.0f64], n * d)
            .prop_filter("needs a nonzero", |v| v.iter().any(|&x| x != 0.0))
            .prop_map(move |v| DenseMatrix::new(n, d, v).unwrap())
    })
}

proptest! {
    #[test]
    fn clipped_mass_never_exceeds_budget(mat in small_matrix(), m in 1usize..200) {
        let plan = build_plan(&mat, m).unwrap();
        let (n, d) = mat.shape();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..d {
                let q = plan.q_hat(i, j, mat.get(i, j));
                // Only a cell whose whole row and column vanish gets no mass.
                let isolated = plan.stats.row_sq_norms[i] == 0.0 && plan.stats.col_sq_norms[j] == 0.0;
                let ok = if isolated { q == 0.0 } else { q > 0.0 && q <= 1.0 };
                prop_assert!(ok, "q_hat({}, {}) = {}", i, j, q);
                total += q;
            }
        }
        prop_assert!(total <= m as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn multinomial_entries_unique_and_in_range(mat in small_matrix(), m in 1usize..300, seed in any::<u64>()) {
        let plan = build_plan(&mat, m).unwrap();
        let s = draw_multinomial(&plan, &mat, seed);
        let (n, d) = mat.shape();
        let mut seen = HashSet::new();
        for e in s.entries() {
            prop_assert!(e.i < n && e.j < d);
            prop_assert!(seen.insert((e.i, e.j)));
            prop_assert_eq!(e.value, mat.get(e.i, e.j));
            prop_assert!((e.weight * plan.q_hat(e.i, e.j, e.value) - 1.0).abs() < 1e-12);
        }
        prop_assert!(s.len() <= m);
    }

    #[test]
    fn text_form_round_trips(mat in small_matrix(), m in 1usize..100, seed in any::<u64>()) {
        let plan = build_plan(&mat, m).unwrap();
        let s = draw_bernoulli(&plan, &mat, seed);
        prop_assert_eq!(SampleSet::from_text(&s.to_text()).unwrap(), s);
    }
}
