#![allow(dead_code)]

use lela::linalg::DenseMatrix;
use lela::rng::{normal, stream};

pub fn gaussian(n: usize, d: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream(seed, 0xfeed, 0);
    DenseMatrix::from_fn(n, d, |_, _| normal(&mut rng))
}

/// Rank-r Gaussian product plus optional i.i.d. noise of entry scale `eps`.
pub fn lowrank_plus_noise(n: usize, d: usize, r: usize, eps: f64, seed: u64) -> DenseMatrix {
    let u = gaussian(n, r, seed);
    let v = gaussian(d, r, seed ^ 0x9e37);
    let m = u.matmul(&v.transpose()).unwrap();
    if eps == 0.0 {
        return m;
    }
    m.add(&gaussian(n, d, seed ^ 0x51ab).scaled(eps)).unwrap()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
