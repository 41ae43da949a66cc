//! Small weighted least-squares solves, one per row or column of a factor.

/// Eigenvalues below `PSEUDO_SOLVE_RTOL * trace(B) / r` are dropped.
pub const PSEUDO_SOLVE_RTOL: f64 = 1e-10;

/// One observation `(w, y, g)` of the weighted problem
/// `min_x Σ w (y - gᵀx)²`.
#[derive(Debug, Clone, Copy)]
pub struct LsqTarget<'a> {
    pub weight: f64,
    pub response: f64,
    pub regressor: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsqOutcome {
    /// `B` well conditioned; plain Cholesky solve.
    Solved,
    /// `B` singular to working precision; minimum-norm thresholded solve.
    PseudoSolved,
    /// No targets; zero vector returned.
    Unobserved,
}

/// Solve the `r x r` normal equations `B x = z` with
/// `B = Σ w g gᵀ`, `z = Σ w y g`.
pub fn solve_weighted_row_ls(targets: &[LsqTarget<'_>], r: usize) -> (Vec<f64>, LsqOutcome) {
    if targets.is_empty() {
        return (vec![0.0; r], LsqOutcome::Unobserved);
    }
    let mut b = vec![0.0; r * r];
    let mut z = vec![0.0; r];
    for t in targets {
        debug_assert_eq!(t.regressor.len(), r);
        accumulate(&mut b, &mut z, t.weight, t.response, t.regressor);
    }
    solve_normal_equations(&b, &z, r)
}

/// `B += w g gᵀ` (upper and lower), `z += w y g`.
#[inline]
pub(crate) fn accumulate(b: &mut [f64], z: &mut [f64], w: f64, y: f64, g: &[f64]) {
    let r = g.len();
    for p in 0..r {
        let wg = w * g[p];
        z[p] += wg * y;
        let row = &mut b[p * r..(p + 1) * r];
        for (q, bq) in row.iter_mut().enumerate() {
            *bq += wg * g[q];
        }
    }
}

/// Solve `B x = z` for a symmetric PSD `B` stored dense row-major.
pub(crate) fn solve_normal_equations(b: &[f64], z: &[f64], r: usize) -> (Vec<f64>, LsqOutcome) {
    let trace: f64 = (0..r).map(|k| b[k * r + k]).sum();
    if trace <= 0.0 || !trace.is_finite() {
        return (vec![0.0; r], LsqOutcome::PseudoSolved);
    }
    let threshold = PSEUDO_SOLVE_RTOL * trace / r as f64;
    if let Some(l) = cholesky(b, r) {
        // λ_min(B) ≥ 1 / trace(B⁻¹); if that bound clears the threshold no
        // eigenvalue would be dropped and the Cholesky solution is exact.
        if 1.0 / inverse_trace(&l, r) > threshold {
            return (cholesky_solve(&l, z, r), LsqOutcome::Solved);
        }
    }
    (pseudo_solve(b, z, r, threshold), LsqOutcome::PseudoSolved)
}

fn cholesky(b: &[f64], r: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..=i {
            let mut s = b[i * r + j];
            for k in 0..j {
                s -= l[i * r + k] * l[j * r + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * r + i] = s.sqrt();
            } else {
                l[i * r + j] = s / l[j * r + j];
            }
        }
    }
    Some(l)
}

fn forward(l: &[f64], rhs: &mut [f64], r: usize) {
    for i in 0..r {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * r + k] * rhs[k];
        }
        rhs[i] = s / l[i * r + i];
    }
}

fn cholesky_solve(l: &[f64], z: &[f64], r: usize) -> Vec<f64> {
    let mut x = z.to_vec();
    forward(l, &mut x, r);
    for i in (0..r).rev() {
        let mut s = x[i];
        for k in i + 1..r {
            s -= l[k * r + i] * x[k];
        }
        x[i] = s / l[i * r + i];
    }
    x
}

/// trace(B⁻¹) = ‖L⁻¹‖_F².
fn inverse_trace(l: &[f64], r: usize) -> f64 {
    let mut total = 0.0;
    let mut e = vec![0.0; r];
    for c in 0..r {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[c] = 1.0;
        forward(l, &mut e, r);
        total += e.iter().map(|x| x * x).sum::<f64>();
    }
    total
}

fn pseudo_solve(b: &[f64], z: &[f64], r: usize, threshold: f64) -> Vec<f64> {
    let (vals, vecs) = symmetric_eigen(b, r);
    let mut x = vec![0.0; r];
    for k in 0..r {
        if vals[k] > threshold {
            let col = &vecs[k * r..(k + 1) * r];
            let coef = col.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / vals[k];
            x.iter_mut().zip(col).for_each(|(xi, ci)| *xi += coef * ci);
        }
    }
    x
}

/// Cyclic Jacobi eigensolver for a small symmetric matrix (row-major).
/// Returns eigenvalues and eigenvectors stored one per `r`-chunk.
pub(crate) fn symmetric_eigen(b: &[f64], r: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = b.to_vec();
    let mut v = vec![0.0; r * r];
    for k in 0..r {
        v[k * r + k] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..r)
            .flat_map(|i| (0..r).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * r + j] * a[i * r + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || scale == 0.0 {
            break;
        }
        for p in 0..r {
            for q in p + 1..r {
                let apq = a[p * r + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * r + q] - a[p * r + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..r {
                    let akp = a[k * r + p];
                    let akq = a[k * r + q];
                    a[k * r + p] = c * akp - s * akq;
                    a[k * r + q] = s * akp + c * akq;
                }
                for k in 0..r {
                    let apk = a[p * r + k];
                    let aqk = a[q * r + k];
                    a[p * r + k] = c * apk - s * aqk;
                    a[q * r + k] = s * apk + c * aqk;
                }
                // eigenvectors stored as columns of v (row-major v[k*r + col])
                for k in 0..r {
                    let vkp = v[k * r + p];
                    let vkq = v[k * r + q];
                    v[k * r + p] = c * vkp - s * vkq;
                    v[k * r + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..r).map(|k| a[k * r + k]).collect();
    let mut vecs = vec![0.0; r * r];
    for k in 0..r {
        for i in 0..r {
            vecs[k * r + i] = v[i * r + k];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(w: f64, y: f64, g: &[f64]) -> LsqTarget<'_> {
        LsqTarget { weight: w, response: y, regressor: g }
    }

    #[test]
    fn single_target_interpolates() {
        let g = [1.0];
        let (x, st) = solve_weighted_row_ls(&[t(1.0, 5.0, &g)], 1);
        assert_eq!(st, LsqOutcome::Solved);
        assert!((x[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_regressors() {
        let (g1, g2) = ([1.0, 0.0], [0.0, 1.0]);
        let (x, _) = solve_weighted_row_ls(&[t(1.0, 1.0, &g1), t(1.0, 2.0, &g2)], 2);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn six_targets_match_closed_form_inverse() {
        let data = [
            (1.5, 0.3, [0.2, -1.0]),
            (2.0, -1.1, [1.3, 0.4]),
            (0.7, 2.2, [-0.5, 0.9]),
            (3.1, 0.0, [0.8, 0.8]),
            (1.0, 1.7, [-1.2, 0.1]),
            (4.4, -0.6, [0.05, -0.7]),
        ];
        let targets: Vec<_> = data.iter().map(|(w, y, g)| t(*w, *y, g)).collect();
        let (x, st) = solve_weighted_row_ls(&targets, 2);
        assert_eq!(st, LsqOutcome::Solved);
        let (mut a, mut b, mut c, mut z0, mut z1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (w, y, g) in &data {
            a += w * g[0] * g[0];
            b += w * g[0] * g[1];
            c += w * g[1] * g[1];
            z0 += w * y * g[0];
            z1 += w * y * g[1];
        }
        let det = a * c - b * b;
        let want = [(c * z0 - b * z1) / det, (a * z1 - b * z0) / det];
        assert!((x[0] - want[0]).abs() < 1e-10 && (x[1] - want[1]).abs() < 1e-10);
    }

    #[test]
    fn empty_targets_flag_unobserved() {
        let (x, st) = solve_weighted_row_ls(&[], 3);
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(st, LsqOutcome::Unobserved);
    }

    #[test]
    fn singular_system_gets_min_norm_solution() {
        // one sample, r = 2: B = g gᵀ is rank one
        let g = [3.0, 4.0];
        let (x, st) = solve_weighted_row_ls(&[t(2.0, 10.0, &g)], 2);
        assert_eq!(st, LsqOutcome::PseudoSolved);
        // minimum-norm solution is y g / ‖g‖²
        assert!((x[0] - 10.0 * 3.0 / 25.0).abs() < 1e-12);
        assert!((x[1] - 10.0 * 4.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let b = [4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 1.0];
        let (vals, vecs) = symmetric_eigen(&b, 3);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| vals[k] * vecs[k * 3 + i] * vecs[k * 3 + j]).sum();
                assert!((s - b[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn stationarity_residual_is_small(
            r in 1usize..5,
            rows in proptest::collection::vec((0.1f64..10.0, -5.0f64..5.0, proptest::collection::vec(-3.0f64..3.0, 4)), 1..12)
        ) {
            let targets: Vec<_> = rows.iter().map(|(w, y, g)| t(*w, *y, &g[..r])).collect();
            let (x, _) = solve_weighted_row_ls(&targets, r);
            let mut b = vec![0.0; r * r];
            let mut z = vec![0.0; r];
            for tg in &targets {
                accumulate(&mut b, &mut z, tg.weight, tg.response, tg.regressor);
            }
            let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let znorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res: f64 = (0..r)
                .map(|p| {
                    let bx: f64 = (0..r).map(|q| b[p * r + q] * x[q]).sum();
                    (bx - z[p]).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            prop_assert!(res <= 1e-9 * (bnorm * xnorm + znorm) + 1e-300, "res {res}");
        }
    }
}
