mod common;

use lela::distpca::{centralized_reference, run_distpca, DistConfig, PartitionPolicy};
use lela::linalg::{qr_orthonormalize, DenseMatrix, LinearOperator, Product, Residual};
use lela::sampling::{build_plan, draw_bernoulli};
use lela::waltmin::{objective, waltmin, TrimReference, WaltMinConfig};
use proptest::prelude::*;

fn policy() -> impl Strategy<Value = PartitionPolicy> {
    prop_oneof![Just(PartitionPolicy::Contiguous), Just(PartitionPolicy::RoundRobin), Just(PartitionPolicy::SeededRandom)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reuse_objective_never_rises(n in 8usize..40, d in 6usize..30, r in 1usize..4, mult in 2usize..10, seed in any::<u64>()) {
        prop_assume!(r < n.min(d));
        let mat = common::lowrank_plus_noise(n, d, r, 0.1, seed);
        let plan = build_plan(&mat, mult * (n + d) * r).unwrap();
        let s = draw_bernoulli(&plan, &mat, seed);
        prop_assume!(!s.is_empty());
        let res = waltmin(&s, &TrimReference::from_stats(&plan.stats), &WaltMinConfig::new(r, 5, seed)).unwrap();
        let scale: f64 = s.entries().iter().map(|e| e.weight * e.value * e.value).sum();
        for w in res.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * scale, "{} -> {}", w[0], w[1]);
        }
        let last = *res.objective_trace.last().unwrap();
        prop_assert!((objective(&s, &res.factorization) - last).abs() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn distributed_matches_centralized(n in 20usize..70, d in 5usize..15, servers in 1usize..6, pol in policy(), seed in any::<u64>()) {
        let mat = common::lowrank_plus_noise(n, d, 2, 0.05, seed);
        let mut cfg = DistConfig::new(servers, 2, 15 * n, 3, seed);
        cfg.policy = pol;
        let out = run_distpca(&mat, &cfg).unwrap();
        let reference = centralized_reference(&mat, &cfg).unwrap();
        let gap = out.factorization.u.sub(&reference.u).unwrap().max_abs()
            .max(out.factorization.v.sub(&reference.v).unwrap().max_abs());
        prop_assert!(gap <= 1e-10, "gap {gap}");
        prop_assert!(out.ledger.verify_totals());
    }

    #[test]
    fn implicit_operators_match_dense(n in 2usize..12, k in 1usize..6, d in 2usize..12, seed in any::<u64>()) {
        let a = common::gaussian(n, k, seed);
        let b = common::gaussian(k, d, seed ^ 1);
        let c = common::gaussian(n, d, seed ^ 2);
        let ab = a.matmul(&b).unwrap();
        let want = c.sub(&ab).unwrap();
        let x = common::gaussian(d, 1, seed ^ 3);
        let y = common::gaussian(n, 1, seed ^ 4);
        let p = Product::new(&a, &b);
        let res = Residual::new(&c, &p);
        let (mut got, mut got_t) = (vec![0.0; n], vec![0.0; d]);
        res.apply(x.col(0), &mut got);
        res.apply_t(y.col(0), &mut got_t);
        let dense = want.matmul(&x).unwrap();
        let dense_t = want.t_matmul(&y).unwrap();
        for i in 0..n {
            prop_assert!((got[i] - dense.get(i, 0)).abs() <= 1e-10 * (1.0 + dense.get(i, 0).abs()));
        }
        for j in 0..d {
            prop_assert!((got_t[j] - dense_t.get(j, 0)).abs() <= 1e-10 * (1.0 + dense_t.get(j, 0).abs()));
        }
    }

    #[test]
    fn qr_is_orthonormal_and_spans(n in 3usize..30, k in 1usize..5, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let x = common::gaussian(n, k, seed);
        let q = qr_orthonormalize(&x).unwrap();
        let gram = q.t_matmul(&q).unwrap();
        prop_assert!(gram.sub(&DenseMatrix::identity(k)).unwrap().max_abs() <= 1e-12);
        // x lies in span(q): x - q qᵀ x vanishes.
        let resid = x.sub(&q.matmul(&q.t_matmul(&x).unwrap()).unwrap()).unwrap();
        prop_assert!(resid.max_abs() <= 1e-10 * x.max_abs());
    }
}
