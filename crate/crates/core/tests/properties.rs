use proptest::prelude::*;

use sumhess::cones::{eta, in_gamma, in_gamma_tilde};
use sumhess::solver::{discrete_hessian, GridDomain, ScalarField};
use sumhess::spectral::{eigen_sym, f_value, u_operator, FMode, SymMatrix};
use sumhess::symfun::{
    d2_sum_hessian, d_sum_hessian, delete, maclaurin_chain, s_m, sigma, sum_hessian, SumHessianParams,
};

fn params() -> impl Strategy<Value = (Vec<f64>, SumHessianParams)> {
    params_in(-2.0, 2.0)
}

/// Draws biased toward the positive orthant, where the cones live.
fn cone_params() -> impl Strategy<Value = (Vec<f64>, SumHessianParams)> {
    params_in(-1.0, 3.0)
}

fn params_in(lo: f64, hi: f64) -> impl Strategy<Value = (Vec<f64>, SumHessianParams)> {
    (2usize..=8)
        .prop_flat_map(move |n| {
            (
                proptest::collection::vec(lo..hi, n),
                1..=n,
                prop_oneof![Just(0.0), Just(0.5), Just(2.0)],
            )
        })
        .prop_map(|(l, k, a)| {
            let n = l.len();
            (l, SumHessianParams::new(n, k, a).unwrap())
        })
}

fn symmetric(n: usize) -> impl Strategy<Value = SymMatrix> {
    proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        SymMatrix::from_fn(n, |i, j| if i <= j { v[i * n + j] } else { v[j * n + i] }).unwrap()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn deleted_sum_identity((l, p) in params()) {
        let k = p.k_i64();
        let total: f64 = (0..p.n).map(|i| s_m(&delete(&l, &[i]).unwrap(), k, p.alpha)).sum();
        let want = (p.n as f64 - k as f64) * sum_hessian(&l, &p) + p.alpha * sigma(&l, k - 1);
        prop_assert!(close(total, want, 1e-10));
    }

    #[test]
    fn euler_identity((l, p) in params()) {
        let k = p.k_i64();
        let lhs: f64 = l.iter().zip(d_sum_hessian(&l, &p)).map(|(a, b)| a * b).sum();
        let want = k as f64 * sum_hessian(&l, &p) - p.alpha * sigma(&l, k - 1);
        prop_assert!(close(lhs, want, 1e-10));
    }

    #[test]
    fn eta_is_sigma1_minus_lambda(l in proptest::collection::vec(-3.0f64..3.0, 2..=8)) {
        let s1: f64 = l.iter().sum();
        for (e, x) in eta(&l).iter().zip(&l) {
            prop_assert_eq!(*e, s1 - x);
        }
    }

    #[test]
    fn tilde_cones_are_nested((l, p) in cone_params()) {
        prop_assume!(p.k >= 2 && in_gamma_tilde(&l, &p));
        let lower = SumHessianParams::new(p.n, p.k - 1, p.alpha).unwrap();
        prop_assert!(in_gamma_tilde(&l, &lower));
        prop_assert!(in_gamma(&l, p.k - 1));
    }

    #[test]
    fn tilde_cone_midpoints_stay_inside(
        (l, p) in cone_params(),
        m in proptest::collection::vec(-1.0f64..3.0, 8),
    ) {
        let m = &m[..p.n];
        prop_assume!(in_gamma_tilde(&l, &p) && in_gamma_tilde(m, &p));
        let mid: Vec<f64> = l.iter().zip(m).map(|(a, b)| 0.5 * (a + b)).collect();
        prop_assert!(in_gamma_tilde(&mid, &p));
    }

    #[test]
    fn shrinking_keeps_tilde_membership((l, p) in cone_params(), t in 0.05f64..1.0) {
        prop_assume!(in_gamma_tilde(&l, &p));
        let s: Vec<f64> = l.iter().map(|v| t * v).collect();
        prop_assert!(in_gamma_tilde(&s, &p));
    }

    #[test]
    fn maclaurin_chain_decreases(l in proptest::collection::vec(0.01f64..3.0, 2..=8)) {
        let c = maclaurin_chain(&l).unwrap();
        for w in c.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn concavity_bound_on_tilde_cone((l, p) in cone_params(), xi in proptest::collection::vec(-1.0f64..1.0, 8)) {
        prop_assume!(in_gamma_tilde(&l, &p));
        let n = p.n;
        let xi = &xi[..n];
        let h = d2_sum_hessian(&l, &p);
        let lhs: f64 = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| h[a * n + b] * xi[a] * xi[b]).sum();
        let g: f64 = d_sum_hessian(&l, &p).iter().zip(xi).map(|(a, b)| a * b).sum();
        let rhs = (1.0 - 1.0 / p.k as f64) * g * g / sum_hessian(&l, &p);
        prop_assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn eigen_reconstruction(m in (2usize..=8).prop_flat_map(symmetric)) {
        let dec = eigen_sym(&m).unwrap();
        let back = dec.compose(dec.values.values());
        for (a, b) in back.entries().iter().zip(m.entries()) {
            prop_assert!((a - b).abs() <= 1e-10 * m.frobenius().max(1.0));
        }
        for w in dec.values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn u_operator_spectrum_is_eta(m in (2usize..=8).prop_flat_map(symmetric)) {
        let lam = eigen_sym(&m).unwrap().values.into_vec();
        let mut want = eta(&lam);
        want.sort_by(|a, b| b.total_cmp(a));
        let got = eigen_sym(&u_operator(&m)).unwrap().values.into_vec();
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-10 * m.frobenius().max(1.0));
        }
    }

    #[test]
    fn f_is_frame_invariant(
        (m, q) in (2usize..=8).prop_flat_map(|n| (symmetric(n), symmetric(n))),
        k in 1usize..=8,
        alpha in 0.0f64..2.0,
    ) {
        let n = m.dim();
        let p = SumHessianParams::new(n, k.min(n), alpha).unwrap();
        let frame = eigen_sym(&q).unwrap().frame;
        let a = f_value(&m, &p, FMode::Raw).unwrap();
        let b = f_value(&m.congruence(&frame), &p, FMode::Raw).unwrap();
        prop_assert!(close(a, b, 1e-10));
    }

    #[test]
    fn discrete_hessian_is_exact_on_quadratics(c in proptest::collection::vec(-2.0f64..2.0, 6)) {
        let g = GridDomain::centered_box(3, 1.0, 8).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| {
            c[0] * x[0] * x[0] + c[1] * x[1] * x[1] + c[2] * x[2] * x[2] + c[3] * x[0] * x[1] + c[4] * x[1] * x[2] + c[5] * x[0] * x[2]
        });
        let h = discrete_hessian(&g, &f.values, g.nearest_to_center());
        let want = [2.0 * c[0], c[3], c[5], c[3], 2.0 * c[1], c[4], c[5], c[4], 2.0 * c[2]];
        for (a, b) in h.entries().iter().zip(want) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn field_text_round_trip(vals in proptest::collection::vec(-1e3f64..1e3, 81)) {
        let g = GridDomain::centered_box(2, 1.5, 8).unwrap();
        let f = ScalarField::new(g, vals).unwrap();
        let back = ScalarField::from_field_text(&f.to_field_text().unwrap()).unwrap();
        prop_assert_eq!(back.values, f.values);
        prop_assert_eq!(back.grid.lower(), f.grid.lower());
    }
}
