use mimo_clt::equivalents::eta_from_fixed_point;
use mimo_clt::fixed_point::check_a_priori;
use mimo_clt::montecarlo::{gram, trial_rng, GramSpectrum};
use mimo_clt::resolvent::resolvent_check;
use mimo_clt::*;
use proptest::prelude::*;

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..=2.0, len)
}

prop_compose! {
    fn profile(max_dim: usize)(big_n in 1..=max_dim, n in 1..=max_dim)
        (d in entries(big_n), dt in entries(n)) -> ValidatedProfile {
        VarianceProfile::new(d, dt).validate().unwrap()
    }
}

fn kind() -> impl Strategy<Value = ProfileKind> {
    prop_oneof![
        (0.01f64..5.0).prop_map(|value| ProfileKind::Constant { value }),
        (0.0f64..2.0, 0.01f64..2.0).prop_map(|(lo, w)| ProfileKind::LinearRamp { lo, hi: lo + w }),
        (0.05f64..1.5).prop_map(|base| ProfileKind::ExponentialDecay { base }),
    ]
}

fn trace_closed_form(kind: ProfileKind, len: usize, n: usize) -> f64 {
    let len_f = len as f64;
    let sum = match kind {
        ProfileKind::Constant { value } => value * len_f,
        ProfileKind::LinearRamp { lo, hi } if len > 1 => (lo + hi) / 2.0 * len_f,
        ProfileKind::LinearRamp { lo, .. } => lo,
        ProfileKind::ExponentialDecay { base: 1.0 } => len_f,
        ProfileKind::ExponentialDecay { base } => (1.0 - base.powi(len as i32)) / (1.0 - base),
    };
    sum / n as f64
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_profiles_validate_with_closed_form_traces(
        kind in kind(), big_n in 1usize..200, n in 1usize..200,
    ) {
        let p = generate(kind, big_n, n).unwrap().validate().unwrap();
        prop_assert!(close(p.normalized_trace_d(), trace_closed_form(kind, big_n, n), 1e-12));
        prop_assert!(close(p.normalized_trace_d_tilde(), trace_closed_form(kind, n, n), 1e-12));
    }

    #[test]
    fn profile_json_round_trip(p in profile(12), t in 0.1f64..5.0) {
        let text = p.profile().to_json_string().unwrap();
        let back = VarianceProfile::from_json_str(&text).unwrap().validate().unwrap();
        prop_assert_eq!(back.profile(), p.profile());
        let a = solve(&p, t, DEFAULT_TOL).unwrap();
        let b = solve(&back, t, DEFAULT_TOL).unwrap();
        prop_assert_eq!(a.delta, b.delta);
    }

    #[test]
    fn root_does_not_depend_on_bracket(
        p in profile(16), t in 0.01f64..10.0, lo in 1e-6f64..10.0, w in 1e-6f64..50.0,
    ) {
        let tol = DEFAULT_TOL;
        let a = solve(&p, t, tol).unwrap();
        let b = solve_bracketed(&p, t, lo, lo + w, tol).unwrap();
        prop_assert!((a.delta - b.delta).abs() <= 10.0 * tol * (1.0 + a.delta));
        prop_assert!((a.delta_tilde - b.delta_tilde).abs() <= 10.0 * tol * (1.0 + a.delta_tilde));
    }

    #[test]
    fn solutions_decrease_along_a_path(p in profile(16), steps in prop::collection::vec(0.01f64..1.0, 2..12)) {
        let grid: Vec<f64> = steps
            .iter()
            .scan(0.0, |acc, s| { *acc += s; Some(*acc) })
            .collect();
        let path = solve_path(&p, &grid, DEFAULT_TOL).unwrap();
        for w in path.windows(2) {
            prop_assert!(w[1].delta < w[0].delta);
            prop_assert!(w[1].delta_tilde < w[0].delta_tilde);
            // t·δ grows: the effective SNR still increases.
            prop_assert!(w[1].t * w[1].delta > w[0].t * w[0].delta);
        }
    }

    #[test]
    fn solution_satisfies_bounds_and_trace_identities(p in profile(24), t in 0.01f64..10.0) {
        let fp = solve(&p, t, DEFAULT_TOL).unwrap();
        prop_assert!(fp.delta > 0.0 && fp.delta_tilde > 0.0);
        let g = fp.one_minus_t2gg();
        prop_assert!(g > 0.0 && g < 1.0);
        check_a_priori(&p, &fp).unwrap();
        let dt2 = fp.moment(&p, Side::Receive, 1, 2);
        prop_assert!((dt2 - (fp.delta - t * fp.delta_tilde * fp.gamma)).abs() < 1e-10);
        let dtt2 = fp.moment(&p, Side::Transmit, 1, 2);
        prop_assert!((dtt2 - (fp.delta_tilde - t * fp.delta * fp.gamma_tilde)).abs() < 1e-10);
    }

    #[test]
    fn derivatives_match_finite_differences(p in profile(12), t in 0.2f64..6.0) {
        let h = 1e-4 * t;
        let fp = solve(&p, t, 1e-14).unwrap();
        let up = solve(&p, t + h, 1e-14).unwrap();
        let down = solve(&p, t - h, 1e-14).unwrap();
        let fd = |f: fn(&FixedPoint) -> f64| (f(&up) - f(&down)) / (2.0 * h);
        let scale = |x: f64| 1e-6 * (1.0 + x.abs());
        let d = fp.delta_derivative();
        prop_assert!((fd(|f| f.delta) - d).abs() < scale(d), "{} vs {}", fd(|f| f.delta), d);
        let d = fp.delta_tilde_derivative();
        prop_assert!((fd(|f| f.delta_tilde) - d).abs() < scale(d));
        let d = fp.gamma_derivative(&p);
        prop_assert!((fd(|f| f.gamma) - d).abs() < scale(d));
        let d = fp.gamma_tilde_derivative(&p);
        prop_assert!((fd(|f| f.gamma_tilde) - d).abs() < scale(d));
    }

    #[test]
    fn eta_drives_the_variance(p in profile(10), t in 0.2f64..6.0) {
        // η = ½ dσ²/dt.
        let h = 1e-4 * t;
        let s = |t| v_of_rho(&p, t, 1e-14).unwrap().sigma2;
        let fd = (s(t + h) - s(t - h)) / (2.0 * h);
        let e = eta_from_fixed_point(&p, &solve(&p, t, 1e-14).unwrap());
        prop_assert!((2.0 * e - fd).abs() < 1e-6 * (1.0 + fd));
    }

    #[test]
    fn integrals_reproduce_closed_forms(p in profile(10), rho in 0.1f64..8.0) {
        let eq = v_of_rho(&p, rho, DEFAULT_TOL).unwrap();
        let s = sigma2_by_integration(&p, rho, DEFAULT_GRID).unwrap();
        let v = v_by_integration(&p, rho, DEFAULT_GRID).unwrap();
        prop_assert!((s - eq.sigma2).abs() < 1e-6);
        prop_assert!((v - eq.v).abs() < 1e-6);
    }

    #[test]
    fn variance_lies_within_its_bounds(p in profile(16), rho in 0.01f64..10.0) {
        let eq = v_of_rho(&p, rho, DEFAULT_TOL).unwrap();
        let (lo, hi) = eq.variance_bounds(&p);
        let slack = 1e-12 * (1.0 + eq.sigma2);
        prop_assert!(lo <= eq.sigma2 + slack && eq.sigma2 <= hi + slack);
    }

    #[test]
    fn outage_is_monotone(p in profile(8), rho in 0.1f64..10.0, a in -5.0f64..5.0, b in 0.0f64..5.0) {
        let eq = v_of_rho(&p, rho, DEFAULT_TOL).unwrap();
        let sd = eq.sigma();
        let lo = eq.outage(eq.v + a * sd);
        let hi = eq.outage(eq.v + (a + b) * sd);
        prop_assert!((0.0..=1.0).contains(&lo) && lo <= hi);
        // A larger SNR moves the whole distribution up.
        let richer = v_of_rho(&p, 2.0 * rho, DEFAULT_TOL).unwrap();
        prop_assert!(richer.outage(eq.v) <= eq.outage(eq.v) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mutual_information_grows_with_snr(p in profile(12), seed in any::<u64>(), rho in 0.0f64..20.0, step in 0.0f64..20.0) {
        let y = sample_channel(&p, &mut trial_rng(seed, 0));
        let a = mutual_information(&y, rho).unwrap();
        let b = mutual_information(&y, rho + step).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a - 1e-12 * (1.0 + a));
    }

    #[test]
    fn logdet_routes_agree(p in profile(24), seed in any::<u64>(), rho in 0.01f64..100.0) {
        let y = sample_channel(&p, &mut trial_rng(seed, 1));
        let e = mutual_information_with(&y, rho, LogDetMethod::Eigen).unwrap();
        let c = mutual_information_with(&y, rho, LogDetMethod::Cholesky).unwrap();
        prop_assert!((e - c).abs() <= 1e-8 * e.abs().max(1e-300), "{e} vs {c}");
    }

    #[test]
    fn resolvent_identity_and_spectrum(p in profile(20), seed in any::<u64>(), rho in 0.0f64..50.0) {
        let y = sample_channel(&p, &mut trial_rng(seed, 2));
        let check = resolvent_check(&y, rho).unwrap();
        prop_assert!(check.identity_residual < 1e-8);
        prop_assert!(check.min_eigenvalue > 0.0 && check.max_eigenvalue <= 1.0 + 1e-12);
        let diag = GramSpectrum::of(&y).unwrap().resolvent_diagonal(rho);
        let chol = montecarlo::resolvent_diagonal_cholesky(&y, rho).unwrap();
        for (a, b) in diag.iter().zip(&chol) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn channel_entries_have_the_profiled_second_moments() {
    let p = VarianceProfile::new(vec![0.5, 2.0], vec![1.0, 0.25, 3.0])
        .validate()
        .unwrap();
    let draws = 100_000u64;
    let mut abs2 = [0.0; 6];
    let mut sq = [nalgebra::Complex::new(0.0, 0.0); 6];
    for k in 0..draws {
        let y = sample_channel(&p, &mut trial_rng(99, k));
        for (idx, z) in y.iter().enumerate() {
            abs2[idx] += z.norm_sqr();
            sq[idx] += z * z;
        }
    }
    // Column-major: entry idx is (idx % N, idx / N).
    for idx in 0..6 {
        let (i, j) = (idx % 2, idx / 2);
        let var = p.d()[i] * p.d_tilde()[j];
        let m = abs2[idx] / draws as f64;
        // Standard error of the mean of |Y|² is var/√draws.
        assert!(
            (m - var).abs() < 5.0 * var / (draws as f64).sqrt(),
            "E|Y|² {m} vs {var}"
        );
        let pseudo = sq[idx] / draws as f64;
        assert!(
            pseudo.norm() < 5.0 * var / (draws as f64).sqrt(),
            "E Y² = {pseudo}"
        );
    }
    let y = sample_channel(&p, &mut trial_rng(99, 0));
    let g = gram(&y);
    assert!((&g - g.adjoint()).iter().all(|z| z.norm() < 1e-15));
}
