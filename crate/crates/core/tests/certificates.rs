use proptest::prelude::*;
use uhspec::uhdetect::{certify_with, growth_test, CertifyOptions};
use uhspec::*;

fn src(spec: HullSpec) -> SourceF64 {
    make_source(&spec, Phase::Shift(0)).unwrap()
}

fn zero() -> SourceF64 {
    src(HullSpec::constant(0.0))
}

#[test]
fn dichotomy_on_free_grid() {
    let v = zero();
    let depth = 64;
    for i in 0..=120 {
        let e = -3.0 + 0.05 * i as f64;
        if (e.abs() - 2.0).abs() <= 0.05 {
            continue;
        }
        let cert = certify(&v, e, Interval::symmetric(32), depth).unwrap().is_ok();
        let w = bounded_witness_search(&v, e, Interval::new(0, 0), depth, 256).unwrap();
        let bounded = w.max_log_norm <= (2.0 * depth as f64).ln();
        assert!(cert != bounded, "E={e}: certified={cert}, bounded witness={bounded}");
    }
}

#[test]
fn parabolic_witness_grows_at_most_linearly() {
    let w = bounded_witness_search(&zero(), 2.0, Interval::new(0, 0), 100, 1024).unwrap();
    assert!(w.max_log_norm <= 201f64.ln(), "{}", w.max_log_norm);
}

#[test]
fn sections_invariant_on_certified_windows() {
    let models = [
        HullSpec::constant(0.7),
        HullSpec::periodic(&[1.0, 0.0]),
        HullSpec::almost_mathieu(1.0, models::GOLDEN_MEAN, 0.2),
        HullSpec::random_iid(1.0, 3),
    ];
    for spec in models {
        let v = src(spec.clone());
        for e in [-3.6, -2.9, 3.1, 4.0] {
            let cert = certify(&v, e, Interval::symmetric(40), 48).unwrap().unwrap();
            for w in cert.sections.windows(2) {
                let a = transfer(e, v.sample(w[0].site).unwrap());
                assert!(a.proj_act(w[0].u).distance(&w[1].u) <= 1e-6, "{} E={e} k={}", spec.family, w[0].site);
                assert!(a.proj_act(w[0].s).distance(&w[1].s) <= 1e-6, "{} E={e} k={}", spec.family, w[0].site);
            }
            assert!(cert.max_invariance_error <= 1e-6);
        }
    }
}

#[test]
fn failure_reports_name_the_site() {
    let r = certify(&zero(), 1.0, Interval::symmetric(16), 32).unwrap().unwrap_err();
    assert_eq!(r.reason, FailureReason::Growth);
    assert!(r.to_string().starts_with("FAILED: growth at site"));
}

#[test]
fn contraction_bound_below_one_rejects() {
    // The contraction constant is at least 1 (n = 0), so any smaller bound must reject.
    let opts = CertifyOptions { contraction_max: 0.5, ..CertifyOptions::default() };
    let r = certify_with(&zero(), 2.3, Interval::symmetric(16), 32, &opts);
    assert!(!matches!(r, Ok(Ok(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lambda_fit_monotone_in_depth(a in -1.0f64..1.0, e in -5.0f64..5.0) {
        let v = src(HullSpec::constant(a));
        let w = Interval::symmetric(8);
        let short = growth_test(&v, e, w, 48).unwrap();
        let long = growth_test(&v, e, w, 96).unwrap();
        prop_assert!(long.lambda >= short.lambda - 1e-3, "{} -> {}", short.lambda, long.lambda);
    }

    #[test]
    fn constant_lambda_matches_closed_form(a in -1.0f64..1.0, off in 0.3f64..3.0, sign in prop::bool::ANY) {
        let e = a + if sign { 2.0 + off } else { -2.0 - off };
        let x = (e - a).abs();
        let exact = (x + (x * x - 4.0).sqrt()) / 2.0;
        let fit = growth_test(&src(HullSpec::constant(a)), e, Interval::symmetric(8), 64).unwrap();
        prop_assert!(((fit.lambda - exact) / exact).abs() < 0.01, "{} vs {exact}", fit.lambda);
    }

    #[test]
    fn certificates_satisfy_cone_arithmetic(seed in 0u64..1000, e in 2.6f64..5.0) {
        let v = src(HullSpec::random_iid(0.5, seed));
        let e = if seed % 2 == 0 { e } else { -e };
        if let Ok(cert) = certify(&v, e, Interval::symmetric(16), 32).unwrap() {
            prop_assert!(cert.gap_gamma > 0.0);
            prop_assert!((cert.gap_gamma / 2.0).tan() > 2.0 / (cert.beta - 1.0 / cert.beta));
            prop_assert!(cert.lambda > 1.0 && cert.c_const > 0.0 && cert.c_const <= 1.0);
        }
    }
}
