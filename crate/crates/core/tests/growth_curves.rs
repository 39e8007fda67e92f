use proptest::prelude::*;
use richfit_core::growth::{
    evaluate_modified, modified_carrying_capacity, perturbation_integral, perturbation_value,
    sensitivity_sign, Perturbation, RichardsParams, Sign,
};

fn reference() -> RichardsParams {
    RichardsParams::new(2.0, 0.5, 0.2, 0.0, 2.0).unwrap()
}

/// Plain bisection, kept independent of the library root finder.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form `∫_a^b C κ` for the power form with exponent `m`, using the
/// substitution `u = eta + k^t`.
fn power_form_antiderivative(p: &RichardsParams, m: f64, t_star: f64, a: f64, b: f64) -> f64 {
    let u = |t: f64| p.eta() + p.k().powf(t);
    let (ua, ub) = (u(a.max(t_star)), u(b.max(t_star)));
    (ub.powf(-m) - ua.powf(-m)) / m + u(t_star).powf(-m) * (ub / ua).ln()
}

#[test]
fn tangent_anchors() {
    let s = reference().tangent_summary();
    assert!((s.t_inflection - 3.32193).abs() < 1e-5);
    assert!((s.mu - 14.79).abs() < 0.01 && (s.lambda_lag - 1.16).abs() < 0.01);
    assert!(s.lambda_lag < s.t_inflection && s.inflection_after_start);
    let s = RichardsParams::new(2.0, 0.5, 0.3, 0.0, 2.0).unwrap().tangent_summary();
    assert!((s.mu - 7.71).abs() < 0.01 && (s.lambda_lag - 0.57).abs() < 0.01);
}

#[test]
fn curve_is_monotone_and_saturates() {
    let p = reference();
    let k = p.carrying_capacity();
    let mut prev = 0.0;
    for j in 0..=200 {
        let x = p.evaluate(j as f64 * 0.15).unwrap();
        assert!(x >= prev);
        prev = x;
    }
    assert!((p.evaluate(30.0).unwrap() - k).abs() < 1e-6 * k);
}

#[test]
fn limiting_cases() {
    // eta -> 0: exponential growth x0 k^{-q t}.
    let p = RichardsParams::new(2.0, 0.5, 1e-10, 0.0, 2.0).unwrap();
    for j in 0..=50 {
        let t = j as f64 * 0.1;
        let exact = 2.0 * 0.5f64.powf(-2.0 * t);
        assert!((p.evaluate(t).unwrap() - exact).abs() / exact < 1e-6);
    }
    // q -> 0: constant curve.
    let p = RichardsParams::new(1e-12, 0.5, 0.2, 0.0, 2.0).unwrap();
    assert!((p.carrying_capacity() - 2.0).abs() < 1e-9);
    assert!((p.evaluate(7.0).unwrap() - 2.0).abs() < 1e-9);
    // q = 1: logistic carrying capacity.
    let p = RichardsParams::new(1.0, 0.5, 0.2, 0.0, 2.0).unwrap();
    assert!((p.carrying_capacity() - 12.0).abs() < 1e-12);
}

#[test]
fn growth_rate_properties() {
    let p = reference();
    assert!((p.growth_rate(0.0) - 1.155245).abs() < 1e-6);
    assert!(p.growth_rate(80.0) < 1e-20);
    let doubled = RichardsParams::new(4.0, 0.5, 0.2, 0.0, 2.0).unwrap();
    for t in [0.0, 1.3, 6.0] {
        assert!((doubled.growth_rate(t) - 2.0 * p.growth_rate(t)).abs() < 1e-15);
        assert!(p.growth_rate(t + 0.1) < p.growth_rate(t));
    }
}

#[test]
fn reference_switch_time() {
    let p = reference();
    let t_star = p.switch_time(0.5).unwrap();
    // Closed form gives 4.4755679955; the published six-decimal figure rounds up.
    assert!((t_star - 4.475569).abs() < 2e-6);
    let root = bisect(|t| p.evaluate(t).unwrap() - 48.0, 3.321928, 20.0);
    assert!((t_star - root).abs() < 1e-10);
    assert!((p.switch_time(1e-10).unwrap() - p.tangent_summary().t_inflection).abs() < 1e-8);

    let logistic = RichardsParams::new(1.0, 0.5, 0.2, 0.0, 2.0).unwrap();
    let ts = logistic.tangent_summary();
    let root = bisect(|t| logistic.evaluate(t).unwrap() - 1.5 * ts.x_at_inflection, ts.t_inflection, 20.0);
    assert!((logistic.switch_time(0.5).unwrap() - root).abs() < 1e-10);
}

#[test]
fn reference_perturbation_integral() {
    let p = reference();
    let t_star = p.switch_time(0.5).unwrap();
    let c = Perturbation::power_form(1.0, t_star).unwrap();
    let v = perturbation_integral(&c, &p, t_star, 6.0).unwrap();
    let exact = power_form_antiderivative(&p, 1.0, t_star, t_star, 6.0);
    assert!((v - exact).abs() < 1e-12);
    assert!((v - 0.0346444).abs() < 1e-7);
    assert_eq!(perturbation_integral(&c, &p, 0.0, t_star).unwrap(), 0.0);
    assert_eq!(perturbation_integral(&Perturbation::none(), &p, 0.0, 9.0).unwrap(), 0.0);
    let x6 = evaluate_modified(&p, &c, 6.0).unwrap();
    assert!((x6 - p.evaluate(6.0).unwrap() * v.exp()).abs() < 1e-12);
    assert_eq!(evaluate_modified(&p, &c, t_star).unwrap(), p.evaluate(t_star).unwrap());

    let tail = power_form_antiderivative(&p, 1.0, t_star, t_star, f64::INFINITY);
    let k_mod = modified_carrying_capacity(&p, &c).unwrap();
    assert!((k_mod - 72.0 * tail.exp()).abs() < 1e-9);
    assert!(k_mod > 72.0);
    assert_eq!(modified_carrying_capacity(&p, &Perturbation::none()).unwrap(), 72.0);
}

#[test]
fn sigmoid_form_saturates() {
    let p = reference();
    let c = Perturbation::sigmoid_form(0.4, 1.5, 2.0, 4.0).unwrap();
    let limit = 0.4 * (0.75f64).exp();
    assert!((perturbation_value(&c, &p, 1e6) - limit).abs() < 1e-9);
    assert_eq!(perturbation_value(&c, &p, 4.0), 0.0);
    assert!(modified_carrying_capacity(&p, &c).unwrap() > p.carrying_capacity());
}

#[test]
fn modified_curve_dominates_and_separates() {
    let p = reference();
    let t_star = p.switch_time(0.5).unwrap();
    for c in [
        Perturbation::power_form(1.0, t_star).unwrap(),
        Perturbation::sigmoid_form(0.3, 1.0, 0.5, t_star).unwrap(),
        Perturbation::tabulated(&[(t_star, 0.0), (5.0, 0.2), (7.0, 0.5), (9.0, 0.55)]).unwrap(),
    ] {
        let mut prev_gap = 0.0;
        for j in 0..=100 {
            let t = j as f64 * 0.1;
            let (x, xm) = (p.evaluate(t).unwrap(), evaluate_modified(&p, &c, t).unwrap());
            let gap = xm - x;
            if t <= t_star {
                assert_eq!(gap, 0.0);
            } else {
                assert!(gap > prev_gap, "gap not increasing at t = {t}");
            }
            prev_gap = gap;
        }
    }
}

#[test]
fn sensitivity_trivial_cases() {
    let p = reference();
    let c = Perturbation::power_form(1.0, 4.5).unwrap();
    assert_eq!(sensitivity_sign(&p, &c, 4.0, 1e-3).unwrap(), Sign::Zero);
    assert_eq!(sensitivity_sign(&p, &Perturbation::none(), 8.0, 1e-3).unwrap(), Sign::Zero);
    assert_eq!(sensitivity_sign(&p, &c, 8.0, 1e-3).unwrap(), Sign::Negative);
    let tab = Perturbation::tabulated(&[(4.5, 0.0), (6.0, 0.3), (8.0, 0.4)]).unwrap();
    assert_eq!(sensitivity_sign(&p, &tab, 7.0, 1e-3).unwrap(), Sign::Negative);
}

fn params_strategy() -> impl Strategy<Value = RichardsParams> {
    (0.3f64..5.0, 0.2f64..0.9, 0.02f64..1.0, -2.0f64..2.0, 0.5f64..10.0)
        .prop_map(|(q, k, eta, t0, x0)| RichardsParams::new(q, k, eta, t0, x0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn switch_time_hits_the_boundary(p in params_strategy(), frac in 0.02f64..0.9) {
        // Pick p so that (1 + p) x(t_I) stays below the carrying capacity.
        let s = p.tangent_summary();
        let p_max = p.carrying_capacity() / s.x_at_inflection - 1.0;
        let level = frac * p_max;
        let t_star = p.switch_time(level).unwrap();
        let target = (1.0 + level) * s.x_at_inflection;
        let x = p.value_at(t_star);
        prop_assert!((x - target).abs() <= 1e-10 * target);
        let root = bisect(|t| p.value_at(t) - target, s.t_inflection, t_star + 200.0);
        prop_assert!((root - t_star).abs() <= 1e-10 * t_star.abs().max(1.0));
    }

    #[test]
    fn quadrature_matches_power_form_antiderivative(
        p in params_strategy(),
        m in prop::sample::select(vec![1.0, 0.5, 2.0]),
        offset in 0.0f64..3.0,
        a_off in -1.0f64..6.0,
        width in 0.0f64..8.0,
    ) {
        let t_star = p.t0() + offset;
        let c = Perturbation::power_form(m, t_star).unwrap();
        let a = t_star + a_off;
        let b = a + width;
        let got = perturbation_integral(&c, &p, a, b).unwrap();
        let want = power_form_antiderivative(&p, m, t_star, a, b);
        prop_assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
    }

    #[test]
    fn sensitivity_matches_direct_shift(
        p in params_strategy().prop_filter("moderate offset", |p| p.eta() >= 0.1),
        m in 0.3f64..1.5,
        offset in 0.0f64..2.0,
        after in 0.2f64..5.0,
    ) {
        let t_star = p.t0() + offset;
        let t = t_star + after;
        let eps = 1e-3;
        let c = Perturbation::power_form(m, t_star).unwrap();
        let shifted = c.with_t_star(t_star + eps).unwrap();
        let direct = evaluate_modified(&p, &shifted, t).unwrap() - evaluate_modified(&p, &c, t).unwrap();
        let sign = sensitivity_sign(&p, &c, t, eps).unwrap();
        prop_assert!(direct.is_finite());
        prop_assert_eq!(sign, Sign::of(direct));
    }
}
