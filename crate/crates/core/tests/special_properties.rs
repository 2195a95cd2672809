use std::sync::atomic::{AtomicUsize, Ordering};

use fracsource::special::{gamma, rgamma, MittagLeffler, MlRegime};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[23; 32]))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Rounding amplification of the Taylor sum: E(|z|) / |E(z)|.
fn series_condition(ml: &MittagLeffler, z: Complex64) -> f64 {
    ml.eval_real(z.norm()) / ml.eval(z).value.norm()
}

#[test]
fn regimes_agree_where_both_apply() {
    let strategy = (0.2f64..1.6, 0.5f64..2.0, 0.02f64..1.0, -3.1f64..3.1);
    let overlaps = AtomicUsize::new(0);
    runner(160)
        .run(&strategy, |(alpha, beta, frac, arg)| {
            let ml = MittagLeffler::new(alpha, beta).unwrap();
            // keep e^{|z|^{1/alpha}} representable
            let z = Complex64::from_polar(frac * 25.0f64.min(300.0f64.powf(alpha)), arg);
            let integral = ml.eval_with(z, MlRegime::Integral).unwrap().value;
            let series = ml
                .eval_with(z, MlRegime::Series)
                .ok()
                .filter(|_| series_condition(&ml, z) < 1e6)
                .map(|v| v.value);
            let asym = ml.eval_with(z, MlRegime::Asymptotic).ok().map(|v| v.value);
            if let Some(s) = series {
                prop_assert!(rel(s, integral) < 1e-8, "series {s} vs integral {integral}");
            }
            if let Some(a) = asym {
                prop_assert!(
                    rel(a, integral) < 1e-8,
                    "asymptotic {a} vs integral {integral}"
                );
            }
            if let (Some(s), Some(a)) = (series, asym) {
                overlaps.fetch_add(1, Ordering::Relaxed);
                prop_assert!(rel(s, a) < 1e-8, "series {s} vs asymptotic {a}");
            }
            Ok(())
        })
        .unwrap();
    eprintln!("series/asymptotic overlap cases: {}", overlaps.into_inner());
}

#[test]
fn exponential_case_has_a_true_overlap() {
    // alpha = beta = 1 carries no branch cut, so both expansions are exact
    // representations of e^z on the negative axis
    let ml = MittagLeffler::new(1.0, 1.0).unwrap();
    for x in [4.0, 5.0, 6.0] {
        let z = Complex64::new(-x, 0.0);
        let s = ml.eval_with(z, MlRegime::Series).unwrap().value;
        let a = ml.eval_with(z, MlRegime::Asymptotic).unwrap().value;
        assert!(rel(s, a) < 1e-8, "x = {x}: {s} vs {a}");
    }
}

#[test]
fn recurrence_holds_nodewise() {
    let strategy = (
        0.2f64..1.8,
        0.3f64..2.5,
        0.0f64..12.0,
        -std::f64::consts::PI..std::f64::consts::PI,
    );
    runner(200)
        .run(&strategy, |(alpha, beta, r, arg)| {
            let z = Complex64::from_polar(r, arg);
            let lhs = MittagLeffler::new(alpha, beta).unwrap().eval(z).value;
            let shifted = MittagLeffler::new(alpha, alpha + beta)
                .unwrap()
                .eval(z)
                .value;
            let rhs = z * shifted + rgamma(beta);
            let scale = lhs.norm().max(rgamma(beta).abs()).max(1e-3);
            prop_assert!((lhs - rhs).norm() <= 1e-9 * scale, "{lhs} vs {rhs}");
            Ok(())
        })
        .unwrap();
}

#[test]
fn negative_axis_kernel_is_positive_and_decreasing() {
    runner(48)
        .run(&(0.05f64..=1.0, 0.01f64..0.5), |(alpha, step)| {
            let ml = MittagLeffler::new(alpha, alpha).unwrap();
            let mut prev = f64::INFINITY;
            let mut x = 0.0;
            while x < 60.0 {
                let v = ml.eval(Complex64::new(-x, 0.0)).value;
                prop_assert!(v.im == 0.0, "imaginary part {} at {x}", v.im);
                prop_assert!(v.re > 0.0, "E({}) = {} at alpha {alpha}", -x, v.re);
                prop_assert!(v.re <= prev, "increase at x = {x}: {} > {prev}", v.re);
                prev = v.re;
                x += step * (1.0 + x);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn gamma_satisfies_functional_equation() {
    runner(200)
        .run(&(-20.0f64..150.0), |x| {
            prop_assume!((x - x.round()).abs() > 1e-6 || x > 0.0);
            let g = gamma(x).unwrap();
            let g1 = gamma(x + 1.0).unwrap();
            prop_assert!((g1 - x * g).abs() <= 1e-13 * g1.abs(), "{g1} vs {}", x * g);
            Ok(())
        })
        .unwrap();
}
