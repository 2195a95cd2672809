use fracsource::forward::laplace_residual_complex;
use fracsource::grid::{Boundary, CoefficientSet, DiscreteOperator, SpatialMesh};
use fracsource::operators::{apply_s_contour, apply_s_spectral, ContourParams, OrderField};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[47; 32]))
}

fn operator(n: usize, a_amp: f64, rho_amp: f64) -> DiscreteOperator {
    let mesh = SpatialMesh::new(0.0, 1.0, n, Boundary::Dirichlet).unwrap();
    let co = CoefficientSet::from_fns(
        &mesh,
        move |x| 1.0 + a_amp * (3.0 * x).sin(),
        |_| 0.0,
        |x| 1.0 + x,
        move |x| 1.0 + rho_amp * (2.0 * x).cos(),
        1.0 - a_amp.abs(),
    );
    DiscreteOperator::assemble(&mesh, &co).unwrap()
}

/// Smooth source with random bump location and ripple.
fn source(op: &DiscreteOperator, center: f64, k: f64) -> Vec<f64> {
    op.sample(|x| (-(x - center).powi(2) / 0.02).exp() * (1.0 + 0.3 * (k * x).sin()))
}

fn order_strategy() -> impl Strategy<Value = OrderField> {
    prop_oneof![
        (0.1f64..0.95).prop_map(OrderField::Constant),
        (0.3f64..0.5, 0.0f64..0.15).prop_map(|(a0, d)| OrderField::piecewise(
            0.0,
            1.0,
            &[0.5],
            &[a0, a0 + d]
        )
        .unwrap()),
    ]
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn spectral_and_contour_agree_for_constant_order() {
    let strategy = (
        8usize..=128,
        0.1f64..0.95,
        0.1f64..2.0,
        0.0f64..0.4,
        0.0f64..0.4,
        0.2f64..0.8,
    );
    runner(20)
        .run(&strategy, |(n, alpha, t, a_amp, rho_amp, center)| {
            let op = operator(n, a_amp, rho_amp);
            let eig = op.eigensystem(op.n_dof()).unwrap();
            let h = source(&op, center, 5.0);
            let order = OrderField::Constant(alpha);
            let contour = ContourParams::default().at_time(t).unwrap();
            let sc = apply_s_contour(&op, &order, &contour, t, &h).unwrap().value;
            let ss = apply_s_spectral(&op, &eig, alpha, t, &h).unwrap().value;
            let norm_h = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            let gap = sc
                .iter()
                .zip(&ss)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                / norm_h;
            prop_assert!(gap <= 1e-6, "alpha {alpha}, t {t}: gap {gap:.3e}");
            Ok(())
        })
        .unwrap();
}

#[test]
fn contour_sum_is_real() {
    let strategy = (
        order_strategy(),
        0.05f64..5.0,
        0.0f64..0.4,
        0.2f64..0.8,
        1.0f64..9.0,
    );
    runner(24)
        .run(&strategy, |(order, t, a_amp, center, k)| {
            let op = operator(48, a_amp, 0.3);
            let h = source(&op, center, k);
            let contour = ContourParams::default().at_time(t).unwrap();
            let r = apply_s_contour(&op, &order, &contour, t, &h).unwrap();
            prop_assert!(r.imag_ratio <= 1e-8, "imag ratio {:.3e}", r.imag_ratio);
            Ok(())
        })
        .unwrap();
}

/// int_0^inf e^{-pt} S(t) h dt by the trapezoid rule in u = ln t; the
/// t^{alpha-1} singularity becomes a tail decaying like e^{alpha u}, cut
/// where it drops below 1e-11.
fn laplace_of_trajectory(op: &DiscreteOperator, order: &OrderField, h: &[f64], p: f64) -> Vec<f64> {
    let params = ContourParams::default();
    let du = 0.2;
    let a = order.min();
    let (u0, u1) = ((1e-11 * a).ln() / a, (45.0 / p).ln());
    let steps = ((u1 - u0) / du).ceil() as usize;
    let mut acc = vec![0.0; op.n_dof()];
    for k in 0..=steps {
        let t = (u0 + k as f64 * du).exp();
        let contour = params.at_time(t).unwrap();
        let s = apply_s_contour(op, order, &contour, t, h).unwrap().value;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 } * du * t * (-p * t).exp();
        for (a, v) in acc.iter_mut().zip(&s) {
            *a += w * v;
        }
    }
    acc
}

#[test]
fn laplace_transform_inverts_the_resolvent() {
    let strategy = (order_strategy(), 0.5f64..4.0, 0.2f64..0.8);
    runner(6)
        .run(&strategy, |(order, p, center)| {
            let op = operator(32, 0.2, 0.3);
            let h = source(&op, center, 4.0);
            let u_hat: Vec<Complex64> = laplace_of_trajectory(&op, &order, &h, p)
                .into_iter()
                .map(|v| Complex64::new(v, 0.0))
                .collect();
            // S(t) has transform (L + p^alpha rho)^{-1} rho
            let rho_h: Vec<f64> = h.iter().zip(&op.rho).map(|(a, r)| a * r).collect();
            let res = laplace_residual_complex(
                &op,
                &order,
                &u_hat,
                Complex64::new(1.0, 0.0),
                &rho_h,
                Complex64::new(p, 0.0),
            );
            prop_assert!(res <= 1e-8, "p = {p}: residual {res:.3e}");
            Ok(())
        })
        .unwrap();
}

/// Max deviation of f from its degree-12 Chebyshev interpolant on [t1, t2],
/// relative to max |f|, over a fine check grid.
fn chebyshev_residual(f: impl Fn(f64) -> f64, t1: f64, t2: f64) -> f64 {
    const DEG: usize = 12;
    let map = |s: f64| 0.5 * (t1 + t2) + 0.5 * (t2 - t1) * s;
    let nodes: Vec<f64> = (0..=DEG)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / (DEG + 1) as f64).cos())
        .collect();
    let vals: Vec<f64> = nodes.iter().map(|&s| f(map(s))).collect();
    // second-kind barycentric weights for first-kind points
    let weights: Vec<f64> = (0..=DEG)
        .map(|j| {
            let th = std::f64::consts::PI * (j as f64 + 0.5) / (DEG + 1) as f64;
            if j % 2 == 0 {
                th.sin()
            } else {
                -th.sin()
            }
        })
        .collect();
    let interp = |s: f64| {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=DEG {
            let d = s - nodes[j];
            if d == 0.0 {
                return vals[j];
            }
            num += weights[j] * vals[j] / d;
            den += weights[j] / d;
        }
        num / den
    };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..=97 {
        let s = -1.0 + 2.0 * k as f64 / 97.0;
        let v = f(map(s));
        scale = scale.max(v.abs());
        worst = worst.max((v - interp(s)).abs());
    }
    worst / scale
}

#[test]
fn pairings_are_smooth_in_time() {
    let strategy = (
        order_strategy(),
        0.1f64..3.0,
        1.2f64..2.0,
        0.2f64..0.8,
        0.2f64..0.8,
    );
    runner(12)
        .run(&strategy, |(order, t1, ratio, center, probe)| {
            let op = operator(32, 0.2, 0.3);
            let h = source(&op, center, 3.0);
            let psi = op.sample(|x| (-(x - probe).powi(2) / 0.01).exp());
            let params = ContourParams::default();
            let pairing = |t: f64| {
                let c = params.at_time(t).unwrap();
                op.inner(
                    &apply_s_contour(&op, &order, &c, t, &h).unwrap().value,
                    &psi,
                )
            };
            let r = chebyshev_residual(pairing, t1, t1 * ratio);
            prop_assert!(r < 1e-8, "[{t1}, {}]: residual {r:.3e}", t1 * ratio);
            Ok(())
        })
        .unwrap();
}

#[test]
fn contour_is_insensitive_to_inner_radius() {
    let strategy = (order_strategy(), 0.05f64..5.0, 0.2f64..0.8);
    runner(16)
        .run(&strategy, |(order, t, center)| {
            let op = operator(40, 0.2, 0.3);
            let h = source(&op, center, 2.0);
            let eval = |scale: f64| {
                let params = ContourParams {
                    delta_scale: scale,
                    ..ContourParams::default()
                };
                apply_s_contour(&op, &order, &params.at_time(t).unwrap(), t, &h)
                    .unwrap()
                    .value
            };
            let base = eval(1.0);
            for scale in [0.5, 2.0] {
                let d = rel_diff(&eval(scale), &base);
                prop_assert!(d <= 1e-8, "delta scale {scale}: {d:.3e}");
            }
            Ok(())
        })
        .unwrap();
}
