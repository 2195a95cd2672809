use fracsource::forward::{
    duhamel_solve, timestep_solve_l1, wave_solve, DuhamelMethod, SpaceTimeField,
};
use fracsource::fractional::{TimeGrid, TimeSignal};
use fracsource::grid::{
    riemannian_distance, Boundary, CoefficientSet, DiscreteOperator, Region, SpatialMesh,
};
use fracsource::operators::{ContourParams, OrderField};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[59; 32]))
}

fn bump(t: f64, lo: f64, hi: f64) -> f64 {
    if t <= lo || t >= hi {
        0.0
    } else {
        let s = (2.0 * t - lo - hi) / (hi - lo);
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn operator(n: usize) -> DiscreteOperator {
    let mesh = SpatialMesh::new(0.0, 1.0, n, Boundary::Dirichlet).unwrap();
    let co = CoefficientSet::from_fns(
        &mesh,
        |x| 1.0 + 0.3 * x,
        |_| 0.0,
        |x| 1.0 + x * x,
        |x| 1.0 + 0.2 * (4.0 * x).sin(),
        0.8,
    );
    DiscreteOperator::assemble(&mesh, &co).unwrap()
}

fn spectral() -> DuhamelMethod {
    DuhamelMethod::Spectral { n_modes: None }
}

fn contour() -> DuhamelMethod {
    DuhamelMethod::Contour(ContourParams::default())
}

fn order_strategy() -> impl Strategy<Value = OrderField> {
    prop_oneof![
        (0.2f64..0.9).prop_map(OrderField::Constant),
        (0.35f64..0.5, 0.0f64..0.15).prop_map(|(a0, d)| OrderField::piecewise(
            0.0,
            1.0,
            &[0.5],
            &[a0, a0 + d]
        )
        .unwrap()),
    ]
}

fn method_for(order: &OrderField) -> DuhamelMethod {
    if order.is_constant() {
        spectral()
    } else {
        contour()
    }
}

fn max_gap(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn delayed_sources_give_exact_zeros_and_shift() {
    let grid = TimeGrid::new(0.6, 0.01).unwrap();
    runner(10)
        .run(
            &(order_strategy(), 1usize..20, 0.2f64..0.8),
            |(order, shift, center)| {
                let op = operator(24);
                let h = op.sample(|x| bump(x, center - 0.15, center + 0.15));
                let lead = |t: f64| bump(t, 0.0, 0.25) + 0.5 * t;
                let tau = grid.t(shift);
                let mu = TimeSignal::from_fn(grid, lead);
                let delayed =
                    TimeSignal::from_fn(grid, |t| if t <= tau { 0.0 } else { lead(t - tau) });
                let method = method_for(&order);
                let u = duhamel_solve(&op, &order, &mu, &h, method).unwrap();
                let ud = duhamel_solve(&op, &order, &delayed, &h, method).unwrap();
                for j in 0..=shift {
                    prop_assert!(
                        ud.at(j).iter().all(|&v| v == 0.0),
                        "nonzero field at t = {}",
                        grid.t(j)
                    );
                }
                let scale = u.max_abs();
                for j in shift..grid.n_points() {
                    for (a, b) in ud.at(j).iter().zip(u.at(j - shift)) {
                        prop_assert!(
                            (a - b).abs() <= 1e-12 * scale,
                            "shift mismatch at t = {}",
                            grid.t(j)
                        );
                    }
                }
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn solutions_are_linear_in_h_and_mu() {
    let grid = TimeGrid::new(0.5, 0.01).unwrap();
    runner(10)
        .run(
            &(order_strategy(), -3i32..3, 1.0f64..8.0),
            |(order, k, freq)| {
                let op = operator(20);
                let method = method_for(&order);
                let h1 = op.sample(|x| (freq * x).sin());
                let h2 = op.sample(|x| x * (1.0 - x));
                let h12: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a + b).collect();
                let mu1 = TimeSignal::from_fn(grid, |t| bump(t, 0.0, 0.3));
                let mu2 = TimeSignal::from_fn(grid, |t| (freq * t).cos());
                let mu12 = TimeSignal::new(
                    grid,
                    mu1.values
                        .iter()
                        .zip(&mu2.values)
                        .map(|(a, b)| a + b)
                        .collect(),
                )
                .unwrap();
                let s = 2f64.powi(k);
                let mus =
                    TimeSignal::new(grid, mu1.values.iter().map(|v| s * v).collect()).unwrap();

                let u11 = duhamel_solve(&op, &order, &mu1, &h1, method).unwrap();
                let u12 = duhamel_solve(&op, &order, &mu1, &h2, method).unwrap();
                let u21 = duhamel_solve(&op, &order, &mu2, &h1, method).unwrap();
                let scale = u11.max_abs() + u12.max_abs() + u21.max_abs();

                let in_h = duhamel_solve(&op, &order, &mu1, &h12, method).unwrap();
                let gap = in_h
                    .values
                    .iter()
                    .zip(u11.values.iter().zip(&u12.values))
                    .map(|(a, (b, c))| (a - b - c).abs())
                    .fold(0.0, f64::max);
                prop_assert!(gap <= 1e-12 * scale, "superposition in h: {gap:.3e}");

                let in_mu = duhamel_solve(&op, &order, &mu12, &h1, method).unwrap();
                let gap = in_mu
                    .values
                    .iter()
                    .zip(u11.values.iter().zip(&u21.values))
                    .map(|(a, (b, c))| (a - b - c).abs())
                    .fold(0.0, f64::max);
                prop_assert!(gap <= 1e-12 * scale, "superposition in mu: {gap:.3e}");

                // the kernel is fixed, so power-of-two scaling of mu is exact
                let scaled = duhamel_solve(&op, &order, &mus, &h1, method).unwrap();
                for (a, b) in scaled.values.iter().zip(&u11.values) {
                    prop_assert_eq!(*a, s * b);
                }
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn three_solvers_agree() {
    let grid = TimeGrid::new(1.0, 2e-3).unwrap();
    runner(6)
        .run(
            &(order_strategy(), 0.0f64..0.3, 0.3f64..0.7),
            |(order, onset, center)| {
                let op = operator(24);
                let h = op.sample(|x| bump(x, center - 0.2, center + 0.2));
                let mu = TimeSignal::from_fn(grid, |t| bump(t, onset, onset + 0.5));
                let c = duhamel_solve(&op, &order, &mu, &h, contour()).unwrap();
                let scale = c.max_abs();
                if order.is_constant() {
                    let s = duhamel_solve(&op, &order, &mu, &h, spectral()).unwrap();
                    let gap = max_gap(&s, &c);
                    prop_assert!(gap <= 1e-8 * scale, "spectral vs contour {gap:.3e}");
                }
                // L1 error scales like dt^{2 - alpha}; the 5e-3 budget covers alpha <= 0.7
                if order.max() > 0.7 {
                    return Ok(());
                }
                let l1 = timestep_solve_l1(&op, &order, &mu, &h).unwrap();
                let j = grid.steps;
                let diff: Vec<f64> = c.at(j).iter().zip(l1.at(j)).map(|(a, b)| a - b).collect();
                let rel = op.norm(&diff) / op.norm(c.at(j));
                prop_assert!(rel <= 5e-3, "L1 stepping vs contour {rel:.3e}");
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn waves_travel_at_finite_speed() {
    let n = 160;
    let grid = TimeGrid::new(1.2, 2e-3).unwrap();
    runner(8)
        .run(
            &(0.7f64..1.4, 0.05f64..0.2, 0.1f64..0.2),
            |(speed, lo, width)| {
                let mesh = SpatialMesh::new(0.0, 1.0, n, Boundary::Dirichlet).unwrap();
                let mut co = CoefficientSet::from_fns(
                    &mesh,
                    |_| speed * speed,
                    |_| 0.0,
                    |_| 0.0,
                    |_| 1.0,
                    speed * speed,
                );
                co.allow_zero_c = true;
                let op = DiscreteOperator::assemble(&mesh, &co).unwrap();
                let eig = op.eigensystem(op.n_dof()).unwrap();
                let hi = lo + width;
                let h = op.sample(|x| bump(x, lo, hi));
                let mu = TimeSignal::from_fn(grid, |t| bump(t, 0.0, 0.04));
                let u = wave_solve(&op, &eig, &mu, &h).unwrap();
                let omega = Region::interval(0.85, 0.95);
                let dist = riemannian_distance(&mesh, &co, hi, &omega).unwrap();
                prop_assert!((dist - (0.85 - hi) / speed).abs() < 1e-12);
                let idx: Vec<usize> = (0..op.n_dof())
                    .filter(|&i| omega.contains(op.coords[i]))
                    .collect();
                let threshold = 1e-6 * u.max_abs();
                let arrival = (0..grid.n_points())
                    .find(|&j| idx.iter().any(|&i| u.at(j)[i].abs() > threshold))
                    .map(|j| grid.t(j));
                let arrival = arrival.expect("front never reached omega");
                prop_assert!(
                    arrival >= 0.9 * dist && arrival <= 1.1 * dist,
                    "arrival {arrival:.4}, distance {dist:.4}"
                );
                Ok(())
            },
        )
        .unwrap();
}
