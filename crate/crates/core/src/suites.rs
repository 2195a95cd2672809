//! Verification suites run by `fracsource verify`, and the reference
//! configurations of the uniqueness experiments.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

use crate::error::{invalid, FracError, Result};
use crate::forward::{
    duhamel_kernel, mollified_mu_convergence, wave_energy, wave_free, wave_kernel, DuhamelKernel,
};
use crate::fractional::{bump_with_derivatives, verify_relaxation_ode, TimeGrid, TimeSignal};
use crate::grid::{Boundary, DiscreteOperator};
use crate::hypotheses::Condition;
use crate::inverse::{hyperbolic_uniqueness_experiment, titchmarsh_check, SourceBasis};
use crate::operators::{
    apply_s_contour, apply_s_spectral, operator_norm_estimate, ContourParams, OrderField,
};
use crate::scenario::{
    json_text, run_validated, CoefficientSpec, Experiment, InverseSpec, MeshSpec, MethodSpec,
    ObservationConfig, OrderSpec, Profile, RunManifest, Scenario, SolverSpec, SourceSpec,
};
use crate::special::MittagLeffler;

/// Number of random pairs in the Titchmarsh suite.
pub const TITCHMARSH_TRIALS: usize = 100;
/// Horizon of the weak-solution check; long enough for the truncated
/// Laplace transforms to be exact at p >= 1.
pub const WEAK_HORIZON: f64 = 24.0;
pub const WEAK_P: [f64; 3] = [1.0, 2.0, 4.0];
pub const MOLLIFIER_WIDTHS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];
/// Horizons of the wave certificate sweep, as multiples of T*.
pub const WAVE_FACTORS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Titchmarsh,
    WeakSolution,
    Operators,
    Theorems,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Titchmarsh,
        Suite::WeakSolution,
        Suite::Operators,
        Suite::Theorems,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Titchmarsh => "titchmarsh",
            Suite::WeakSolution => "weak-solution",
            Suite::Operators => "operators",
            Suite::Theorems => "theorems",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| invalid(format!("unknown suite '{name}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteCheck {
    /// Passes when `value <= tolerance`.
    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    /// Passes when `value >= tolerance`.
    pub fn at_least(
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed: value >= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            tolerance: 1.0,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<SuiteCheck>,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, checks: Vec<SuiteCheck>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            suite,
            seed,
            checks,
            passed,
        }
    }

    pub fn check(&self, name: &str) -> Option<&SuiteCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs a suite on the scenario. The theorems suite uses the reference
/// configurations below and takes only the seed from the scenario.
pub fn run_suite(suite: Suite, sc: &Scenario) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Titchmarsh => titchmarsh_suite(sc)?,
        Suite::WeakSolution => weak_solution_suite(sc)?,
        Suite::Operators => operators_suite(sc)?,
        Suite::Theorems => theorems_suite()?,
    };
    Ok(SuiteReport::new(suite, sc.seed, checks))
}

/// Nonnegative profile on [lo, lo + w]: an indicator times a positive
/// random trigonometric factor, so the onset is a jump.
fn random_pulse(rng: &mut ChaCha8Rng, grid: TimeGrid, lo: f64, w: f64) -> TimeSignal {
    let c: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..0.2)).collect();
    let ph: Vec<f64> = (0..3)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let freq = rng.random_range(1.0..8.0);
    let scale = rng.random_range(0.5..2.0);
    TimeSignal::from_fn(grid, |t| {
        if t < lo || t > lo + w {
            return 0.0;
        }
        let s = (0..3)
            .map(|k| c[k] * ((k + 1) as f64 * freq * t + ph[k]).sin())
            .sum::<f64>();
        scale * (1.0 + s)
    })
}

/// One check per seeded random pair.
pub fn titchmarsh_trials(sc: &Scenario, trials: usize) -> Result<Vec<SuiteCheck>> {
    let grid = sc.time_grid()?;
    let t_end = grid.t_end();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut out = Vec::with_capacity(trials);
    for k in 0..trials {
        let a = rng.random_range(0.0..0.4 * t_end);
        let b = rng.random_range(0.0..0.4 * t_end);
        let wa = rng.random_range(0.05..0.3) * t_end;
        let wb = rng.random_range(0.05..0.3) * t_end;
        let f = random_pulse(&mut rng, grid, a, wa);
        let g = random_pulse(&mut rng, grid, b, wb);
        let r = titchmarsh_check(&f, &g, t_end, sc.solver.support_threshold)?;
        let gap = r.gap.unwrap_or(f64::INFINITY);
        out.push(SuiteCheck {
            name: format!("pair-{k:03}"),
            passed: r.passed,
            value: gap,
            tolerance: r.tolerance,
            detail: format!(
                "inf supp f = {:.6}, inf supp g = {:.6}, inf supp f*g = {} (threshold {:e})",
                r.a,
                r.b,
                r.c.map_or("none".into(), |c| format!("{c:.6}")),
                r.threshold
            ),
        });
    }
    Ok(out)
}

fn titchmarsh_suite(sc: &Scenario) -> Result<Vec<SuiteCheck>> {
    let mut checks = titchmarsh_trials(sc, TITCHMARSH_TRIALS)?;
    // pair whose convolution starts after the horizon: no anomaly expected
    let grid = sc.time_grid()?;
    let t_end = grid.t_end();
    let late = TimeSignal::from_fn(grid, |t| if t >= 0.6 * t_end { 1.0 } else { 0.0 });
    let r = titchmarsh_check(&late, &late, t_end, sc.solver.support_threshold)?;
    checks.push(SuiteCheck::flag(
        "late-pair",
        r.passed && r.c.is_none(),
        format!("onsets {:.4} + {:.4} beyond T = {t_end}", r.a, r.b),
    ));
    Ok(checks)
}

fn kernel_for(
    sc: &Scenario,
    op: &DiscreteOperator,
    order: &OrderField,
    h: &[f64],
    grid: TimeGrid,
) -> Result<DuhamelKernel> {
    if is_wave(order) {
        let eig = op.eigensystem(sc.solver.n_modes.unwrap_or(op.n_dof()))?;
        wave_kernel(&eig, h, grid, op.coords.clone())
    } else {
        duhamel_kernel(op, order, h, grid, sc.method(op, order))
    }
}

fn is_wave(order: &OrderField) -> bool {
    matches!(order, OrderField::Constant(a) if *a == 2.0)
}

fn weak_solution_suite(sc: &Scenario) -> Result<Vec<SuiteCheck>> {
    let op = sc.operator()?;
    let order = sc.order_field()?;
    let h = sc.h_values(&op);
    let mut checks = Vec::new();

    let long = TimeGrid::new(WEAK_HORIZON, sc.solver.dt)?;
    let mu = sc.mu_signal(long);
    let u = sc.solve_forward(&op, &order, &mu, &h)?;
    for w in crate::forward::verify_weak_solution(&op, &order, &u, &mu, &h, &WEAK_P)? {
        checks.push(SuiteCheck::at_most(
            format!("weak-residual-p{}", w.p),
            w.residual,
            1e-3,
            format!("tail estimate {:e}", w.tail_estimate),
        ));
    }

    let grid = sc.time_grid()?;
    let kernel = kernel_for(sc, &op, &order, &h, grid)?;
    let m = mollified_mu_convergence(&kernel, &sc.mu_signal(grid), &MOLLIFIER_WIDTHS, 1.0, &op)?;
    checks.push(SuiteCheck::flag(
        "mollifier-monotone",
        m.monotone,
        format!("gaps {:?} for widths {:?}", m.gaps, m.widths),
    ));
    checks.push(SuiteCheck::at_most(
        "mollifier-terminal-gap",
        *m.gaps.last().unwrap_or(&f64::INFINITY),
        1e-4,
        format!("L1 errors of mu {:?}", m.l1_errors),
    ));

    if !is_wave(&order) {
        let beta = order.min();
        let pulse = TimeSignal::from_fn(grid, |t| {
            bump_with_derivatives(t, 0.3 * grid.t_end(), 0.2 * grid.t_end()).0
        });
        let r = verify_relaxation_ode(&pulse, beta, 1.0)?;
        checks.push(SuiteCheck::at_least(
            "relaxation-residual-rate",
            r.rate,
            0.9,
            format!(
                "order {beta}: residual {:e} -> {:e}",
                r.residual, r.residual_refined
            ),
        ));
    }
    Ok(checks)
}

/// Truncated contour sums of e^{tp}/p and e^{tp}/p^2; both residues are
/// known in closed form.
pub fn residue_errors(params: &ContourParams, t: f64) -> Result<(f64, f64)> {
    let c = params.at_time(t)?;
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for (&p, &w) in c.nodes.iter().zip(&c.weights) {
        let e = w * (p * t).exp();
        s1 += e / p;
        s2 += e / (p * p);
    }
    Ok(((s1 - 1.0).norm(), (s2 - t).norm() / t))
}

fn operators_suite(sc: &Scenario) -> Result<Vec<SuiteCheck>> {
    let op = sc.operator()?;
    let order = sc.order_field()?;
    let params = sc.contour_params(&order);
    let mut checks = Vec::new();

    for t in [0.1, 1.0, 10.0] {
        let (e1, e2) = residue_errors(&params, t)?;
        checks.push(SuiteCheck::at_most(
            format!("residue-1/p-t{t}"),
            e1,
            1e-8,
            "contour sum of e^{tp}/p vs 1",
        ));
        checks.push(SuiteCheck::at_most(
            format!("residue-1/p2-t{t}"),
            e2,
            1e-8,
            "contour sum of e^{tp}/p^2 vs t",
        ));
    }

    let exp = MittagLeffler::new(1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        for k in 0..16 {
            let z = Complex64::from_polar(
                5.0 * i as f64 / 20.0,
                std::f64::consts::TAU * k as f64 / 16.0,
            );
            worst = worst.max((exp.eval(z).value - z.exp()).norm() / z.norm().exp());
        }
    }
    checks.push(SuiteCheck::at_most(
        "ml-exponential",
        worst,
        1e-10,
        "E_{1,1}(z) vs e^z on |z| <= 5",
    ));
    let cosine = MittagLeffler::new(2.0, 1.0)?;
    let worst = (0..=200)
        .map(|i| {
            let t = 0.05 * i as f64;
            (cosine.eval_real(-t * t) - t.cos()).abs()
        })
        .fold(0.0, f64::max);
    checks.push(SuiteCheck::at_most(
        "ml-cosine",
        worst,
        1e-10,
        "E_{2,1}(-t^2) vs cos t on [0, 10]",
    ));

    if is_wave(&order) {
        checks.push(wave_energy_check(sc, &op)?);
        return Ok(checks);
    }

    let h = sc.h_values(&op);
    let hn = op.norm(&h);
    if hn == 0.0 {
        return Err(invalid("operators suite needs a nonzero h"));
    }
    let times = [0.1, 0.5, 1.0, 2.0];
    let mut spread: f64 = 0.0;
    for &t in &times {
        let base = apply_s_contour(&op, &order, &params.at_time(t)?, t, &h)?.value;
        for scale in [0.5, 2.0] {
            let p = ContourParams {
                delta_scale: scale * params.delta_scale,
                ..params
            };
            let v = apply_s_contour(&op, &order, &p.at_time(t)?, t, &h)?.value;
            let d: Vec<f64> = v.iter().zip(&base).map(|(a, b)| a - b).collect();
            spread = spread.max(op.norm(&d) / hn);
        }
    }
    checks.push(SuiteCheck::at_most(
        "contour-delta-independence",
        spread,
        1e-8,
        "delta in {0.5/t, 1/t, 2/t}, t in {0.1, 0.5, 1, 2}",
    ));

    match order {
        OrderField::Constant(alpha) if op.is_self_adjoint() => {
            let eig = op.eigensystem(sc.solver.n_modes.unwrap_or(op.n_dof()))?;
            let mut worst: f64 = 0.0;
            for &t in &times {
                let a = apply_s_spectral(&op, &eig, alpha, t, &h)?.value;
                let b = apply_s_contour(&op, &order, &params.at_time(t)?, t, &h)?.value;
                let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                worst = worst.max(op.norm(&d) / hn);
            }
            checks.push(SuiteCheck::at_most(
                "spectral-vs-contour",
                worst,
                1e-6,
                format!("order {alpha}, t in {{0.1, 0.5, 1, 2}}"),
            ));
        }
        OrderField::Piecewise(_) => {
            let t_grid: Vec<f64> = (0..=24)
                .map(|i| 10f64.powf(-2.0 + i as f64 / 6.0))
                .collect();
            let r = operator_norm_estimate(&op, &order, &t_grid, &params, sc.seed)?;
            checks.push(SuiteCheck::at_most(
                "envelope-violations",
                r.envelope_violations as f64,
                0.0,
                format!("fitted constant {:e}", r.envelope_constant),
            ));
            checks.push(SuiteCheck::at_least(
                "envelope-small-t-slope",
                r.small_t_slope,
                r.exponents.1 - 0.1,
                format!("large-t slope {}", r.large_t_slope),
            ));
        }
        _ => {}
    }
    Ok(checks)
}

/// Relative drift of the energy of the free wave with v_t(0) = rho^{-1} h.
pub fn wave_energy_drift(sc: &Scenario, op: &DiscreteOperator) -> Result<f64> {
    let eig = op.eigensystem(sc.solver.n_modes.unwrap_or(op.n_dof()))?;
    let h = sc.h_values(op);
    let (v, vt) = wave_free(&eig, &h, sc.time_grid()?, op.coords.clone())?;
    let e = wave_energy(op, &v, &vt);
    let e0 = e[0];
    if !(e0 > 0.0) {
        return Err(FracError::Numerical("initial wave energy vanishes".into()));
    }
    Ok(e.iter().map(|x| (x - e0).abs()).fold(0.0, f64::max) / e0)
}

fn wave_energy_check(sc: &Scenario, op: &DiscreteOperator) -> Result<SuiteCheck> {
    Ok(SuiteCheck::at_most(
        "wave-energy",
        wave_energy_drift(sc, op)?,
        1e-8,
        "max relative energy drift of the free wave",
    ))
}

/// sigma_min at the largest over the smallest horizon of the sweep.
pub fn wave_certificate_ratio(sc: &Scenario) -> Result<(f64, Vec<(f64, f64)>)> {
    let op = sc.operator()?;
    let grid = sc.time_grid()?;
    let mu = sc.mu_signal(grid);
    let r = hyperbolic_uniqueness_experiment(
        &op,
        &mu,
        &sc.omega(),
        sc.observation.sensors,
        sc.source.t0,
        &sc.inverse.basis,
        &WAVE_FACTORS,
    )?;
    let sweep: Vec<(f64, f64)> = r.sweep.iter().map(|p| (p.t_end, p.sigma_min)).collect();
    let first = sweep.first().map_or(0.0, |p| p.1);
    let last = sweep.last().map_or(0.0, |p| p.1);
    Ok((
        if first > 0.0 {
            last / first
        } else {
            f64::INFINITY
        },
        sweep,
    ))
}

fn sine_combination(lo: f64, hi: f64, coef: &[f64]) -> Profile {
    Profile::Sum {
        terms: coef
            .iter()
            .enumerate()
            .map(|(k, &scale)| Profile::Sine {
                lo,
                hi,
                mode: k + 1,
                scale,
            })
            .collect(),
    }
}

fn bump(lo: f64, hi: f64, scale: f64) -> Profile {
    Profile::Bump { lo, hi, scale }
}

fn unit_scenario(n: usize) -> Scenario {
    Scenario {
        mesh: MeshSpec {
            n,
            boundary: Boundary::Dirichlet,
            ..MeshSpec::default()
        },
        coefficients: CoefficientSpec::default(),
        ..Scenario::default()
    }
}

/// Reference configurations of the uniqueness experiments.
pub mod reference {
    use super::*;

    /// Recovery of h from a delayed window, constant order. For order 1 the
    /// window starts at zero.
    pub fn delayed_window(alpha: f64) -> Scenario {
        let mut sc = unit_scenario(48);
        sc.experiment = Experiment::InvertH;
        sc.order = OrderSpec::Constant { alpha };
        sc.source = SourceSpec {
            mu: bump(0.0, 0.3, 1.0),
            t0: 0.3,
            h: sine_combination(0.3, 0.7, &[1.0, -0.5, 0.3, 0.2, -0.1, 0.05]),
        };
        sc.observation = ObservationConfig {
            omega: vec![[0.0, 0.3], [0.7, 1.0]],
            t1: if alpha == 1.0 { 0.0 } else { 0.15 },
            t_end: 1.0,
            sensors: 6,
            buffer: vec![],
        };
        sc.solver = SolverSpec {
            method: MethodSpec::Spectral,
            ..SolverSpec::default()
        };
        sc.inverse = InverseSpec {
            basis: SourceBasis::Sine {
                lo: 0.3,
                hi: 0.7,
                count: 6,
            },
        };
        sc
    }

    /// Simultaneous recovery of mu and h; mu is known on (0, T0) only and
    /// has a second pulse after T0.
    pub fn simultaneous() -> Scenario {
        let mut sc = delayed_window(0.5);
        sc.experiment = Experiment::InvertMuH;
        sc.source.mu = Profile::Sum {
            terms: vec![bump(0.1, 0.4, 1.0), bump(0.8, 1.1, 0.8)],
        };
        sc.source.t0 = 0.5;
        sc.observation.t1 = 0.1;
        sc.observation.t_end = 1.5;
        sc
    }

    /// Two order subdomains split at x = 0.5 with the interface inside the
    /// buffer (0.45, 0.55); omega = (0.5, 0.6) meets the buffer.
    pub fn variable_order() -> Scenario {
        let mut sc = unit_scenario(48);
        sc.experiment = Experiment::InvertH;
        sc.order = OrderSpec::Piecewise {
            breaks: vec![0.5],
            alphas: vec![0.4, 0.55],
        };
        sc.source = SourceSpec {
            mu: bump(0.0, 0.3, 1.0),
            t0: 0.3,
            h: sine_combination(0.05, 0.3, &[1.0, -0.5, 0.3, 0.2]),
        };
        sc.observation = ObservationConfig {
            omega: vec![[0.5, 0.6]],
            t1: 0.15,
            t_end: 1.0,
            sensors: 3,
            buffer: vec![[0.45, 0.55]],
        };
        sc.solver = SolverSpec {
            method: MethodSpec::Contour,
            ..SolverSpec::default()
        };
        sc.inverse = InverseSpec {
            basis: SourceBasis::Sine {
                lo: 0.05,
                hi: 0.3,
                count: 4,
            },
        };
        sc
    }

    /// Broken variants of `variable_order`, each with the condition it breaks.
    pub fn broken_geometries() -> Vec<(Condition, Scenario)> {
        let base = variable_order();
        let mut interface_outside = base.clone();
        interface_outside.observation.buffer = vec![[0.6, 0.7]];
        interface_outside.observation.omega = vec![[0.65, 0.75]];
        let mut omega_off_buffer = base.clone();
        omega_off_buffer.observation.omega = vec![[0.7, 0.8]];
        let mut spread = base;
        spread.order = OrderSpec::Piecewise {
            breaks: vec![0.5],
            alphas: vec![0.3, 0.7],
        };
        vec![
            (Condition::InterfaceBuffer, interface_outside),
            (Condition::ObservationBuffer, omega_off_buffer),
            (Condition::VariableOrder, spread),
        ]
    }

    /// Wave equation with c = 0, observed on (0.8, 1); the control time is
    /// T* = T0 + 0.8 = 0.9 and the sweep reaches 1.5 T*.
    pub fn wave() -> Scenario {
        let mut sc = unit_scenario(64);
        sc.experiment = Experiment::InvertH;
        sc.coefficients.c = Profile::constant(0.0);
        sc.coefficients.allow_zero_c = true;
        sc.order = OrderSpec::Constant { alpha: 2.0 };
        sc.source = SourceSpec {
            mu: bump(0.0, 0.1, 1.0),
            t0: 0.1,
            h: bump(0.2, 0.6, 1.0),
        };
        sc.observation = ObservationConfig {
            omega: vec![[0.8, 1.0]],
            t1: 0.0,
            t_end: 1.35,
            sensors: 3,
            buffer: vec![],
        };
        sc.solver = SolverSpec {
            method: MethodSpec::Spectral,
            t_end: Some(1.5),
            ..SolverSpec::default()
        };
        sc.inverse = InverseSpec {
            basis: SourceBasis::Hats {
                lo: 0.0,
                hi: 1.0,
                count: 8,
            },
        };
        sc
    }
}

fn recovery_checks(label: &str, sc: &Scenario, checks: &mut Vec<SuiteCheck>) -> Result<()> {
    sc.validate()?;
    let outcome = sc.compute()?;
    let report = outcome
        .report()
        .ok_or_else(|| invalid("reference scenario is not an inverse experiment"))?;
    checks.push(SuiteCheck::at_most(
        format!("{label}-h-error"),
        report.h_error.unwrap_or(f64::INFINITY),
        if sc.order_field()?.is_constant() {
            1e-2
        } else {
            2e-2
        },
        format!("rank {}/{}", report.rank, report.n_basis),
    ));
    checks.push(SuiteCheck::at_least(
        format!("{label}-certificate"),
        report.certificate,
        f64::MIN_POSITIVE,
        "smallest retained singular value",
    ));
    if let Some(e) = report.mu_error {
        checks.push(SuiteCheck::at_most(
            format!("{label}-mu-error"),
            e,
            5e-2,
            "relative L1 on (0, T)",
        ));
    }
    Ok(())
}

fn theorems_suite() -> Result<Vec<SuiteCheck>> {
    let mut checks = Vec::new();
    recovery_checks(
        "delayed-window",
        &reference::delayed_window(0.5),
        &mut checks,
    )?;
    recovery_checks("order-one", &reference::delayed_window(1.0), &mut checks)?;
    recovery_checks("simultaneous", &reference::simultaneous(), &mut checks)?;
    recovery_checks("variable-order", &reference::variable_order(), &mut checks)?;
    for (cond, sc) in reference::broken_geometries() {
        let (v, _) = sc.check()?;
        checks.push(SuiteCheck::flag(
            format!("reject-{}", cond.tag()),
            v.iter().any(|x| x.condition == cond),
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let wave = reference::wave();
    wave.validate()?;
    checks.push(wave_energy_check(&wave, &wave.operator()?)?);
    let (ratio, sweep) = wave_certificate_ratio(&wave)?;
    checks.push(SuiteCheck::at_least(
        "wave-certificate-growth",
        ratio,
        10.0,
        format!("(T, sigma_min) = {sweep:?}"),
    ));
    Ok(checks)
}

/// Runs a suite and writes `suite.json`, `checks.csv` and the manifest.
pub fn run_verify(suite: Suite, sc: &Scenario, out: &Path) -> Result<RunManifest> {
    run_validated(sc, out, &format!("verify-{}", suite.name()), |w| {
        let report = run_suite(suite, sc)?;
        w.write("suite.json", &json_text(&report)?)?;
        let mut csv = String::from("name,passed,value,tolerance\n");
        for c in &report.checks {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                c.name, c.passed, c.value, c.tolerance
            ));
        }
        w.write("checks.csv", &csv)?;
        Ok(report.passed)
    })
}
