//! Uniform time grids, sampled signals and fractional calculus.
//!
//! Signals are treated as piecewise linear between samples. Convolutions
//! against a kernel are integrated exactly for that model through the first
//! two primitives of the kernel (product integration), so the only
//! discretization error comes from the interpolation of the signal.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::special::{rgamma, MittagLeffler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_end > 0.0) {
            return Err(invalid(format!(
                "time grid needs dt > 0 and t_end > 0 (got {dt}, {t_end})"
            )));
        }
        let steps = (t_end / dt).round() as usize;
        if steps == 0 || ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end {
            return Err(invalid(format!(
                "t_end = {t_end} is not a multiple of dt = {dt}"
            )));
        }
        Ok(Self { dt, steps })
    }

    pub fn with_steps(dt: f64, steps: usize) -> Self {
        Self { dt, steps }
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.steps)
    }

    pub fn n_points(&self) -> usize {
        self.steps + 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.t(j)).collect()
    }

    pub fn refined(&self) -> Self {
        Self {
            dt: 0.5 * self.dt,
            steps: 2 * self.steps,
        }
    }

    /// Index of the sample nearest to `t`, clamped to the grid.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.steps)
    }
}

/// Samples of a scalar function on a time grid. `t0` marks the end of the
/// interval where the signal is known a priori, when that matters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSignal {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub t0: Option<f64>,
}

impl TimeSignal {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(invalid(format!(
                "signal has {} samples, grid has {}",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self {
            grid,
            values,
            t0: None,
        })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.times().into_iter().map(f).collect(),
            t0: None,
        }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::from_fn(grid, |_| 0.0)
    }

    /// Piecewise-linear interpolation; zero beyond the last sample.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.grid.t_end() * (1.0 + 1e-12) {
            return 0.0;
        }
        let s = (t / self.grid.dt).min(self.grid.steps as f64);
        let i = (s.floor() as usize).min(self.grid.steps.saturating_sub(1));
        let f = s - i as f64;
        self.values[i] * (1.0 - f) + self.values[(i + 1).min(self.grid.steps)] * f
    }

    /// Resamples on a finer grid by linear interpolation.
    pub fn resample(&self, grid: TimeGrid) -> Self {
        Self {
            grid,
            values: grid.times().into_iter().map(|t| self.value_at(t)).collect(),
            t0: self.t0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid L1 norm.
    pub fn l1_norm(&self) -> f64 {
        trapezoid(
            &self.values.iter().map(|v| v.abs()).collect::<Vec<_>>(),
            self.grid.dt,
        )
    }

    /// First and last times where |f| exceeds `rel_threshold * max|f|`.
    pub fn support(&self, rel_threshold: f64) -> Option<(f64, f64)> {
        let m = self.max_abs();
        if m == 0.0 {
            return None;
        }
        let cut = rel_threshold * m;
        let first = self.values.iter().position(|v| v.abs() > cut)?;
        let last = self.values.iter().rposition(|v| v.abs() > cut)?;
        Some((self.grid.t(first), self.grid.t(last)))
    }
}

pub(crate) fn trapezoid(v: &[f64], dt: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    dt * (inner + 0.5 * (v[0] + v[v.len() - 1]))
}

/// First and second primitives K1(s) = int_0^s K, K2(s) = int_0^s K1 of a
/// kernel with `n_comp` components, sampled at s = m dt for m = 0..=M.
#[derive(Debug, Clone)]
pub struct KernelPrimitives {
    pub grid: TimeGrid,
    pub n_comp: usize,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

/// Product-integration weights derived from kernel primitives.
#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    pub grid: TimeGrid,
    pub n_comp: usize,
    /// Weight of the newest sample (lag 0).
    pub w0: Vec<f64>,
    /// Interior weights by lag m = 1..M (index m).
    pub interior: Vec<f64>,
    /// Weight of the first sample at step j (index j).
    pub start: Vec<f64>,
}

impl KernelPrimitives {
    pub fn new(grid: TimeGrid, n_comp: usize, k1: Vec<f64>, k2: Vec<f64>) -> Result<Self> {
        let len = grid.n_points() * n_comp;
        if k1.len() != len || k2.len() != len {
            return Err(invalid("kernel primitive tables do not match the grid"));
        }
        Ok(Self {
            grid,
            n_comp,
            k1,
            k2,
        })
    }

    pub fn scalar(grid: TimeGrid, k1: impl Fn(f64) -> f64, k2: impl Fn(f64) -> f64) -> Self {
        let t = grid.times();
        Self {
            grid,
            n_comp: 1,
            k1: t.iter().map(|&s| k1(s)).collect(),
            k2: t.iter().map(|&s| k2(s)).collect(),
        }
    }

    /// Restriction to one component, paired against `pair` when given.
    pub fn paired(&self, pair: &[f64]) -> KernelPrimitives {
        let n = self.n_comp;
        let dot = |v: &[f64], m: usize| -> f64 {
            v[m * n..(m + 1) * n]
                .iter()
                .zip(pair)
                .map(|(a, b)| a * b)
                .sum()
        };
        let np = self.grid.n_points();
        KernelPrimitives {
            grid: self.grid,
            n_comp: 1,
            k1: (0..np).map(|m| dot(&self.k1, m)).collect(),
            k2: (0..np).map(|m| dot(&self.k2, m)).collect(),
        }
    }

    pub fn weights(&self) -> ConvolutionWeights {
        let n = self.n_comp;
        let dt = self.grid.dt;
        let mm = self.grid.steps;
        let k1 = |m: usize, c: usize| self.k1[m * n + c];
        let k2 = |m: usize, c: usize| self.k2[m * n + c];
        let mut w0 = vec![0.0; n];
        let mut interior = vec![0.0; (mm + 1) * n];
        let mut start = vec![0.0; (mm + 1) * n];
        for c in 0..n {
            w0[c] = k2(1, c) / dt;
            for m in 1..mm {
                interior[m * n + c] = (k2(m + 1, c) - 2.0 * k2(m, c) + k2(m - 1, c)) / dt;
            }
            for j in 1..=mm {
                start[j * n + c] = k1(j, c) - (k2(j, c) - k2(j - 1, c)) / dt;
            }
        }
        ConvolutionWeights {
            grid: self.grid,
            n_comp: n,
            w0,
            interior,
            start,
        }
    }
}

impl ConvolutionWeights {
    /// u(t_j) = int_0^{t_j} K(t_j - s) mu(s) ds for piecewise-linear mu.
    /// Returns a row-major (M + 1) x n_comp array. Zero samples of mu are
    /// skipped, so the output vanishes exactly before the first nonzero one.
    pub fn convolve(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.n_comp;
        let mm = self.grid.steps;
        assert_eq!(
            mu.len(),
            mm + 1,
            "signal length does not match the kernel grid"
        );
        let mut out = vec![0.0; (mm + 1) * n];
        for j in 1..=mm {
            let row = &mut out[j * n..(j + 1) * n];
            if mu[j] != 0.0 {
                for c in 0..n {
                    row[c] += mu[j] * self.w0[c];
                }
            }
            if mu[0] != 0.0 {
                for c in 0..n {
                    row[c] += mu[0] * self.start[j * n + c];
                }
            }
        }
        for k in 1..mm {
            let m = mu[k];
            if m == 0.0 {
                continue;
            }
            for j in k + 1..=mm {
                let lag = j - k;
                let w = &self.interior[lag * n..(lag + 1) * n];
                let row = &mut out[j * n..(j + 1) * n];
                for c in 0..n {
                    row[c] += m * w[c];
                }
            }
        }
        out
    }

    /// Scalar weights of the pairing of every component with `pair`.
    pub fn paired(&self, pair: &[f64]) -> ConvolutionWeights {
        let n = self.n_comp;
        assert_eq!(pair.len(), n);
        let dot = |v: &[f64]| -> Vec<f64> {
            v.chunks(n)
                .map(|c| c.iter().zip(pair).map(|(a, b)| a * b).sum())
                .collect()
        };
        ConvolutionWeights {
            grid: self.grid,
            n_comp: 1,
            w0: dot(&self.w0),
            interior: dot(&self.interior),
            start: dot(&self.start),
        }
    }

    /// Coefficient of mu_k in u(t_j) for a scalar kernel.
    pub fn coefficient(&self, j: usize, k: usize) -> f64 {
        assert_eq!(self.n_comp, 1);
        if j == 0 || k > j {
            0.0
        } else if k == j {
            self.w0[0]
        } else if k == 0 {
            self.start[j]
        } else {
            self.interior[j - k]
        }
    }
}

fn check_order(beta: f64, max: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= max) {
        return Err(invalid(format!(
            "fractional order {beta} outside (0, {max}]"
        )));
    }
    Ok(())
}

/// Riemann–Liouville integral I^beta f, exact for the piecewise-linear
/// interpolant of `f`. `beta = 0` is the identity.
pub fn rl_integral(f: &TimeSignal, beta: f64) -> Result<TimeSignal> {
    if beta == 0.0 {
        return Ok(f.clone());
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!(
            "integration order {beta} must be non-negative"
        )));
    }
    let g1 = rgamma(beta + 1.0);
    let g2 = rgamma(beta + 2.0);
    let prim = KernelPrimitives::scalar(f.grid, |s| s.powf(beta) * g1, |s| s.powf(beta + 1.0) * g2);
    let values = prim.weights().convolve(&f.values);
    Ok(TimeSignal {
        grid: f.grid,
        values,
        t0: f.t0,
    })
}

fn first_difference(g: &[f64], dt: f64) -> Vec<f64> {
    let n = g.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            d[0] = (g[1] - g[0]) / dt;
            d[1] = d[0];
        }
        return d;
    }
    d[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * dt);
    for i in 1..n - 1 {
        d[i] = (g[i + 1] - g[i - 1]) / (2.0 * dt);
    }
    d[n - 1] = (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * dt);
    d
}

fn second_difference(g: &[f64], dt: f64) -> Vec<f64> {
    let n = g.len();
    let mut d = vec![0.0; n];
    if n < 4 {
        return d;
    }
    let dt2 = dt * dt;
    d[0] = (2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / dt2;
    for i in 1..n - 1 {
        d[i] = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / dt2;
    }
    d[n - 1] = (2.0 * g[n - 1] - 5.0 * g[n - 2] + 4.0 * g[n - 3] - g[n - 4]) / dt2;
    d
}

/// Riemann–Liouville derivative d^n/dt^n I^{n - beta} f, n = ceil(beta).
pub fn rl_derivative(f: &TimeSignal, beta: f64) -> Result<TimeSignal> {
    check_order(beta, 2.0)?;
    let n = beta.ceil();
    let g = rl_integral(f, n - beta)?;
    let values = if n == 1.0 {
        first_difference(&g.values, f.grid.dt)
    } else {
        second_difference(&g.values, f.grid.dt)
    };
    Ok(TimeSignal {
        grid: f.grid,
        values,
        t0: f.t0,
    })
}

fn l1_sum(v: &[f64], beta: f64, dt: f64) -> Vec<f64> {
    let n = v.len();
    let b: Vec<f64> = (0..n)
        .map(|m| ((m + 1) as f64).powf(1.0 - beta) - (m as f64).powf(1.0 - beta))
        .collect();
    let scale = dt.powf(-beta) * rgamma(2.0 - beta);
    let diffs: Vec<f64> = (0..n - 1).map(|k| v[k + 1] - v[k]).collect();
    (0..n)
        .map(|j| scale * (0..j).map(|k| b[j - k - 1] * diffs[k]).sum::<f64>())
        .collect()
}

/// Caputo derivative by the L1 scheme for beta in (0, 1); for beta in
/// (1, 2) the L1 scheme of order beta - 1 is applied to the sampled slope.
/// `initial_slope` is f'(0), only used when beta > 1.
pub fn caputo_derivative(f: &TimeSignal, beta: f64, initial_slope: f64) -> Result<TimeSignal> {
    check_order(beta, 2.0)?;
    let dt = f.grid.dt;
    let v = &f.values;
    let values = if beta == 1.0 {
        first_difference(v, dt)
    } else if beta == 2.0 {
        second_difference(v, dt)
    } else if beta < 1.0 {
        l1_sum(v, beta, dt)
    } else {
        // D^beta f = D^{beta-1} f' with the slope sampled at the nodes
        let mut g = first_difference(v, dt);
        g[0] = initial_slope;
        l1_sum(&g, beta - 1.0, dt)
    };
    Ok(TimeSignal {
        grid: f.grid,
        values,
        t0: f.t0,
    })
}

/// Solution of (D^beta + lambda) w = h with zero initial data, by product
/// integration of the Mittag-Leffler kernel s^{beta-1} E_{beta,beta}(-lambda s^beta).
pub fn relaxation_solution(h: &TimeSignal, beta: f64, lambda: f64) -> Result<TimeSignal> {
    check_order(beta, 2.0)?;
    let e1 = MittagLeffler::new(beta, beta + 1.0)?;
    let e2 = MittagLeffler::new(beta, beta + 2.0)?;
    let prim = KernelPrimitives::scalar(
        h.grid,
        |s| {
            let sb = s.powf(beta);
            sb * e1.eval_real(-lambda * sb)
        },
        |s| {
            let sb = s.powf(beta);
            s * sb * e2.eval_real(-lambda * sb)
        },
    );
    Ok(TimeSignal {
        grid: h.grid,
        values: prim.weights().convolve(&h.values),
        t0: h.t0,
    })
}

/// Smooth compactly supported bump exp(-1/(1-s^2)), s = (t - c)/r, and its
/// first two derivatives in t.
pub fn bump_with_derivatives(t: f64, c: f64, r: f64) -> (f64, f64, f64) {
    let s = (t - c) / r;
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let v = (-1.0 / q).exp();
    let g1 = -2.0 * s / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
    (v, v * g1 / r, v * (g1 * g1 + g2) / (r * r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationCheck {
    /// Largest normalized weak residual on the base grid.
    pub residual: f64,
    /// Same on the refined grid.
    pub residual_refined: f64,
    /// log2 of the residual ratio between the two grids.
    pub rate: f64,
}

fn weak_residual(h: &TimeSignal, beta: f64, lambda: f64) -> Result<f64> {
    let w = relaxation_solution(h, beta, lambda)?;
    let n = beta.ceil();
    let iw = rl_integral(&w, n - beta)?;
    let grid = h.grid;
    let t_end = grid.t_end();
    let dt = grid.dt;
    let scale = h.l1_norm().max(1e-300);
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        let c = t_end * (0.2 + 0.15 * i as f64);
        let r = 0.12 * t_end;
        let mut a = Vec::with_capacity(grid.n_points());
        for j in 0..grid.n_points() {
            let (chi, d1, d2) = bump_with_derivatives(grid.t(j), c, r);
            let deriv = if n == 1.0 {
                -iw.values[j] * d1
            } else {
                iw.values[j] * d2
            };
            a.push(deriv + lambda * w.values[j] * chi - h.values[j] * chi);
        }
        worst = worst.max(trapezoid(&a, dt).abs() / scale);
    }
    Ok(worst)
}

/// Weak-form residual of the relaxation equation against five smooth test
/// bumps, on the given grid and on its refinement.
pub fn verify_relaxation_ode(h: &TimeSignal, beta: f64, lambda: f64) -> Result<RelaxationCheck> {
    check_order(beta, 2.0)?;
    let coarse = weak_residual(h, beta, lambda)?;
    let fine = weak_residual(&h.resample(h.grid.refined()), beta, lambda)?;
    Ok(RelaxationCheck {
        residual: coarse,
        residual_refined: fine,
        rate: (coarse / fine).log2(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    fn power(grid: TimeGrid, g: f64) -> TimeSignal {
        TimeSignal::from_fn(grid, |t| t.powf(g))
    }

    fn max_err(a: &TimeSignal, exact: impl Fn(f64) -> f64, from: f64) -> f64 {
        a.grid
            .times()
            .iter()
            .zip(&a.values)
            .filter(|(t, _)| **t >= from)
            .map(|(t, v)| (v - exact(*t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_rejects_mismatched_end() {
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert_eq!(TimeGrid::new(1.0, 0.25).unwrap().steps, 4);
    }

    #[test]
    fn rl_integral_of_linear_is_exact() {
        let grid = TimeGrid::new(1.0, 0.05).unwrap();
        let f = power(grid, 1.0);
        let beta = 0.7;
        let out = rl_integral(&f, beta).unwrap();
        let c = gamma(2.0).unwrap() / gamma(2.0 + beta).unwrap();
        assert!(max_err(&out, |t| c * t.powf(1.0 + beta), 0.0) < 1e-14);
    }

    #[test]
    fn rl_integral_power_law_rate() {
        let beta = 0.5;
        let c = gamma(3.0).unwrap() / gamma(3.0 + beta).unwrap();
        let errs: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dt| {
                let grid = TimeGrid::new(1.0, dt).unwrap();
                max_err(
                    &rl_integral(&power(grid, 2.0), beta).unwrap(),
                    |t| c * t.powf(2.5),
                    0.0,
                )
            })
            .collect();
        let rate = (errs[1] / errs[2]).log2();
        assert!(rate > 1.8, "rate {rate}");
    }

    #[test]
    fn convolution_is_causal_bitwise() {
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let f = TimeSignal::from_fn(grid, |t| if t >= 0.3 { (t - 0.3).sin() + 1.0 } else { 0.0 });
        let out = rl_integral(&f, 0.4).unwrap();
        for (t, v) in grid.times().iter().zip(&out.values) {
            if *t < 0.3 - 1e-12 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn caputo_l1_rate() {
        let beta = 0.5;
        let c = gamma(3.0).unwrap() / gamma(3.0 - beta).unwrap();
        let errs: Vec<f64> = [0.01, 0.005, 0.0025]
            .iter()
            .map(|&dt| {
                let grid = TimeGrid::new(1.0, dt).unwrap();
                let d = caputo_derivative(&power(grid, 2.0), beta, 0.0).unwrap();
                max_err(&d, |t| c * t.powf(2.0 - beta), 0.0)
            })
            .collect();
        let rate = (errs[1] / errs[2]).log2();
        assert!(rate > 0.9 * (2.0 - beta), "rate {rate}");
    }

    #[test]
    fn caputo_high_order_rate() {
        let beta = 1.5;
        let c = gamma(4.0).unwrap() / gamma(4.0 - beta).unwrap();
        let errs: Vec<f64> = [0.01, 0.005, 0.0025]
            .iter()
            .map(|&dt| {
                let grid = TimeGrid::new(1.0, dt).unwrap();
                let d = caputo_derivative(&power(grid, 3.0), beta, 0.0).unwrap();
                max_err(&d, |t| c * t.powf(3.0 - beta), 0.0)
            })
            .collect();
        let rate = (errs[1] / errs[2]).log2();
        assert!(rate > 0.9 * (3.0 - beta), "rate {rate}");
    }

    #[test]
    fn relaxation_first_order_matches_exponential() {
        let grid = TimeGrid::new(2.0, 0.01).unwrap();
        let h = TimeSignal::from_fn(grid, |_| 1.0);
        let w = relaxation_solution(&h, 1.0, 1.0).unwrap();
        assert!(max_err(&w, |t| 1.0 - (-t).exp(), 0.0) < 1e-13);
    }

    #[test]
    fn relaxation_weak_residual_small() {
        let grid = TimeGrid::new(1.0, 0.005).unwrap();
        let h = TimeSignal::from_fn(grid, |t| (3.0 * t).sin() + t * t);
        let chk = verify_relaxation_ode(&h, 0.6, 3.0).unwrap();
        assert!(chk.residual < 1e-4, "{chk:?}");
        assert!(chk.rate > 0.9, "{chk:?}");
        let zero = verify_relaxation_ode(&TimeSignal::zeros(grid), 0.6, 3.0).unwrap();
        assert_eq!(zero.residual, 0.0);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let (c, r) = (0.5, 0.2);
        for &t in &[0.35, 0.42, 0.5, 0.61] {
            let e = 1e-5;
            let (_, d1, d2) = bump_with_derivatives(t, c, r);
            let fd1 = (bump_with_derivatives(t + e, c, r).0 - bump_with_derivatives(t - e, c, r).0)
                / (2.0 * e);
            let fd2 = (bump_with_derivatives(t + e, c, r).1 - bump_with_derivatives(t - e, c, r).1)
                / (2.0 * e);
            assert!((d1 - fd1).abs() < 1e-6 * d1.abs().max(1.0));
            assert!((d2 - fd2).abs() < 1e-5 * d2.abs().max(1.0));
        }
    }
}
