//! Forward problems: the Duhamel representation u = mu * S rho^{-1} h, a
//! direct L1 time-stepper, the wave case, and Laplace-domain checks of the
//! weak formulation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, FracError, Result};
use crate::fractional::{ConvolutionWeights, KernelPrimitives, TimeGrid, TimeSignal};
use crate::grid::{DiscreteOperator, EigenSystem};
use crate::linalg::Tridiagonal;
use crate::operators::{ContourOperator, ContourParams, KernelTerms, OrderField};
use crate::special::{rgamma, MittagLeffler};

/// Nodal values at every time sample, stored row by row in time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeField {
    pub grid: TimeGrid,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: TimeGrid, coords: Vec<f64>) -> Self {
        let n = coords.len();
        Self {
            grid,
            values: vec![0.0; grid.n_points() * n],
            coords,
        }
    }

    pub fn n_dof(&self) -> usize {
        self.coords.len()
    }

    pub fn at(&self, j: usize) -> &[f64] {
        let n = self.n_dof();
        &self.values[j * n..(j + 1) * n]
    }

    /// Time series of the pairing sum_i pair_i u_i(t).
    pub fn pair(&self, pair: &[f64]) -> TimeSignal {
        let values = (0..self.grid.n_points())
            .map(|j| self.at(j).iter().zip(pair).map(|(a, b)| a * b).sum())
            .collect();
        TimeSignal {
            grid: self.grid,
            values,
            t0: None,
        }
    }

    /// First time at which the field is not identically zero.
    pub fn causal_onset(&self) -> Option<f64> {
        (0..self.grid.n_points())
            .find(|&j| self.at(j).iter().any(|&v| v != 0.0))
            .map(|j| self.grid.t(j))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// How the solution operator is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DuhamelMethod {
    /// Eigen-expansion with the given number of modes (all when `None`).
    Spectral {
        n_modes: Option<usize>,
    },
    Contour(ContourParams),
}

/// Kernel s -> S(s) rho^{-1} h, stored through its product-integration weights.
#[derive(Debug, Clone)]
pub struct DuhamelKernel {
    pub primitives: KernelPrimitives,
    pub weights: ConvolutionWeights,
    pub coords: Vec<f64>,
}

impl DuhamelKernel {
    fn from_primitives(primitives: KernelPrimitives, coords: Vec<f64>) -> Self {
        let weights = primitives.weights();
        Self {
            primitives,
            weights,
            coords,
        }
    }

    /// u = mu * S rho^{-1} h for piecewise-linear mu.
    pub fn convolve(&self, mu: &TimeSignal) -> Result<SpaceTimeField> {
        if mu.grid != self.weights.grid {
            return Err(invalid("source profile grid differs from the kernel grid"));
        }
        Ok(SpaceTimeField {
            grid: mu.grid,
            coords: self.coords.clone(),
            values: self.weights.convolve(&mu.values),
        })
    }

    /// Scalar kernel of the pairing with `pair` (e.g. quadrature-weighted sensor).
    pub fn paired(&self, pair: &[f64]) -> ConvolutionWeights {
        self.weights.paired(pair)
    }
}

fn spectral_mode_tables(
    eig: &EigenSystem,
    alpha: f64,
    grid: TimeGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let e1 = MittagLeffler::new(alpha, alpha + 1.0)?;
    let e2 = MittagLeffler::new(alpha, alpha + 2.0)?;
    let nm = eig.n_modes();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.n_points())
        .into_par_iter()
        .map(|m| {
            let s = grid.t(m);
            let sa = s.powf(alpha);
            let mut a = vec![0.0; nm];
            let mut b = vec![0.0; nm];
            if m > 0 {
                for (n, &lam) in eig.values.iter().enumerate() {
                    let z = -lam * sa;
                    a[n] = sa * e1.eval_real(z);
                    b[n] = s * sa * e2.eval_real(z);
                }
            }
            (a, b)
        })
        .collect();
    let mut t1 = Vec::with_capacity(grid.n_points() * nm);
    let mut t2 = Vec::with_capacity(grid.n_points() * nm);
    for (a, b) in rows {
        t1.extend(a);
        t2.extend(b);
    }
    Ok((t1, t2))
}

fn combine_modes(eig: &EigenSystem, table: &[f64], coef: &[f64], np: usize) -> Vec<f64> {
    let nm = eig.n_modes();
    let n = eig.n_dof();
    let mut out = vec![0.0; np * n];
    let mut c = vec![0.0; nm];
    for m in 0..np {
        for k in 0..nm {
            c[k] = table[m * nm + k] * coef[k];
        }
        let row = eig.synthesize(&c);
        out[m * n..(m + 1) * n].copy_from_slice(&row);
    }
    out
}

/// Duhamel kernels for several spatial profiles sharing one operator. The
/// contour path factors each resolvent once and reuses it for every profile.
pub fn duhamel_kernels(
    op: &DiscreteOperator,
    order: &OrderField,
    profiles: &[Vec<f64>],
    grid: TimeGrid,
    method: DuhamelMethod,
) -> Result<Vec<DuhamelKernel>> {
    let n = op.n_dof();
    if profiles.iter().any(|h| h.len() != n) {
        return Err(FracError::Shape(
            "profile length does not match the operator".into(),
        ));
    }
    order.validate(&op.mesh)?;
    let np = grid.n_points();
    match method {
        DuhamelMethod::Spectral { n_modes } => {
            if !order.is_constant() {
                return Err(invalid("the spectral path needs a constant order"));
            }
            let alpha = order.min();
            let eig = op.eigensystem(n_modes.unwrap_or(n))?;
            let (t1, t2) = spectral_mode_tables(&eig, alpha, grid)?;
            profiles
                .iter()
                .map(|h| {
                    let c = eig.project_source(h);
                    let k1 = combine_modes(&eig, &t1, &c, np);
                    let k2 = combine_modes(&eig, &t2, &c, np);
                    Ok(DuhamelKernel::from_primitives(
                        KernelPrimitives::new(grid, n, k1, k2)?,
                        op.coords.clone(),
                    ))
                })
                .collect()
        }
        DuhamelMethod::Contour(params) => {
            let dt = grid.dt;
            let rows: Vec<Result<Vec<KernelTerms>>> = (1..np)
                .into_par_iter()
                .map(|m| {
                    let s = grid.t(m);
                    let contour = params.at_time(s)?;
                    let cop = ContourOperator::new(op, order, &contour, s)?;
                    Ok(profiles.iter().map(|h| cop.kernel_terms(h, dt)).collect())
                })
                .collect();
            let rows: Vec<Vec<KernelTerms>> = rows.into_iter().collect::<Result<_>>()?;
            let mut out = Vec::with_capacity(profiles.len());
            for p in 0..profiles.len() {
                let mut k1 = vec![0.0; np * n];
                let mut k2 = vec![0.0; np * n];
                let mut interior = vec![0.0; np * n];
                let mut start = vec![0.0; np * n];
                for m in 1..np {
                    let terms = &rows[m - 1][p];
                    k1[m * n..(m + 1) * n].copy_from_slice(&terms.k1);
                    k2[m * n..(m + 1) * n].copy_from_slice(&terms.k2);
                    if m >= 2 {
                        interior[m * n..(m + 1) * n].copy_from_slice(&terms.hat);
                        start[m * n..(m + 1) * n].copy_from_slice(&terms.ramp);
                    }
                }
                // the first lag reaches back to s = 0, where the Laplace-side
                // formulas lose their decay; fall back to the primitives there
                for c in 0..n {
                    start[n + c] = k1[n + c] - k2[n + c] / dt;
                    if np > 2 {
                        interior[n + c] = (k2[2 * n + c] - 2.0 * k2[n + c]) / dt;
                    }
                }
                let w0 = k2[n..2 * n].iter().map(|v| v / dt).collect();
                let primitives = KernelPrimitives::new(grid, n, k1, k2)?;
                let weights = ConvolutionWeights {
                    grid,
                    n_comp: n,
                    w0,
                    interior,
                    start,
                };
                out.push(DuhamelKernel {
                    primitives,
                    weights,
                    coords: op.coords.clone(),
                });
            }
            Ok(out)
        }
    }
}

pub fn duhamel_kernel(
    op: &DiscreteOperator,
    order: &OrderField,
    h: &[f64],
    grid: TimeGrid,
    method: DuhamelMethod,
) -> Result<DuhamelKernel> {
    Ok(duhamel_kernels(op, order, &[h.to_vec()], grid, method)?.remove(0))
}

/// u(t) = int_0^t mu(t - s) S(s) rho^{-1} h ds.
pub fn duhamel_solve(
    op: &DiscreteOperator,
    order: &OrderField,
    mu: &TimeSignal,
    h: &[f64],
    method: DuhamelMethod,
) -> Result<SpaceTimeField> {
    duhamel_kernel(op, order, h, mu.grid, method)?.convolve(mu)
}

/// x - sin x without cancellation for small x.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut term = x * x2 / 6.0;
        let mut sum = 0.0;
        for k in 0..8 {
            sum += term;
            let a = (2 * k + 4) as f64;
            term *= -x2 / (a * (a + 1.0));
        }
        sum
    } else {
        x - x.sin()
    }
}

/// Kernel v with rho v'' + L v = 0, v(0) = 0, v'(0) = rho^{-1} h, from the
/// eigen-expansion with closed-form primitives.
pub fn wave_kernel(
    eig: &EigenSystem,
    h: &[f64],
    grid: TimeGrid,
    coords: Vec<f64>,
) -> Result<DuhamelKernel> {
    let n = eig.n_dof();
    if h.len() != n {
        return Err(FracError::Shape(
            "profile length does not match the eigensystem".into(),
        ));
    }
    let c = eig.project_source(h);
    let np = grid.n_points();
    let nm = eig.n_modes();
    let mut t1 = vec![0.0; np * nm];
    let mut t2 = vec![0.0; np * nm];
    for m in 0..np {
        let s = grid.t(m);
        for (k, &lam) in eig.values.iter().enumerate() {
            let w = lam.max(0.0).sqrt();
            let (a, b) = if w * s < 1e-8 {
                (0.5 * s * s, s * s * s / 6.0)
            } else {
                let half = (0.5 * w * s).sin();
                (
                    2.0 * half * half / (w * w),
                    x_minus_sin(w * s) / (w * w * w),
                )
            };
            t1[m * nm + k] = a;
            t2[m * nm + k] = b;
        }
    }
    let k1 = combine_modes(eig, &t1, &c, np);
    let k2 = combine_modes(eig, &t2, &c, np);
    Ok(DuhamelKernel::from_primitives(
        KernelPrimitives::new(grid, n, k1, k2)?,
        coords,
    ))
}

/// Free wave v and its velocity, for energy checks.
pub fn wave_free(
    eig: &EigenSystem,
    h: &[f64],
    grid: TimeGrid,
    coords: Vec<f64>,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    if h.len() != eig.n_dof() {
        return Err(FracError::Shape(
            "profile length does not match the eigensystem".into(),
        ));
    }
    let c = eig.project_source(h);
    let mut v = SpaceTimeField::zeros(grid, coords.clone());
    let mut vt = SpaceTimeField::zeros(grid, coords);
    let n = eig.n_dof();
    for j in 0..grid.n_points() {
        let t = grid.t(j);
        let mut a = vec![0.0; c.len()];
        let mut b = vec![0.0; c.len()];
        for (k, &lam) in eig.values.iter().enumerate() {
            let w = lam.max(0.0).sqrt();
            a[k] = if w == 0.0 {
                c[k] * t
            } else {
                c[k] * (w * t).sin() / w
            };
            b[k] = c[k] * (w * t).cos();
        }
        v.values[j * n..(j + 1) * n].copy_from_slice(&eig.synthesize(&a));
        vt.values[j * n..(j + 1) * n].copy_from_slice(&eig.synthesize(&b));
    }
    Ok((v, vt))
}

/// Energy (rho v_t, v_t)/2 + (L v, v)/2 at every time sample.
pub fn wave_energy(op: &DiscreteOperator, v: &SpaceTimeField, vt: &SpaceTimeField) -> Vec<f64> {
    (0..v.grid.n_points())
        .map(|j| {
            let lv = op.apply(v.at(j));
            0.5 * op.inner_rho(vt.at(j), vt.at(j)) + 0.5 * op.inner(&lv, v.at(j))
        })
        .collect()
}

/// rho u_tt + L u = mu h with zero initial data.
pub fn wave_solve(
    op: &DiscreteOperator,
    eig: &EigenSystem,
    mu: &TimeSignal,
    h: &[f64],
) -> Result<SpaceTimeField> {
    wave_kernel(eig, h, mu.grid, op.coords.clone())?.convolve(mu)
}

/// Direct L1 time-stepping of rho D^{alpha(x)} u + L u = mu h. Each node
/// uses its own order; the history sum is kept in full.
pub fn timestep_solve_l1(
    op: &DiscreteOperator,
    order: &OrderField,
    mu: &TimeSignal,
    h: &[f64],
) -> Result<SpaceTimeField> {
    let n = op.n_dof();
    if h.len() != n {
        return Err(FracError::Shape(
            "profile length does not match the operator".into(),
        ));
    }
    order.validate(&op.mesh)?;
    if order.max() >= 1.0 {
        return Err(invalid("the L1 stepper handles orders below one"));
    }
    let grid = mu.grid;
    let dt = grid.dt;
    let mm = grid.steps;
    let alpha = order.nodal(&op.coords);
    let c: Vec<f64> = alpha
        .iter()
        .zip(&op.rho)
        .map(|(&a, &r)| r * dt.powf(-a) * rgamma(2.0 - a))
        .collect();
    // b_m = (m + 1)^{1-a} - m^{1-a} per node
    let mut distinct: Vec<f64> = Vec::new();
    for a in &alpha {
        if !distinct.contains(a) {
            distinct.push(*a);
        }
    }
    let tables: Vec<Vec<f64>> = distinct
        .iter()
        .map(|&a| {
            (0..=mm)
                .map(|m| ((m + 1) as f64).powf(1.0 - a) - (m as f64).powf(1.0 - a))
                .collect()
        })
        .collect();
    let which: Vec<usize> = alpha
        .iter()
        .map(|a| distinct.iter().position(|d| d == a).unwrap())
        .collect();
    let mut sys: Tridiagonal<f64> = op.matrix.clone();
    for i in 0..n {
        sys.diag[i] += c[i];
    }
    let lu = sys.factor()?;
    let mut out = SpaceTimeField::zeros(grid, op.coords.clone());
    let mut diffs: Vec<Vec<f64>> = Vec::with_capacity(mm);
    let mut prev = vec![0.0; n];
    for j in 1..=mm {
        let mut rhs: Vec<f64> = h.iter().map(|v| v * mu.values[j]).collect();
        for i in 0..n {
            let b = &tables[which[i]];
            let mut hist = 0.0;
            for (k, d) in diffs.iter().enumerate() {
                hist += b[j - 1 - k] * d[i];
            }
            rhs[i] += c[i] * (prev[i] - hist);
        }
        let u = lu.solve(&rhs);
        diffs.push(u.iter().zip(&prev).map(|(a, b)| a - b).collect());
        out.values[j * n..(j + 1) * n].copy_from_slice(&u);
        prev = u;
    }
    Ok(out)
}

/// Laplace transform of the piecewise-linear interpolant of samples on `grid`,
/// as weights L_j(p) with f_hat(p) = sum_j f_j L_j(p).
pub fn hat_laplace_weights(grid: TimeGrid, p: f64) -> Vec<f64> {
    let dt = grid.dt;
    let x = p * dt;
    let scale = 1.0 / (p * p * dt);
    let mid = 4.0 * (0.5 * x).sinh().powi(2) * scale;
    (0..=grid.steps)
        .map(|j| {
            let e = (-p * grid.t(j)).exp();
            if j == 0 {
                (x + (-x).exp_m1()) * scale
            } else if j == grid.steps {
                e * (x.exp_m1() - x) * scale
            } else {
                e * mid
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakCheck {
    pub p: f64,
    /// ||(L + p^alpha rho) u_hat - mu_hat h|| / ||mu_hat h||.
    pub residual: f64,
    /// Relative residual contributed by the transform beyond the last
    /// sample, with u frozen at its final value.
    pub tail_estimate: f64,
}

/// Checks (L + p^alpha rho) u_hat(p) = mu_hat(p) h at real p > 0 using the
/// exact Laplace transform of the interpolated samples.
pub fn verify_weak_solution(
    op: &DiscreteOperator,
    order: &OrderField,
    u: &SpaceTimeField,
    mu: &TimeSignal,
    h: &[f64],
    p_values: &[f64],
) -> Result<Vec<WeakCheck>> {
    let n = op.n_dof();
    if u.n_dof() != n || h.len() != n {
        return Err(FracError::Shape(
            "field sizes do not match the operator".into(),
        ));
    }
    let alpha = order.nodal(&op.coords);
    let mut out = Vec::new();
    for &p in p_values {
        if !(p > 0.0) {
            return Err(invalid("Laplace parameter must be positive"));
        }
        let lw = hat_laplace_weights(u.grid, p);
        let mut uh = vec![0.0; n];
        for (j, w) in lw.iter().enumerate() {
            for (a, b) in uh.iter_mut().zip(u.at(j)) {
                *a += w * b;
            }
        }
        let muh: f64 = hat_laplace_weights(mu.grid, p)
            .iter()
            .zip(&mu.values)
            .map(|(a, b)| a * b)
            .sum();
        let mut r = op.apply(&uh);
        for i in 0..n {
            r[i] += p.powf(alpha[i]) * op.rho[i] * uh[i] - muh * h[i];
        }
        let f: Vec<f64> = h.iter().map(|v| v * muh).collect();
        let denom = op.norm(&f);
        let num = op.norm(&r);
        let last = u.at(u.grid.steps);
        let mut lt = op.apply(last);
        for i in 0..n {
            lt[i] += p.powf(alpha[i]) * op.rho[i] * last[i];
        }
        let tail = op.norm(&lt) * (-p * u.grid.t_end()).exp() / p / denom.max(1e-300);
        out.push(WeakCheck {
            p,
            residual: if denom > 1e-300 { num / denom } else { num },
            tail_estimate: tail,
        });
    }
    Ok(out)
}

/// Mollifies a sampled profile with a normalized smooth bump of the given
/// half-width (at least one grid step).
pub fn mollify(mu: &TimeSignal, width: f64) -> TimeSignal {
    let dt = mu.grid.dt;
    let r = (width / dt).floor().max(1.0) as isize;
    let ker: Vec<f64> = (-r..=r)
        .map(|k| {
            let s = k as f64 / (r as f64 + 1.0);
            (-1.0 / (1.0 - s * s)).exp()
        })
        .collect();
    let total: f64 = ker.iter().sum();
    let np = mu.values.len() as isize;
    let values = (0..np)
        .map(|j| {
            let mut acc = 0.0;
            for (i, k) in (-r..=r).enumerate() {
                let idx = j - k;
                if idx >= 0 && idx < np {
                    acc += ker[i] * mu.values[idx as usize];
                }
            }
            acc / total
        })
        .collect();
    TimeSignal {
        grid: mu.grid,
        values,
        t0: mu.t0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MollifierReport {
    pub p: f64,
    pub widths: Vec<f64>,
    /// ||u_hat_n(p) - u_hat(p)|| for each width.
    pub gaps: Vec<f64>,
    /// ||mu_n - mu||_L1 for each width.
    pub l1_errors: Vec<f64>,
    pub monotone: bool,
}

/// Runs the forward problem for mollified profiles of decreasing width and
/// tracks the Laplace-domain gap to the unmollified solution.
pub fn mollified_mu_convergence(
    kernel: &DuhamelKernel,
    mu: &TimeSignal,
    widths: &[f64],
    p: f64,
    op: &DiscreteOperator,
) -> Result<MollifierReport> {
    let base = kernel.convolve(mu)?;
    let lw = hat_laplace_weights(mu.grid, p);
    let laplace = |u: &SpaceTimeField| -> Vec<f64> {
        let n = u.n_dof();
        let mut uh = vec![0.0; n];
        for (j, w) in lw.iter().enumerate() {
            for (a, b) in uh.iter_mut().zip(u.at(j)) {
                *a += w * b;
            }
        }
        uh
    };
    let uh = laplace(&base);
    let mut gaps = Vec::new();
    let mut l1 = Vec::new();
    for &w in widths {
        let mn = mollify(mu, w);
        let un = kernel.convolve(&mn)?;
        let d: Vec<f64> = laplace(&un).iter().zip(&uh).map(|(a, b)| a - b).collect();
        gaps.push(op.norm(&d));
        let diff = TimeSignal {
            grid: mu.grid,
            values: mn
                .values
                .iter()
                .zip(&mu.values)
                .map(|(a, b)| a - b)
                .collect(),
            t0: None,
        };
        l1.push(diff.l1_norm());
    }
    let monotone = gaps.windows(2).all(|g| g[1] < g[0]);
    Ok(MollifierReport {
        p,
        widths: widths.to_vec(),
        gaps,
        l1_errors: l1,
        monotone,
    })
}

/// Complex-p variant of the weak residual, used for spot checks off the real axis.
pub fn laplace_residual_complex(
    op: &DiscreteOperator,
    order: &OrderField,
    u_hat: &[Complex64],
    mu_hat: Complex64,
    h: &[f64],
    p: Complex64,
) -> f64 {
    let alpha = order.nodal(&op.coords);
    let n = op.n_dof();
    let m = &op.matrix;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut r = u_hat[i] * m.diag[i];
        if i > 0 {
            r += u_hat[i - 1] * m.lower[i - 1];
        }
        if i + 1 < n {
            r += u_hat[i + 1] * m.upper[i];
        }
        r += p.powf(alpha[i]) * op.rho[i] * u_hat[i] - mu_hat * h[i];
        num += op.weights[i] * r.norm_sqr();
        den += op.weights[i] * (mu_hat * h[i]).norm_sqr();
    }
    (num / den.max(1e-300)).sqrt()
}
