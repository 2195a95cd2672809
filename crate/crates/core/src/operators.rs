//! Order fields, the resolvent (L + p^alpha rho)^{-1}, and the solution
//! operator S(t) whose Laplace transform is (L + p^alpha rho)^{-1} rho.
//!
//! S(t) is evaluated either from the eigensystem (constant order, b = 0) or
//! by quadrature of the inverse Laplace integral along a contour made of an
//! arc of radius delta and two rays at angles +-theta. The contour is
//! symmetric under conjugation, so for real data only the upper half needs
//! to be factored.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{invalid, FracError, Result};
use crate::grid::{DiscreteOperator, EigenSystem, Interval, SpatialMesh};
use crate::hypotheses::{Condition, Violation};
use crate::linalg::{Tridiagonal, TridiagonalLu};
use crate::quadrature::{composite, gl16};
use crate::special::{gamma, MittagLeffler};

/// Nodal values on the unknowns of a discrete operator.
pub type SpatialField = Vec<f64>;

/// Fractional order, constant or constant on each piece of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrderField {
    Constant(f64),
    Piecewise(Vec<OrderPiece>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderPiece {
    pub span: Interval,
    pub alpha: f64,
}

impl OrderField {
    /// Pieces `[x0, b1], [b1, b2], ..., [bk, x1]` with the given orders.
    pub fn piecewise(x0: f64, x1: f64, breaks: &[f64], alphas: &[f64]) -> Result<Self> {
        if alphas.len() != breaks.len() + 1 {
            return Err(invalid("need one order per piece (breaks + 1)"));
        }
        let mut ends = vec![x0];
        ends.extend_from_slice(breaks);
        ends.push(x1);
        let pieces = ends
            .windows(2)
            .zip(alphas)
            .map(|(w, &alpha)| OrderPiece {
                span: Interval::new(w[0], w[1]),
                alpha,
            })
            .collect();
        Ok(OrderField::Piecewise(pieces))
    }

    pub fn is_constant(&self) -> bool {
        match self {
            OrderField::Constant(_) => true,
            OrderField::Piecewise(p) => p.iter().all(|q| q.alpha == p[0].alpha),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            OrderField::Constant(a) => *a,
            OrderField::Piecewise(p) => p.iter().map(|q| q.alpha).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            OrderField::Constant(a) => *a,
            OrderField::Piecewise(p) => p.iter().map(|q| q.alpha).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Interior points where the order jumps.
    pub fn interfaces(&self) -> Vec<f64> {
        match self {
            OrderField::Constant(_) => vec![],
            OrderField::Piecewise(p) => p
                .windows(2)
                .filter(|w| w[0].alpha != w[1].alpha)
                .map(|w| w[0].span.hi)
                .collect(),
        }
    }

    /// Order at `x`; a point on a shared endpoint belongs to the right piece.
    pub fn at(&self, x: f64) -> f64 {
        match self {
            OrderField::Constant(a) => *a,
            OrderField::Piecewise(p) => {
                for (k, q) in p.iter().enumerate() {
                    let last = k + 1 == p.len();
                    if x >= q.span.lo && (x < q.span.hi || (last && x <= q.span.hi)) {
                        return q.alpha;
                    }
                }
                f64::NAN
            }
        }
    }

    pub fn nodal(&self, coords: &[f64]) -> Vec<f64> {
        coords.iter().map(|&x| self.at(x)).collect()
    }

    /// Structural checks: partition of the mesh extent and the admissible
    /// spread a_max < min(2 a_min, 1) for genuinely variable orders.
    pub fn violations(&self, mesh: &SpatialMesh) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            OrderField::Constant(a) => {
                if !(*a > 0.0 && *a <= 2.0) {
                    out.push(Violation::new(
                        Condition::VariableOrder,
                        format!("order {a} outside (0, 2]"),
                    ));
                }
            }
            OrderField::Piecewise(p) => {
                if p.is_empty() {
                    out.push(Violation::new(Condition::Partition, "no order pieces"));
                    return out;
                }
                let tol = 1e-12 * (mesh.x1 - mesh.x0);
                if (p[0].span.lo - mesh.x0).abs() > tol
                    || (p[p.len() - 1].span.hi - mesh.x1).abs() > tol
                {
                    out.push(Violation::new(
                        Condition::Partition,
                        "order pieces do not span the domain",
                    ));
                }
                for w in p.windows(2) {
                    if (w[0].span.hi - w[1].span.lo).abs() > tol {
                        out.push(Violation::new(
                            Condition::Partition,
                            format!("gap or overlap between pieces at {}", w[0].span.hi),
                        ));
                    }
                }
                if p.iter().any(|q| !(q.span.hi > q.span.lo)) {
                    out.push(Violation::new(Condition::Partition, "empty order piece"));
                }
                if let Some(q) = p.iter().find(|q| !(q.alpha > 0.0 && q.alpha < 1.0)) {
                    out.push(Violation::new(
                        Condition::VariableOrder,
                        format!("piecewise order {} outside (0, 1)", q.alpha),
                    ));
                }
                let (lo, hi) = (self.min(), self.max());
                if hi > lo && !(hi < (2.0 * lo).min(1.0)) {
                    out.push(Violation::new(
                        Condition::VariableOrder,
                        format!("max order {hi} is not below min(2 x {lo}, 1)"),
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self, mesh: &SpatialMesh) -> Result<()> {
        let v = self.violations(mesh);
        if v.is_empty() {
            Ok(())
        } else {
            Err(FracError::Hypothesis(v))
        }
    }
}

/// Quadrature nodes and weights for (1 / 2 pi i) int F(p) dp along the
/// contour. The first `upper` nodes lie in the closed upper half plane; the
/// remaining ones are their mirror images in the same order.
#[derive(Debug, Clone)]
pub struct Contour {
    pub shift: f64,
    pub delta: f64,
    pub theta: f64,
    pub radius: f64,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<Complex64>,
    pub upper: usize,
}

impl Contour {
    /// Largest half-angle of a sector around the positive axis that stays
    /// clear of the contour rays.
    pub fn sector_half_angle(&self) -> f64 {
        self.theta - FRAC_PI_2
    }

    pub fn upper_nodes(&self) -> &[Complex64] {
        &self.nodes[..self.upper]
    }

    pub fn upper_weights(&self) -> &[Complex64] {
        &self.weights[..self.upper]
    }
}

fn round_panels(n: usize) -> usize {
    n.div_ceil(16).max(1)
}

/// Arc of radius `delta` over [-theta, theta] and rays out to `radius`,
/// shifted right by `shift`. `n_arc` and `n_leg` are node counts (rounded up
/// to whole 16-point panels; the arc count covers both halves).
pub fn build_contour(
    shift: f64,
    delta: f64,
    theta: f64,
    radius: f64,
    n_arc: usize,
    n_leg: usize,
) -> Result<Contour> {
    if !(delta > 0.0) || !(radius > delta) {
        return Err(invalid(format!(
            "contour needs 0 < delta < R (got {delta}, {radius})"
        )));
    }
    if !(theta > FRAC_PI_2 && theta < PI) {
        return Err(invalid(format!("contour angle {theta} outside (pi/2, pi)")));
    }
    if !shift.is_finite() || shift < 0.0 {
        return Err(invalid("contour shift must be finite and non-negative"));
    }
    let arc_panels = round_panels(n_arc / 2);
    let leg_panels = round_panels(n_leg);
    let arc_breaks: Vec<f64> = (0..=arc_panels)
        .map(|i| theta * i as f64 / arc_panels as f64)
        .collect();
    let (an, aw) = composite(&arc_breaks, gl16());
    let umax = (radius / delta).ln();
    let leg_breaks: Vec<f64> = (0..=leg_panels)
        .map(|i| umax * i as f64 / leg_panels as f64)
        .collect();
    let (un, uw) = composite(&leg_breaks, gl16());
    let scale = Complex64::new(0.0, TAU).inv();
    let mut nodes = Vec::with_capacity(2 * (an.len() + un.len()));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (&phi, &w) in an.iter().zip(&aw) {
        let e = Complex64::from_polar(delta, phi);
        nodes.push(e + shift);
        weights.push(Complex64::i() * e * w * scale);
    }
    let ray = Complex64::from_polar(1.0, theta);
    for (&u, &w) in un.iter().zip(&uw) {
        let r = delta * u.exp();
        nodes.push(ray * r + shift);
        weights.push(ray * r * w * scale);
    }
    let upper = nodes.len();
    for k in 0..upper {
        nodes.push(nodes[k].conj());
        weights.push(weights[k].conj());
    }
    Ok(Contour {
        shift,
        delta,
        theta,
        radius,
        nodes,
        weights,
        upper,
    })
}

/// Recipe for the time-dependent contour used when evaluating S(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourParams {
    pub theta: f64,
    /// delta = delta_scale / t
    pub delta_scale: f64,
    /// Truncation tolerance for the rays.
    pub eps: f64,
    pub n_arc: usize,
    pub n_leg: usize,
    pub shift: f64,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self {
            theta: 0.75 * PI,
            delta_scale: 1.0,
            eps: 1e-12,
            n_arc: 64,
            n_leg: 256,
            shift: 0.0,
        }
    }
}

impl ContourParams {
    /// Default recipe with the ray angle reduced so that theta alpha < pi
    /// when the order exceeds one.
    pub fn for_order(alpha_max: f64) -> Self {
        let mut p = Self::default();
        if alpha_max > 1.0 {
            p.theta = p.theta.min(0.5 * (FRAC_PI_2 + PI / alpha_max));
        }
        p
    }

    pub fn at_time(&self, t: f64) -> Result<Contour> {
        if !(t > 0.0) {
            return Err(invalid("contour time must be positive"));
        }
        let delta = self.delta_scale / t;
        let radius = (40.0 + (1.0 / self.eps).ln()) / (t * self.theta.cos().abs());
        build_contour(
            self.shift,
            delta,
            self.theta,
            radius.max(2.0 * delta),
            self.n_arc,
            self.n_leg,
        )
    }
}

/// p^alpha for each distinct order, expanded to the unknowns.
struct OrderPowers {
    distinct: Vec<f64>,
    index: Vec<usize>,
}

impl OrderPowers {
    fn new(op: &DiscreteOperator, order: &OrderField) -> Result<Self> {
        let alpha = order.nodal(&op.coords);
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(invalid("order field does not cover every unknown"));
        }
        let mut distinct: Vec<f64> = Vec::new();
        let index = alpha
            .iter()
            .map(|a| match distinct.iter().position(|d| d == a) {
                Some(i) => i,
                None => {
                    distinct.push(*a);
                    distinct.len() - 1
                }
            })
            .collect();
        Ok(Self { distinct, index })
    }

    fn matrix(&self, op: &DiscreteOperator, p: Complex64) -> Tridiagonal<Complex64> {
        let lp = p.ln();
        let pw: Vec<Complex64> = self.distinct.iter().map(|a| (lp * a).exp()).collect();
        let m = &op.matrix;
        Tridiagonal {
            lower: m.lower.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            upper: m.upper.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            diag: m
                .diag
                .iter()
                .zip(&self.index)
                .zip(&op.rho)
                .map(|((&d, &k), &r)| pw[k] * r + d)
                .collect(),
        }
    }
}

fn factor_checked(
    a: &Tridiagonal<Complex64>,
    p: Complex64,
    check_condition: bool,
) -> Result<TridiagonalLu<Complex64>> {
    let lu = a.factor().map_err(|_| FracError::SingularResolvent {
        p,
        cond: f64::INFINITY,
    })?;
    if check_condition {
        let cond = lu.condition_estimate();
        if !(cond < 1e14) {
            return Err(FracError::SingularResolvent { p, cond });
        }
    }
    Ok(lu)
}

/// Solves (L + p^alpha rho) w = rhs.
pub fn resolvent_solve(
    op: &DiscreteOperator,
    order: &OrderField,
    p: Complex64,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    if rhs.len() != op.n_dof() {
        return Err(FracError::Shape(format!(
            "right-hand side has {} entries, operator has {}",
            rhs.len(),
            op.n_dof()
        )));
    }
    let pw = OrderPowers::new(op, order)?;
    let lu = factor_checked(&pw.matrix(op, p), p, true)?;
    Ok(lu.solve(rhs))
}

/// Factored resolvents at the upper-half contour nodes for one time t,
/// with the quadrature factors w_k e^{t p_k} folded in.
pub struct ContourOperator {
    factors: Vec<TridiagonalLu<Complex64>>,
    nodes: Vec<Complex64>,
    coef: Vec<Complex64>,
    rho: Vec<f64>,
}

impl ContourOperator {
    pub fn new(
        op: &DiscreteOperator,
        order: &OrderField,
        contour: &Contour,
        t: f64,
    ) -> Result<Self> {
        let pw = OrderPowers::new(op, order)?;
        Self::with_powers(op, &pw, contour, t)
    }

    fn with_powers(
        op: &DiscreteOperator,
        pw: &OrderPowers,
        contour: &Contour,
        t: f64,
    ) -> Result<Self> {
        let mut factors = Vec::with_capacity(contour.upper);
        let mut coef = Vec::with_capacity(contour.upper);
        for (&p, &w) in contour.upper_nodes().iter().zip(contour.upper_weights()) {
            factors.push(factor_checked(&pw.matrix(op, p), p, false)?);
            coef.push(w * (p * t).exp());
        }
        Ok(Self {
            factors,
            nodes: contour.upper_nodes().to_vec(),
            coef,
            rho: op.rho.clone(),
        })
    }

    /// Real part of the contour sum applied to the right-hand side `rhs`,
    /// with an extra factor `g(p)` on each node.
    fn sum_with(&self, rhs: &[f64], g: impl Fn(Complex64) -> Complex64) -> Vec<f64> {
        let n = rhs.len();
        let mut out = vec![0.0; n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for ((lu, &c), &p) in self.factors.iter().zip(&self.coef).zip(&self.nodes) {
            for (b, &r) in buf.iter_mut().zip(rhs) {
                *b = Complex64::new(r, 0.0);
            }
            lu.solve_in_place(&mut buf);
            let cc = c * g(p);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += 2.0 * (cc * b).re;
            }
        }
        out
    }

    /// S(t) psi.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = psi.iter().zip(&self.rho).map(|(a, b)| a * b).collect();
        self.sum_with(&rhs, |_| Complex64::new(1.0, 0.0))
    }

    /// S(t) rho^{-1} h, the form that enters the Duhamel integral.
    pub fn apply_source(&self, h: &[f64]) -> Vec<f64> {
        self.sum_with(h, |_| Complex64::new(1.0, 0.0))
    }

    /// Kernel data of t -> S(t) rho^{-1} h at this t for product
    /// integration with step `dt`: the two time primitives, the hat-weighted
    /// average over [t - dt, t + dt] and the ramp-weighted average over
    /// [t - dt, t]. The last two are formed in the Laplace domain, which
    /// avoids differencing the primitives.
    pub fn kernel_terms(&self, h: &[f64], dt: f64) -> KernelTerms {
        let n = h.len();
        let mut out = KernelTerms {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            hat: vec![0.0; n],
            ramp: vec![0.0; n],
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for ((lu, &c), &p) in self.factors.iter().zip(&self.coef).zip(&self.nodes) {
            for (b, &r) in buf.iter_mut().zip(h) {
                *b = Complex64::new(r, 0.0);
            }
            lu.solve_in_place(&mut buf);
            let x = p * dt;
            let c1 = c / p;
            let c2 = c1 / p;
            let sh = (x * 0.5).sinh();
            let ch = c2 * sh * sh * (4.0 / dt);
            let cr = c2 * ramp_transform(x) / dt;
            for i in 0..n {
                let b = buf[i];
                out.k1[i] += 2.0 * (c1 * b).re;
                out.k2[i] += 2.0 * (c2 * b).re;
                out.hat[i] += 2.0 * (ch * b).re;
                out.ramp[i] += 2.0 * (cr * b).re;
            }
        }
        out
    }
}

/// x - 1 + e^{-x}, with a series near zero.
fn ramp_transform(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        let mut term = x * x * 0.5;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 2..20 {
            sum += term;
            term *= -x / (k + 1) as f64;
        }
        sum
    } else {
        x - 1.0 + (-x).exp()
    }
}

/// See [`ContourOperator::kernel_terms`].
#[derive(Debug, Clone)]
pub struct KernelTerms {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub hat: Vec<f64>,
    pub ramp: Vec<f64>,
}

/// Result of a contour evaluation of S(t) psi.
#[derive(Debug, Clone, Serialize)]
pub struct ContourApply {
    pub value: SpatialField,
    /// ||Im|| / ||Re|| of the full (both halves) sum; should be at rounding level.
    pub imag_ratio: f64,
}

/// S(t) psi from the full contour sum.
pub fn apply_s_contour(
    op: &DiscreteOperator,
    order: &OrderField,
    contour: &Contour,
    t: f64,
    psi: &[f64],
) -> Result<ContourApply> {
    if psi.len() != op.n_dof() {
        return Err(FracError::Shape(
            "field length does not match the operator".into(),
        ));
    }
    let pw = OrderPowers::new(op, order)?;
    let n = op.n_dof();
    let rhs: Vec<Complex64> = psi
        .iter()
        .zip(&op.rho)
        .map(|(a, b)| Complex64::new(a * b, 0.0))
        .collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for (&p, &w) in contour.nodes.iter().zip(&contour.weights) {
        let lu = factor_checked(&pw.matrix(op, p), p, false)?;
        let x = lu.solve(&rhs);
        let c = w * (p * t).exp();
        for (a, x) in acc.iter_mut().zip(&x) {
            *a += c * x;
        }
    }
    let re: Vec<f64> = acc.iter().map(|v| v.re).collect();
    let im: Vec<f64> = acc.iter().map(|v| v.im).collect();
    let nr = op.norm_rho(&re);
    Ok(ContourApply {
        imag_ratio: if nr > 0.0 { op.norm_rho(&im) / nr } else { 0.0 },
        value: re,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralApply {
    pub value: SpatialField,
    /// Bound on the contribution of the modes that were not kept.
    pub tail_bound: f64,
}

/// S(t) psi = t^{alpha-1} sum E_{alpha,alpha}(-t^alpha lambda_n) (psi, phi_n)_rho phi_n.
pub fn apply_s_spectral(
    op: &DiscreteOperator,
    eig: &EigenSystem,
    alpha: f64,
    t: f64,
    psi: &[f64],
) -> Result<SpectralApply> {
    if !(t > 0.0) {
        return Err(invalid("time must be positive"));
    }
    if psi.len() != eig.n_dof() {
        return Err(FracError::Shape(
            "field length does not match the eigensystem".into(),
        ));
    }
    let ml = MittagLeffler::new(alpha, alpha)?;
    let ta = t.powf(alpha);
    let scale = t.powf(alpha - 1.0);
    let c = eig.project_rho(psi);
    let coef: Vec<f64> = c
        .iter()
        .zip(&eig.values)
        .map(|(c, &lam)| scale * ml.eval_real(-ta * lam) * c)
        .collect();
    let value = eig.synthesize(&coef);
    let kept = eig.synthesize(&c);
    let resid: Vec<f64> = psi.iter().zip(&kept).map(|(a, b)| a - b).collect();
    let lam_next = *eig.values.last().unwrap_or(&0.0);
    // |E_{a,a}(-x)| (1 + x) is bounded by a small constant for a <= 1; the
    // constant 2 / Gamma(a) covers it on the tested range.
    let bound_c = 2.0 / gamma(alpha)?.abs();
    let tail_bound = scale * bound_c / (1.0 + ta * lam_next) * op.norm_rho(&resid);
    Ok(SpectralApply { value, tail_bound })
}

/// Power-iteration estimates of ||S(t)|| in the rho-weighted norm.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Exponents 2 a_max - a_min - 1 and 2 a_min - a_max - 1.
    pub exponents: (f64, f64),
    /// max_t ||S(t)|| / envelope(t).
    pub envelope_constant: f64,
    pub small_t_slope: f64,
    pub large_t_slope: f64,
    /// Tail points where ||S|| / envelope keeps growing towards the ends.
    pub envelope_violations: usize,
}

pub fn envelope(t: f64, alpha_min: f64, alpha_max: f64) -> f64 {
    let e1 = 2.0 * alpha_max - alpha_min - 1.0;
    let e2 = 2.0 * alpha_min - alpha_max - 1.0;
    t.powf(e1).max(t.powf(e2)).max(1.0)
}

fn loglog_slope(t: &[f64], v: &[f64]) -> f64 {
    let n = t.len() as f64;
    if t.len() < 2 {
        return f64::NAN;
    }
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Estimates ||S(t)|| on `t_grid` by 50 power iterations from a seeded
/// random start, then fits the two-sided power envelope.
pub fn operator_norm_estimate(
    op: &DiscreteOperator,
    order: &OrderField,
    t_grid: &[f64],
    params: &ContourParams,
    seed: u64,
) -> Result<NormReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.n_dof();
    let mut norms = Vec::with_capacity(t_grid.len());
    let pw = OrderPowers::new(op, order)?;
    for &t in t_grid {
        let contour = params.at_time(t)?;
        let cop = ContourOperator::with_powers(op, &pw, &contour, t)?;
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nx = op.norm_rho(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut est = 0.0;
        for _ in 0..50 {
            let y = cop.apply(&x);
            est = op.norm_rho(&y);
            if est == 0.0 {
                break;
            }
            x = y.into_iter().map(|v| v / est).collect();
        }
        norms.push(est);
    }
    let (lo, hi) = (order.min(), order.max());
    let ratios: Vec<f64> = t_grid
        .iter()
        .zip(&norms)
        .map(|(&t, &s)| s / envelope(t, lo, hi))
        .collect();
    let envelope_constant = ratios.iter().cloned().fold(0.0, f64::max);
    let small: Vec<usize> = (0..t_grid.len()).filter(|&i| t_grid[i] <= 0.05).collect();
    let large: Vec<usize> = (0..t_grid.len()).filter(|&i| t_grid[i] >= 20.0).collect();
    let pick = |idx: &[usize]| -> f64 {
        let tt: Vec<f64> = idx.iter().map(|&i| t_grid[i]).collect();
        let vv: Vec<f64> = idx.iter().map(|&i| norms[i]).collect();
        loglog_slope(&tt, &vv)
    };
    let k = 3.min(ratios.len() / 2);
    let mut violations = 0;
    for i in 0..k {
        // ratio must not grow towards t -> 0 ...
        if ratios[i] > 1.1 * ratios[i + 1] {
            violations += 1;
        }
        // ... nor towards t -> infinity
        let j = ratios.len() - 1 - i;
        if ratios[j] > 1.1 * ratios[j - 1] {
            violations += 1;
        }
    }
    let small_t_slope = pick(&small);
    let large_t_slope = pick(&large);
    Ok(NormReport {
        t: t_grid.to_vec(),
        norm: norms,
        alpha_min: lo,
        alpha_max: hi,
        exponents: (2.0 * hi - lo - 1.0, 2.0 * lo - hi - 1.0),
        envelope_constant,
        small_t_slope,
        large_t_slope,
        envelope_violations: violations,
    })
}
