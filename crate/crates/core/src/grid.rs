//! One-dimensional mesh, coefficient sets, the discrete elliptic operator
//! and its weighted eigensystem, plus travel-time distances.
//!
//! The operator is L u = -(a u')' + b u' + c u discretized with conservative
//! second differences (face values of `a` are nodal averages) and central
//! differences for the drift. Neumann ends use a mirrored ghost node, which
//! makes the operator symmetric with respect to trapezoid weights.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FracError, Result};
use crate::hypotheses::{Condition, Violation};
use crate::linalg::{symmetric_tridiagonal_eigen, Tridiagonal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

/// Uniform mesh of `[x0, x1]` with `n_interior` interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    pub x0: f64,
    pub x1: f64,
    pub n_interior: usize,
    pub boundary: Boundary,
}

impl SpatialMesh {
    pub fn new(x0: f64, x1: f64, n_interior: usize, boundary: Boundary) -> Result<Self> {
        if !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
            return Err(invalid(format!("mesh extent [{x0}, {x1}] is empty")));
        }
        if n_interior < 2 {
            return Err(invalid("mesh needs at least two interior nodes"));
        }
        Ok(Self {
            x0,
            x1,
            n_interior,
            boundary,
        })
    }

    pub fn h(&self) -> f64 {
        (self.x1 - self.x0) / (self.n_interior + 1) as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_interior + 2
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_interior + 1 {
            self.x1
        } else {
            self.x0 + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// Node indices that carry unknowns.
    pub fn dof_nodes(&self) -> Vec<usize> {
        match self.boundary {
            Boundary::Dirichlet => (1..=self.n_interior).collect(),
            Boundary::Neumann => (0..self.n_nodes()).collect(),
        }
    }

    pub fn n_dof(&self) -> usize {
        match self.boundary {
            Boundary::Dirichlet => self.n_interior,
            Boundary::Neumann => self.n_interior + 2,
        }
    }

    pub fn dof_coords(&self) -> Vec<f64> {
        self.dof_nodes().into_iter().map(|i| self.node(i)).collect()
    }

    /// Trapezoid weight of each unknown.
    pub fn dof_weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.n_dof()];
        if self.boundary == Boundary::Neumann {
            w[0] = 0.5 * h;
            let last = w.len() - 1;
            w[last] = 0.5 * h;
        }
        w
    }
}

/// Closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi >= self.lo)
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo.max(other.lo) <= self.hi.min(other.hi)
    }
}

/// Finite union of closed intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Region {
    pub intervals: Vec<Interval>,
}

impl Region {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::new(vec![Interval::new(lo, hi)])
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.iter().all(Interval::is_empty)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.intervals
            .iter()
            .any(|a| other.intervals.iter().any(|b| a.intersects(b)))
    }

    /// Smallest and largest endpoint.
    pub fn hull(&self) -> Option<Interval> {
        let lo = self
            .intervals
            .iter()
            .map(|i| i.lo)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .intervals
            .iter()
            .map(|i| i.hi)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some(Interval::new(lo, hi))
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut v = self.intervals.clone();
        v.extend_from_slice(&other.intervals);
        Region::new(v)
    }
}

/// Nodal coefficient values on every mesh node (boundary nodes included).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rho: Vec<f64>,
    /// Ellipticity constant: a >= kappa and c >= kappa.
    pub kappa: f64,
    /// Test mode that relaxes c >= kappa to c >= 0.
    pub allow_zero_c: bool,
}

impl CoefficientSet {
    pub fn from_fns(
        mesh: &SpatialMesh,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        c: impl Fn(f64) -> f64,
        rho: impl Fn(f64) -> f64,
        kappa: f64,
    ) -> Self {
        let x = mesh.nodes();
        Self {
            a: x.iter().map(|&x| a(x)).collect(),
            b: x.iter().map(|&x| b(x)).collect(),
            c: x.iter().map(|&x| c(x)).collect(),
            rho: x.iter().map(|&x| rho(x)).collect(),
            kappa,
            allow_zero_c: false,
        }
    }

    /// a = 1, b = 0, c = 1, rho = 1.
    pub fn unit(mesh: &SpatialMesh) -> Self {
        Self::from_fns(mesh, |_| 1.0, |_| 0.0, |_| 1.0, |_| 1.0, 1.0)
    }

    pub fn is_drift_free(&self) -> bool {
        self.b.iter().all(|&v| v == 0.0)
    }

    pub fn violations(&self, mesh: &SpatialMesh) -> Vec<Violation> {
        let n = mesh.n_nodes();
        let mut out = Vec::new();
        if [self.a.len(), self.b.len(), self.c.len(), self.rho.len()]
            .iter()
            .any(|&l| l != n)
        {
            out.push(Violation::new(
                Condition::Ellipticity,
                format!("coefficient arrays must have {n} nodal values"),
            ));
            return out;
        }
        if !(self.kappa > 0.0) {
            out.push(Violation::new(
                Condition::Ellipticity,
                "kappa must be positive",
            ));
        }
        if let Some(i) = self.rho.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            out.push(Violation::new(
                Condition::Rho,
                format!(
                    "rho = {} at x = {} is not positive",
                    self.rho[i],
                    mesh.node(i)
                ),
            ));
        }
        if let Some(i) = self
            .a
            .iter()
            .position(|&v| !(v >= self.kappa && v.is_finite()))
        {
            out.push(Violation::new(
                Condition::Ellipticity,
                format!(
                    "a = {} < kappa = {} at x = {}",
                    self.a[i],
                    self.kappa,
                    mesh.node(i)
                ),
            ));
        }
        let c_floor = if self.allow_zero_c { 0.0 } else { self.kappa };
        if let Some(i) = self
            .c
            .iter()
            .position(|&v| !(v >= c_floor && v.is_finite()))
        {
            out.push(Violation::new(
                Condition::Ellipticity,
                format!("c = {} < {} at x = {}", self.c[i], c_floor, mesh.node(i)),
            ));
        }
        if let Some(i) = self.b.iter().position(|v| !v.is_finite()) {
            out.push(Violation::new(
                Condition::Ellipticity,
                format!("b is not finite at x = {}", mesh.node(i)),
            ));
        }
        out
    }
}

/// Assembled operator on the unknowns of a mesh.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub mesh: SpatialMesh,
    pub coeffs: CoefficientSet,
    /// Matrix of L acting on the unknowns.
    pub matrix: Tridiagonal<f64>,
    /// Trapezoid weights of the unknowns.
    pub weights: Vec<f64>,
    /// rho at the unknowns.
    pub rho: Vec<f64>,
    pub coords: Vec<f64>,
}

impl DiscreteOperator {
    pub fn assemble(mesh: &SpatialMesh, coeffs: &CoefficientSet) -> Result<Self> {
        let v = coeffs.violations(mesh);
        if !v.is_empty() {
            return Err(FracError::Hypothesis(v));
        }
        let h = mesh.h();
        let h2 = h * h;
        let nn = mesh.n_nodes();
        let a = &coeffs.a;
        let face = |i: usize| 0.5 * (a[i] + a[i + 1]);
        let dofs = mesh.dof_nodes();
        let n = dofs.len();
        let mut lower = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n - 1];
        for (k, &i) in dofs.iter().enumerate() {
            let c = coeffs.c[i];
            if i == 0 {
                let f = face(0);
                diag[k] = 2.0 * f / h2 + c;
                upper[k] = -2.0 * f / h2;
            } else if i == nn - 1 {
                let f = face(nn - 2);
                diag[k] = 2.0 * f / h2 + c;
                lower[k - 1] = -2.0 * f / h2;
            } else {
                let fl = face(i - 1);
                let fr = face(i);
                let b = coeffs.b[i] / (2.0 * h);
                diag[k] = (fl + fr) / h2 + c;
                if k > 0 {
                    lower[k - 1] = -fl / h2 - b;
                }
                if k + 1 < n {
                    upper[k] = -fr / h2 + b;
                }
            }
        }
        Ok(Self {
            mesh: mesh.clone(),
            coeffs: coeffs.clone(),
            matrix: Tridiagonal::new(lower, diag, upper),
            weights: mesh.dof_weights(),
            rho: dofs.iter().map(|&i| coeffs.rho[i]).collect(),
            coords: dofs.iter().map(|&i| mesh.node(i)).collect(),
        })
    }

    pub fn n_dof(&self) -> usize {
        self.weights.len()
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.coeffs.is_drift_free()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.matvec(u)
    }

    /// Samples a function at the unknowns.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.coords.iter().map(|&x| f(x)).collect()
    }

    /// Trapezoid L2 inner product.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (f, g))| w * f * g)
            .sum()
    }

    /// rho-weighted inner product.
    pub fn inner_rho(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.rho)
            .zip(f.iter().zip(g))
            .map(|((w, r), (f, g))| w * r * f * g)
            .sum()
    }

    pub fn norm_rho(&self, f: &[f64]) -> f64 {
        self.inner_rho(f, f).sqrt()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Eigenpairs of L phi = lambda rho phi, orthonormal in the
    /// rho-weighted inner product, lowest `n_modes` first.
    pub fn eigensystem(&self, n_modes: usize) -> Result<EigenSystem> {
        if !self.is_self_adjoint() {
            return Err(FracError::NotSelfAdjoint);
        }
        let n = self.n_dof();
        if n_modes == 0 || n_modes > n {
            return Err(FracError::TooManyModes {
                requested: n_modes,
                available: n,
            });
        }
        let m: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.rho)
            .map(|(w, r)| w * r)
            .collect();
        let sm: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| self.weights[i] * self.matrix.diag[i] / m[i])
            .collect();
        // K_s = W K is symmetric; average the two triangles against rounding
        let off: Vec<f64> = (0..n - 1)
            .map(|i| {
                let up = self.weights[i] * self.matrix.upper[i];
                let lo = self.weights[i + 1] * self.matrix.lower[i];
                0.5 * (up + lo) / (sm[i] * sm[i + 1])
            })
            .collect();
        let (vals, vecs) = symmetric_tridiagonal_eigen(&diag, &off)?;
        let vectors = (0..n_modes)
            .map(|k| (0..n).map(|i| vecs[i * n + k] / sm[i]).collect())
            .collect();
        Ok(EigenSystem {
            values: vals[..n_modes].to_vec(),
            vectors,
            weights: self.weights.clone(),
            rho: self.rho.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Modes sampled at the unknowns.
    pub vectors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    rho: Vec<f64>,
}

impl EigenSystem {
    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    pub fn n_dof(&self) -> usize {
        self.weights.len()
    }

    /// (f, phi_n)_rho for each mode.
    pub fn project_rho(&self, f: &[f64]) -> Vec<f64> {
        let wf: Vec<f64> = f
            .iter()
            .zip(self.weights.iter().zip(&self.rho))
            .map(|(f, (w, r))| f * w * r)
            .collect();
        self.vectors
            .iter()
            .map(|phi| phi.iter().zip(&wf).map(|(p, q)| p * q).sum())
            .collect()
    }

    /// (rho^{-1} h, phi_n)_rho, which is the plain L2 pairing (h, phi_n).
    pub fn project_source(&self, h: &[f64]) -> Vec<f64> {
        let wh: Vec<f64> = h.iter().zip(&self.weights).map(|(h, w)| h * w).collect();
        self.vectors
            .iter()
            .map(|phi| phi.iter().zip(&wh).map(|(p, q)| p * q).sum())
            .collect()
    }

    /// Sum of coefficient-weighted modes.
    pub fn synthesize(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dof()];
        for (c, phi) in coef.iter().zip(&self.vectors) {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += c * p;
            }
        }
        out
    }
}

/// Cumulative travel time tau(x_i) = int_{x0}^{x_i} sqrt(rho / a) at every
/// node, by the trapezoid rule.
pub fn travel_time(mesh: &SpatialMesh, coeffs: &CoefficientSet) -> Vec<f64> {
    let h = mesh.h();
    let slowness: Vec<f64> = coeffs
        .rho
        .iter()
        .zip(&coeffs.a)
        .map(|(r, a)| (r / a).sqrt())
        .collect();
    let mut tau = vec![0.0; slowness.len()];
    for i in 1..slowness.len() {
        tau[i] = tau[i - 1] + 0.5 * h * (slowness[i - 1] + slowness[i]);
    }
    tau
}

fn interpolate(mesh: &SpatialMesh, tau: &[f64], x: f64) -> f64 {
    let h = mesh.h();
    let s = ((x - mesh.x0) / h).clamp(0.0, (tau.len() - 1) as f64);
    let i = (s.floor() as usize).min(tau.len() - 2);
    let f = s - i as f64;
    tau[i] * (1.0 - f) + tau[i + 1] * f
}

/// Distance from `x` to `omega` in the metric with line element
/// sqrt(rho / a) |dx|.
pub fn riemannian_distance(
    mesh: &SpatialMesh,
    coeffs: &CoefficientSet,
    x: f64,
    omega: &Region,
) -> Result<f64> {
    let tau = travel_time(mesh, coeffs);
    distance_with(mesh, &tau, x, omega)
}

fn distance_with(mesh: &SpatialMesh, tau: &[f64], x: f64, omega: &Region) -> Result<f64> {
    if omega.is_empty() {
        return Err(invalid("observation region is empty"));
    }
    if omega.contains(x) {
        return Ok(0.0);
    }
    let tx = interpolate(mesh, tau, x);
    let mut best = f64::INFINITY;
    for iv in &omega.intervals {
        if iv.is_empty() {
            continue;
        }
        let lo = interpolate(mesh, tau, iv.lo.clamp(mesh.x0, mesh.x1));
        let hi = interpolate(mesh, tau, iv.hi.clamp(mesh.x0, mesh.x1));
        best = best.min((tx - lo).abs()).min((tx - hi).abs());
    }
    Ok(best)
}

/// T0 + sup over the closed domain of the distance to `omega`.
pub fn control_time(
    mesh: &SpatialMesh,
    coeffs: &CoefficientSet,
    omega: &Region,
    t0: f64,
) -> Result<f64> {
    let tau = travel_time(mesh, coeffs);
    let mut sup: f64 = 0.0;
    for x in mesh.nodes() {
        sup = sup.max(distance_with(mesh, &tau, x, omega)?);
    }
    Ok(t0 + sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dirichlet_eigenvalues_converge_second_order() {
        let mut errs = Vec::new();
        for &n in &[31, 63, 127] {
            let mesh = SpatialMesh::new(0.0, PI, n, Boundary::Dirichlet).unwrap();
            let mut co = CoefficientSet::unit(&mesh);
            co.c = vec![0.0; mesh.n_nodes()];
            co.allow_zero_c = true;
            let op = DiscreteOperator::assemble(&mesh, &co).unwrap();
            let eig = op.eigensystem(3).unwrap();
            errs.push(
                (0..3)
                    .map(|k| (eig.values[k] - ((k + 1) * (k + 1)) as f64).abs())
                    .fold(0.0, f64::max),
            );
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.9, "rate {rate}");
        }
    }

    #[test]
    fn neumann_eigen_with_density_is_rho_orthonormal() {
        let mesh = SpatialMesh::new(0.0, 1.0, 40, Boundary::Neumann).unwrap();
        let co =
            CoefficientSet::from_fns(&mesh, |x| 1.0 + x, |_| 0.0, |_| 1.0, |x| 2.0 + x * x, 0.5);
        let op = DiscreteOperator::assemble(&mesh, &co).unwrap();
        let eig = op.eigensystem(10).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let d = op.inner_rho(&eig.vectors[a], &eig.vectors[b]);
                let exact = if a == b { 1.0 } else { 0.0 };
                assert!((d - exact).abs() < 1e-12);
            }
            let lphi = op.apply(&eig.vectors[a]);
            for i in 0..op.n_dof() {
                let r = lphi[i] - eig.values[a] * op.rho[i] * eig.vectors[a][i];
                assert!(r.abs() < 1e-9 * eig.values[a].max(1.0) * 10.0);
            }
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let mesh = SpatialMesh::new(0.0, 1.0, 10, Boundary::Dirichlet).unwrap();
        let mut co = CoefficientSet::unit(&mesh);
        co.rho[3] = 0.0;
        co.a[5] = -1.0;
        match DiscreteOperator::assemble(&mesh, &co) {
            Err(FracError::Hypothesis(v)) => {
                assert!(v.iter().any(|v| v.condition == Condition::Rho));
                assert!(v.iter().any(|v| v.condition == Condition::Ellipticity));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drift_blocks_eigensystem() {
        let mesh = SpatialMesh::new(0.0, 1.0, 10, Boundary::Dirichlet).unwrap();
        let co = CoefficientSet::from_fns(&mesh, |_| 1.0, |_| 0.5, |_| 1.0, |_| 1.0, 1.0);
        let op = DiscreteOperator::assemble(&mesh, &co).unwrap();
        assert!(matches!(op.eigensystem(3), Err(FracError::NotSelfAdjoint)));
        let op2 = DiscreteOperator::assemble(&mesh, &CoefficientSet::unit(&mesh)).unwrap();
        assert!(matches!(
            op2.eigensystem(11),
            Err(FracError::TooManyModes { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let mesh = SpatialMesh::new(0.0, 1.0, 199, Boundary::Dirichlet).unwrap();
        let co = CoefficientSet::unit(&mesh);
        let om = Region::interval(0.8, 1.0);
        assert!((riemannian_distance(&mesh, &co, 0.0, &om).unwrap() - 0.8).abs() < 1e-12);
        assert!((control_time(&mesh, &co, &om, 0.1).unwrap() - 0.9).abs() < 1e-12);

        // a = 1 + x: distance from 0 to 1 is 2 (sqrt 2 - 1)
        let co2 = CoefficientSet::from_fns(&mesh, |x| 1.0 + x, |_| 0.0, |_| 1.0, |_| 1.0, 1.0);
        let d = riemannian_distance(&mesh, &co2, 0.0, &Region::interval(1.0, 1.0)).unwrap();
        assert!((d - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn distance_scales_with_metric() {
        let mesh = SpatialMesh::new(0.0, 1.0, 50, Boundary::Dirichlet).unwrap();
        let co =
            CoefficientSet::from_fns(&mesh, |x| 1.0 + x, |_| 0.0, |_| 1.0, |x| 1.0 + x * x, 1.0);
        let mut co4 = co.clone();
        co4.a.iter_mut().for_each(|a| *a *= 4.0);
        let om = Region::interval(0.7, 0.9);
        for &x in &[0.0, 0.33, 0.95] {
            let d = riemannian_distance(&mesh, &co, x, &om).unwrap();
            let d4 = riemannian_distance(&mesh, &co4, x, &om).unwrap();
            assert!((d4 - 0.5 * d).abs() < 1e-15);
        }
    }
}
