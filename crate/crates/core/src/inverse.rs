//! Inverse source problems: support analysis of causal convolutions,
//! interior observation, least-squares recovery of h (and of mu and h),
//! and injectivity certificates from the singular spectrum of the discrete
//! source-to-observation map.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FracError, Result};
use crate::forward::{duhamel_kernels, wave_kernel, DuhamelKernel, DuhamelMethod, SpaceTimeField};
use crate::fractional::{
    bump_with_derivatives, trapezoid, ConvolutionWeights, TimeGrid, TimeSignal,
};
use crate::grid::{control_time, DiscreteOperator, Region};
use crate::hypotheses::{Condition, Violation};
use crate::operators::{ContourParams, OrderField};

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_SVD_CUTOFF: f64 = 1e-10;
pub const DECONVOLUTION_CUTOFF: f64 = 1e-8;
/// Required growth of the wave certificate between 0.5 T* and 1.5 T*.
pub const CERTIFICATE_GROWTH: f64 = 10.0;

const NOTE_CERTIFICATE: &str = "uniqueness is certified by discrete injectivity: the smallest \
retained singular value of the sensitivity map stands in for the unique-continuation steps";
const NOTE_INVERSE_CRIME: &str = "noiseless data from the same discrete forward model: the \
recovery error measures identifiability, not stability under noise";

/// inf supp f: the first sample above `threshold_rel * max|f|`, moved back
/// by half a step and clamped at zero.
pub fn support_infimum(f: &TimeSignal, threshold_rel: f64) -> Result<f64> {
    let m = f.max_abs();
    let cut = threshold_rel * m;
    match f.values.iter().position(|v| v.abs() > cut) {
        Some(j) if m > 0.0 => Ok((f.grid.t(j) - 0.5 * f.grid.dt).max(0.0)),
        _ => Err(invalid("signal never exceeds the support threshold")),
    }
}

/// (f * g)(t_j) by the trapezoid rule on the shared grid. Zero samples of
/// f are skipped, so the result is exactly zero before the supports meet.
pub fn causal_convolution(f: &TimeSignal, g: &TimeSignal) -> Result<TimeSignal> {
    if f.grid != g.grid {
        return Err(invalid("convolution factors must share a grid"));
    }
    let dt = f.grid.dt;
    let np = f.grid.n_points();
    let mut out = vec![0.0; np];
    for (k, &fk) in f.values.iter().enumerate() {
        if fk == 0.0 {
            continue;
        }
        for j in k..np {
            let gk = g.values[j - k];
            if gk == 0.0 || j == 0 {
                continue;
            }
            let w = if k == 0 || k == j { 0.5 } else { 1.0 };
            out[j] += w * dt * fk * gk;
        }
    }
    TimeSignal::new(f.grid, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TitchmarshReport {
    /// inf supp f.
    pub a: f64,
    /// inf supp g.
    pub b: f64,
    /// inf supp f * g on [0, T], when the convolution is nonzero there.
    pub c: Option<f64>,
    pub gap: Option<f64>,
    pub tolerance: f64,
    pub threshold: f64,
    pub passed: bool,
    /// f * g vanishes on [0, T] although a + b < T.
    pub anomaly: bool,
}

/// Checks inf supp(f * g) = inf supp f + inf supp g on [0, T] to within
/// two steps, and returns (a, b) as the decomposition.
pub fn titchmarsh_check(
    f: &TimeSignal,
    g: &TimeSignal,
    t_end: f64,
    threshold_rel: f64,
) -> Result<TitchmarshReport> {
    if f.grid != g.grid {
        return Err(invalid("Titchmarsh check needs a shared grid"));
    }
    let steps = f.grid.index_of(t_end);
    let grid = TimeGrid::with_steps(f.grid.dt, steps);
    let cut = |s: &TimeSignal| TimeSignal::new(grid, s.values[..=steps].to_vec());
    let (f, g) = (cut(f)?, cut(g)?);
    let a = support_infimum(&f, threshold_rel)?;
    let b = support_infimum(&g, threshold_rel)?;
    let conv = causal_convolution(&f, &g)?;
    let tolerance = 2.0 * grid.dt;
    let (c, gap, passed, anomaly) = if conv.max_abs() == 0.0 {
        let anomaly = a + b < grid.t_end();
        (None, None, !anomaly, anomaly)
    } else {
        let c = support_infimum(&conv, threshold_rel)?;
        let gap = (c - (a + b)).abs();
        (Some(c), Some(gap), gap <= tolerance, false)
    };
    Ok(TitchmarshReport {
        a,
        b,
        c,
        gap,
        tolerance,
        threshold: threshold_rel,
        passed,
        anomaly,
    })
}

/// Interior observation: smooth sensors inside omega, read on the window
/// (T1, T]. T0 marks the end of the interval where mu is known not to vanish.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationSpec {
    pub omega: Region,
    pub t0: f64,
    pub t1: f64,
    pub t_end: f64,
    /// Sensor profiles at the unknowns.
    pub sensors: Vec<Vec<f64>>,
    /// Quadrature weights of the unknowns.
    pub quadrature: Vec<f64>,
}

impl ObservationSpec {
    /// `n_sensors` overlapping bumps, shared among the components of omega
    /// in proportion to their length, each supported strictly inside omega.
    pub fn new(
        op: &DiscreteOperator,
        omega: Region,
        n_sensors: usize,
        t0: f64,
        t1: f64,
        t_end: f64,
    ) -> Result<Self> {
        if n_sensors == 0 {
            return Err(invalid("need at least one sensor"));
        }
        let parts: Vec<(f64, f64)> = omega
            .intervals
            .iter()
            .map(|i| (i.lo.max(op.mesh.x0), i.hi.min(op.mesh.x1)))
            .filter(|(lo, hi)| hi > lo)
            .collect();
        if parts.is_empty() {
            return Err(invalid("observation region has no part inside the domain"));
        }
        // largest-remainder split of the sensors by component length
        let total: f64 = parts.iter().map(|(lo, hi)| hi - lo).sum();
        let quota: Vec<f64> = parts
            .iter()
            .map(|(lo, hi)| n_sensors as f64 * (hi - lo) / total)
            .collect();
        let mut counts: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..parts.len()).collect();
        order.sort_by(|&a, &b| {
            (quota[b] - quota[b].floor()).total_cmp(&(quota[a] - quota[a].floor()))
        });
        let missing = n_sensors - counts.iter().sum::<usize>();
        for &k in order.iter().take(missing) {
            counts[k] += 1;
        }
        let mut sensors = Vec::with_capacity(n_sensors);
        for (&(lo, hi), &n) in parts.iter().zip(&counts) {
            let step = (hi - lo) / (n + 1) as f64;
            for j in 0..n {
                let c = lo + (j + 1) as f64 * step;
                let s: Vec<f64> = op
                    .coords
                    .iter()
                    .map(|&x| bump_with_derivatives(x, c, 0.95 * step).0)
                    .collect();
                if s.iter().all(|&v| v == 0.0) {
                    return Err(invalid(format!(
                        "sensor at x = {c} covers no mesh node; refine the mesh or widen omega"
                    )));
                }
                sensors.push(s);
            }
        }
        let spec = Self {
            omega,
            t0,
            t1,
            t_end,
            sensors,
            quadrature: op.weights.clone(),
        };
        let v = spec.violations();
        if v.is_empty() {
            Ok(spec)
        } else {
            Err(FracError::Hypothesis(v))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.t0 > 0.0) {
            out.push(Violation::new(
                Condition::SourceSupport,
                format!("T0 = {} must be positive", self.t0),
            ));
        }
        if !(self.t1 >= 0.0 && self.t1 < self.t_end) {
            out.push(Violation::new(
                Condition::WindowStart,
                format!(
                    "window start T1 = {} is not in [0, T = {})",
                    self.t1, self.t_end
                ),
            ));
        }
        if !(self.t_end >= self.t0) {
            out.push(Violation::new(
                Condition::Horizon,
                format!("T = {} is below T0 = {}", self.t_end, self.t0),
            ));
        }
        out
    }

    pub fn with_window(&self, t1: f64, t_end: f64) -> Self {
        Self {
            t1,
            t_end,
            ..self.clone()
        }
    }

    /// Sensor profiles multiplied by the quadrature weights.
    pub fn pairings(&self) -> Vec<Vec<f64>> {
        self.sensors
            .iter()
            .map(|s| s.iter().zip(&self.quadrature).map(|(a, b)| a * b).collect())
            .collect()
    }

    /// Sample indices with T1 < t_j <= T.
    pub fn window(&self, grid: TimeGrid) -> Vec<usize> {
        let eps = 1e-9 * grid.dt;
        (0..grid.n_points())
            .filter(|&j| {
                let t = grid.t(j);
                t > self.t1 + eps && t <= self.t_end + eps
            })
            .collect()
    }
}

/// u_psi(t) = sum_k u(t, x_k) psi(x_k) w_k per sensor, zero outside the window.
pub fn observe(u: &SpaceTimeField, spec: &ObservationSpec) -> Result<Vec<TimeSignal>> {
    if u.n_dof() != spec.quadrature.len() {
        return Err(FracError::Shape(
            "field and sensors live on different meshes".into(),
        ));
    }
    let window = spec.window(u.grid);
    Ok(spec
        .pairings()
        .iter()
        .map(|p| {
            let full = u.pair(p);
            let mut values = vec![0.0; full.values.len()];
            for &j in &window {
                values[j] = full.values[j];
            }
            TimeSignal {
                grid: u.grid,
                values,
                t0: Some(spec.t0),
            }
        })
        .collect())
}

/// Finite-dimensional search space for h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceBasis {
    /// Unit vectors at the unknowns outside `exclude`.
    Nodal { exclude: Region },
    /// sin(k pi (x - lo) / (hi - lo)) on [lo, hi], k = 1..=count.
    Sine { lo: f64, hi: f64, count: usize },
    /// `count` hat functions with equispaced peaks strictly inside [lo, hi].
    Hats { lo: f64, hi: f64, count: usize },
    /// Leading eigenmodes of the operator.
    Eigen { count: usize },
}

impl SourceBasis {
    pub fn columns(&self, op: &DiscreteOperator) -> Result<Vec<Vec<f64>>> {
        let x = &op.coords;
        let cols: Vec<Vec<f64>> = match self {
            SourceBasis::Nodal { exclude } => (0..x.len())
                .filter(|&i| !exclude.contains(x[i]))
                .map(|i| {
                    let mut e = vec![0.0; x.len()];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            SourceBasis::Sine { lo, hi, count } => {
                check_span(*lo, *hi, *count)?;
                (1..=*count)
                    .map(|k| {
                        x.iter()
                            .map(|&x| {
                                if x > *lo && x < *hi {
                                    (k as f64 * std::f64::consts::PI * (x - lo) / (hi - lo)).sin()
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
            SourceBasis::Hats { lo, hi, count } => {
                check_span(*lo, *hi, *count)?;
                let w = (hi - lo) / (*count + 1) as f64;
                (1..=*count)
                    .map(|k| {
                        let c = lo + k as f64 * w;
                        x.iter()
                            .map(|&x| (1.0 - (x - c).abs() / w).max(0.0))
                            .collect()
                    })
                    .collect()
            }
            SourceBasis::Eigen { count } => op.eigensystem(*count)?.vectors,
        };
        if cols.is_empty() {
            return Err(invalid("source basis is empty"));
        }
        if let Some(k) = cols.iter().position(|c| c.iter().all(|&v| v == 0.0)) {
            return Err(invalid(format!(
                "basis function {k} vanishes at every unknown"
            )));
        }
        Ok(cols)
    }
}

fn check_span(lo: f64, hi: f64, count: usize) -> Result<()> {
    if !(hi > lo) || count == 0 {
        return Err(invalid(format!(
            "basis needs lo < hi and count > 0 (got [{lo}, {hi}], {count})"
        )));
    }
    Ok(())
}

/// First unknown inside `region` where some column is nonzero.
fn support_hit(cols: &[Vec<f64>], coords: &[f64], region: &Region) -> Option<f64> {
    coords
        .iter()
        .enumerate()
        .find(|&(i, &x)| region.contains(x) && cols.iter().any(|c| c[i] != 0.0))
        .map(|(_, &x)| x)
}

fn is_wave(order: &OrderField) -> bool {
    matches!(order, OrderField::Constant(a) if *a == 2.0)
}

/// Options shared by the reconstruction pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseOptions {
    pub method: DuhamelMethod,
    pub svd_cutoff: f64,
    pub support_threshold: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            method: DuhamelMethod::Contour(ContourParams::default()),
            svd_cutoff: DEFAULT_SVD_CUTOFF,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Flag {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Titchmarsh decomposition of the strongest observation: tau1 = inf supp mu,
/// tau2 = inf supp u_psi - tau1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportEstimate {
    pub tau1: f64,
    pub tau2: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificatePoint {
    pub t_end: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseReport {
    pub experiment: String,
    pub n_basis: usize,
    pub n_rows: usize,
    /// Singular values of the sensitivity map, descending.
    pub singular_values: Vec<f64>,
    pub svd_cutoff: f64,
    pub rank: usize,
    /// Smallest retained singular value.
    pub certificate: f64,
    /// ||A c - d|| / ||d|| on the observation window.
    pub data_residual: f64,
    pub coords: Vec<f64>,
    pub recovered_h: Vec<f64>,
    /// Relative L2 error against a known h, when one is supplied.
    pub h_error: Option<f64>,
    pub recovered_mu: Option<Vec<f64>>,
    /// Relative L1 error of mu on (0, T), when a reference is supplied.
    pub mu_error: Option<f64>,
    pub support: Option<SupportEstimate>,
    pub sweep: Vec<CertificatePoint>,
    pub flags: Vec<Flag>,
    pub notes: Vec<String>,
}

impl InverseReport {
    fn empty(experiment: &str, coords: Vec<f64>) -> Self {
        Self {
            experiment: experiment.into(),
            n_basis: 0,
            n_rows: 0,
            singular_values: vec![],
            svd_cutoff: 0.0,
            rank: 0,
            certificate: 0.0,
            data_residual: 0.0,
            recovered_h: vec![0.0; coords.len()],
            coords,
            h_error: None,
            recovered_mu: None,
            mu_error: None,
            support: None,
            sweep: vec![],
            flags: vec![],
            notes: vec![NOTE_CERTIFICATE.into()],
        }
    }

    /// Records the error against a known h.
    pub fn compare_h(&mut self, op: &DiscreteOperator, truth: &[f64]) {
        self.h_error = Some(relative_l2(op, &self.recovered_h, truth));
        if !self.notes.iter().any(|n| n == NOTE_INVERSE_CRIME) {
            self.notes.push(NOTE_INVERSE_CRIME.into());
        }
    }

    /// Records the error of the recovered mu against a reference on (0, T).
    pub fn compare_mu(&mut self, truth: &TimeSignal) {
        if let Some(mu) = &self.recovered_mu {
            let n = mu.len().min(truth.values.len());
            let diff: Vec<f64> = (0..n).map(|j| (mu[j] - truth.values[j]).abs()).collect();
            let abs: Vec<f64> = truth.values[..n].iter().map(|v| v.abs()).collect();
            let den = trapezoid(&abs, truth.grid.dt);
            self.mu_error = Some(trapezoid(&diff, truth.grid.dt) / den);
        }
    }

    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }
}

pub fn relative_l2(op: &DiscreteOperator, estimate: &[f64], truth: &[f64]) -> f64 {
    let d: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
    let den = op.norm(truth);
    if den == 0.0 {
        op.norm(&d)
    } else {
        op.norm(&d) / den
    }
}

/// Truncated-SVD least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct TsvdSolution {
    pub x: Vec<f64>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub smallest_retained: f64,
    pub residual: f64,
}

/// Minimum-norm solution of A x = b restricted to singular values above
/// `cutoff_rel * sigma_max`.
pub fn tsvd_solve(a: &DMatrix<f64>, b: &DVector<f64>, cutoff_rel: f64) -> Result<TsvdSolution> {
    if a.nrows() != b.len() {
        return Err(FracError::Shape("matrix and data sizes differ".into()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| FracError::Numerical("SVD returned no U".into()))?;
    let vt = svd
        .v_t
        .as_ref()
        .ok_or_else(|| FracError::Numerical("SVD returned no V".into()))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let cut = cutoff_rel * smax;
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    let mut smallest = f64::INFINITY;
    for i in 0..sv.len() {
        if sv[i] > cut && sv[i] > 0.0 {
            let coef = u.column(i).dot(b) / sv[i];
            x += vt.row(i).transpose() * coef;
            rank += 1;
            smallest = smallest.min(sv[i]);
        }
    }
    if rank == 0 {
        return Err(FracError::Numerical(
            "effective rank zero: the observation carries no information on the unknowns".into(),
        ));
    }
    let r = a * &x - b;
    let bn = b.norm();
    let residual = if bn == 0.0 { r.norm() } else { r.norm() / bn };
    let mut singular_values: Vec<f64> = sv.iter().cloned().collect();
    singular_values.sort_by(|p, q| q.total_cmp(p));
    Ok(TsvdSolution {
        x: x.iter().cloned().collect(),
        singular_values,
        rank,
        smallest_retained: smallest,
        residual,
    })
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().cloned().collect();
    s.sort_by(|p, q| q.total_cmp(p));
    s
}

/// Kernels t -> S(t) rho^{-1} b_k for every column, on `grid`.
fn source_kernels(
    op: &DiscreteOperator,
    order: &OrderField,
    cols: &[Vec<f64>],
    grid: TimeGrid,
    method: DuhamelMethod,
) -> Result<Vec<DuhamelKernel>> {
    if is_wave(order) {
        let eig = op.eigensystem(op.n_dof())?;
        cols.par_iter()
            .map(|h| wave_kernel(&eig, h, grid, op.coords.clone()))
            .collect()
    } else {
        duhamel_kernels(op, order, cols, grid, method)
    }
}

/// Scalar observation kernels of the basis, indexed [basis][sensor], on a
/// grid that ends at the observation horizon.
struct Sensitivity {
    grid: TimeGrid,
    kernels: Vec<Vec<ConvolutionWeights>>,
}

impl Sensitivity {
    fn build(
        op: &DiscreteOperator,
        order: &OrderField,
        cols: &[Vec<f64>],
        spec: &ObservationSpec,
        grid: TimeGrid,
        method: DuhamelMethod,
    ) -> Result<Self> {
        let kernels = source_kernels(op, order, cols, grid, method)?;
        let pairs = spec.pairings();
        let kernels = kernels
            .iter()
            .map(|k| pairs.iter().map(|p| k.paired(p)).collect())
            .collect();
        Ok(Self { grid, kernels })
    }

    /// Sensitivity matrix on the window of `spec` for the source profile mu.
    fn matrix(&self, mu: &[f64], spec: &ObservationSpec) -> DMatrix<f64> {
        let window = spec.window(self.grid);
        let ns = spec.sensors.len();
        let nw = window.len();
        let nb = self.kernels.len();
        let cols: Vec<Vec<f64>> = self
            .kernels
            .par_iter()
            .map(|per_sensor| {
                let mut col = vec![0.0; ns * nw];
                for (s, w) in per_sensor.iter().enumerate() {
                    let y = w.convolve(mu);
                    for (i, &j) in window.iter().enumerate() {
                        col[s * nw + i] = y[j];
                    }
                }
                col
            })
            .collect();
        DMatrix::from_fn(ns * nw, nb, |r, c| cols[c][r])
    }

    /// Observation kernels of sum_k coef_k b_k.
    fn combined(&self, coef: &[f64]) -> Vec<ConvolutionWeights> {
        let ns = self.kernels.first().map_or(0, |k| k.len());
        (0..ns)
            .map(|s| {
                let first = &self.kernels[0][s];
                let mut acc = ConvolutionWeights {
                    grid: first.grid,
                    n_comp: 1,
                    w0: vec![0.0; first.w0.len()],
                    interior: vec![0.0; first.interior.len()],
                    start: vec![0.0; first.start.len()],
                };
                for (k, &c) in coef.iter().enumerate() {
                    let w = &self.kernels[k][s];
                    axpy(&mut acc.w0, c, &w.w0);
                    axpy(&mut acc.interior, c, &w.interior);
                    axpy(&mut acc.start, c, &w.start);
                }
                acc
            })
            .collect()
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (p, q) in y.iter_mut().zip(x) {
        *p += a * q;
    }
}

/// Grid of `mu` cut at the observation horizon, and mu on it.
fn horizon_grid(mu: &TimeSignal, t_end: f64) -> Result<(TimeGrid, Vec<f64>)> {
    let steps = (t_end / mu.grid.dt).round() as usize;
    if steps == 0
        || steps > mu.grid.steps
        || (mu.grid.t(steps) - t_end).abs() > 1e-9 * t_end.max(1.0)
    {
        return Err(invalid(format!(
            "observation horizon T = {t_end} is not a sample of the source grid (dt = {}, end {})",
            mu.grid.dt,
            mu.grid.t_end()
        )));
    }
    Ok((
        TimeGrid::with_steps(mu.grid.dt, steps),
        mu.values[..=steps].to_vec(),
    ))
}

fn window_data(
    data: &[TimeSignal],
    spec: &ObservationSpec,
    grid: TimeGrid,
) -> Result<DVector<f64>> {
    if data.len() != spec.sensors.len() {
        return Err(FracError::Shape(format!(
            "{} data signals for {} sensors",
            data.len(),
            spec.sensors.len()
        )));
    }
    if data
        .iter()
        .any(|d| d.grid.dt != grid.dt || d.grid.steps < grid.steps)
    {
        return Err(invalid("data signals do not cover the observation grid"));
    }
    let window = spec.window(grid);
    let nw = window.len();
    let mut b = DVector::zeros(data.len() * nw);
    for (s, d) in data.iter().enumerate() {
        for (i, &j) in window.iter().enumerate() {
            b[s * nw + i] = d.values[j];
        }
    }
    Ok(b)
}

fn nonzero_before(mu: &TimeSignal, t0: f64) -> bool {
    mu.values
        .iter()
        .enumerate()
        .any(|(j, &v)| v != 0.0 && mu.grid.t(j) > 0.0 && mu.grid.t(j) < t0)
}

fn source_violations(mu: &TimeSignal, spec: &ObservationSpec) -> Vec<Violation> {
    let mut v = spec.violations();
    if !nonzero_before(mu, spec.t0) {
        v.push(Violation::new(
            Condition::SourceSupport,
            format!("mu vanishes identically on (0, T0 = {})", spec.t0),
        ));
    }
    v
}

fn hypothesis_flags(
    op: &DiscreteOperator,
    order: &OrderField,
    spec: &ObservationSpec,
) -> Vec<Flag> {
    let mut flags = Vec::new();
    if let OrderField::Constant(a) = *order {
        if a <= 1.0 {
            let unit = op.coeffs.rho.iter().all(|&r| r == 1.0);
            flags.push(Flag::new(
                Condition::UnitDensity.tag(),
                unit,
                "required for orders in (0, 1]",
            ));
        }
        if a > 1.0 && a < 2.0 {
            flags.push(Flag::new(
                Condition::ZeroDrift.tag(),
                op.coeffs.is_drift_free(),
                "required for orders in (1, 2)",
            ));
        }
        if a == 1.0 {
            flags.push(Flag::new(
                "T1=0",
                spec.t1 == 0.0,
                "for order 1 uniqueness is known only for windows starting at 0",
            ));
        }
    }
    flags
}

struct HStage {
    sens: Sensitivity,
    cols: Vec<Vec<f64>>,
    sol: TsvdSolution,
    h: Vec<f64>,
    n_rows: usize,
}

fn solve_h(
    op: &DiscreteOperator,
    mu: &[f64],
    spec: &ObservationSpec,
    data: &DVector<f64>,
    cols: Vec<Vec<f64>>,
    sens: Sensitivity,
    cutoff: f64,
) -> Result<HStage> {
    let a = sens.matrix(mu, spec);
    let sol = tsvd_solve(&a, data, cutoff)?;
    let mut h = vec![0.0; op.n_dof()];
    for (c, col) in sol.x.iter().zip(&cols) {
        axpy(&mut h, *c, col);
    }
    Ok(HStage {
        n_rows: a.nrows(),
        sens,
        cols,
        sol,
        h,
    })
}

fn check_basis(
    op: &DiscreteOperator,
    order: &OrderField,
    cols: &[Vec<f64>],
    omega: &Region,
) -> Result<()> {
    if is_wave(order) {
        return Ok(());
    }
    match support_hit(cols, &op.coords, omega) {
        Some(x) => Err(FracError::Hypothesis(vec![Violation::new(
            Condition::SourceOffObservation,
            format!("basis for h is nonzero at x = {x} inside the observation region"),
        )])),
        None => Ok(()),
    }
}

fn support_estimate(
    mu: &TimeSignal,
    data: &[TimeSignal],
    threshold: f64,
) -> Option<SupportEstimate> {
    let strongest = data
        .iter()
        .max_by(|a, b| a.max_abs().total_cmp(&b.max_abs()))?;
    let tau1 = support_infimum(mu, threshold).ok()?;
    let first = support_infimum(strongest, threshold).ok()?;
    Some(SupportEstimate {
        tau1,
        tau2: (first - tau1).max(0.0),
        threshold,
    })
}

/// Recovers h from interior observations with mu known, by truncated-SVD
/// least squares over `basis`.
pub fn reconstruct_h(
    op: &DiscreteOperator,
    order: &OrderField,
    mu: &TimeSignal,
    spec: &ObservationSpec,
    data: &[TimeSignal],
    basis: &SourceBasis,
    opts: &InverseOptions,
) -> Result<(Vec<f64>, InverseReport)> {
    let v = source_violations(mu, spec);
    if !v.is_empty() {
        return Err(FracError::Hypothesis(v));
    }
    let cols = basis.columns(op)?;
    check_basis(op, order, &cols, &spec.omega)?;
    let (grid, mu_h) = horizon_grid(mu, spec.t_end)?;
    let b = window_data(data, spec, grid)?;
    let sens = Sensitivity::build(op, order, &cols, spec, grid, opts.method)?;
    let stage = solve_h(op, &mu_h, spec, &b, cols, sens, opts.svd_cutoff)?;

    let mut report = InverseReport::empty("reconstruct-h", op.coords.clone());
    fill_h_report(&mut report, &stage, opts.svd_cutoff);
    report.support = support_estimate(mu, data, opts.support_threshold);
    report.flags.extend(hypothesis_flags(op, order, spec));
    Ok((stage.h, report))
}

fn fill_h_report(report: &mut InverseReport, stage: &HStage, cutoff: f64) {
    report.n_basis = stage.cols.len();
    report.n_rows = stage.n_rows;
    report.singular_values = stage.sol.singular_values.clone();
    report.svd_cutoff = cutoff;
    report.rank = stage.sol.rank;
    report.certificate = stage.sol.smallest_retained;
    report.data_residual = stage.sol.residual;
    report.recovered_h = stage.h.clone();
    report.flags.push(Flag::new(
        "full-rank",
        stage.sol.rank == stage.cols.len(),
        format!("rank {} of {}", stage.sol.rank, stage.cols.len()),
    ));
    report.flags.push(Flag::new(
        "certificate-positive",
        stage.sol.smallest_retained > 0.0,
        format!(
            "smallest retained singular value {:e}",
            stage.sol.smallest_retained
        ),
    ));
}

#[derive(Debug, Clone)]
pub struct MuHRecovery {
    pub h: Vec<f64>,
    pub mu: TimeSignal,
    pub report: InverseReport,
}

/// Simultaneous recovery with mu known on (0, T0): h from the window
/// (T1, T0], then mu on (T0, T] by truncated-SVD deconvolution of the
/// observations against the kernels of the recovered h.
pub fn reconstruct_mu_h(
    op: &DiscreteOperator,
    order: &OrderField,
    mu_known: &TimeSignal,
    spec: &ObservationSpec,
    data: &[TimeSignal],
    basis: &SourceBasis,
    opts: &InverseOptions,
) -> Result<MuHRecovery> {
    let mut v = source_violations(mu_known, spec);
    if !(spec.t1 < spec.t0) {
        v.push(Violation::new(
            Condition::WindowBeforeT0,
            format!(
                "window start T1 = {} must lie before T0 = {}",
                spec.t1, spec.t0
            ),
        ));
    }
    if !v.is_empty() {
        return Err(FracError::Hypothesis(v));
    }
    let cols = basis.columns(op)?;
    check_basis(op, order, &cols, &spec.omega)?;
    let (grid, mut mu) = horizon_grid(mu_known, spec.t_end)?;
    let k0 = mu_known.grid.index_of(spec.t0);
    if (grid.t(k0) - spec.t0).abs() > 1e-9 * spec.t0.max(1.0) {
        return Err(invalid(format!(
            "T0 = {} is not a sample of the source grid",
            spec.t0
        )));
    }
    // only the part of mu on [0, T0] is known
    mu[k0 + 1..].iter_mut().for_each(|v| *v = 0.0);

    let sens = Sensitivity::build(op, order, &cols, spec, grid, opts.method)?;
    let stage1_spec = spec.with_window(spec.t1, spec.t0);
    let b1 = window_data(data, &stage1_spec, grid)?;
    let stage = solve_h(op, &mu, &stage1_spec, &b1, cols, sens, opts.svd_cutoff)?;
    if !(stage.h.iter().any(|&v| v != 0.0)) {
        return Err(FracError::Hypothesis(vec![Violation::new(
            Condition::NonzeroSource,
            "recovered h vanishes; the deconvolution for mu is undetermined",
        )]));
    }

    // stage 2: unknown samples mu_k, k0 < k <= steps
    let kern = stage.sens.combined(&stage.sol.x);
    let window: Vec<usize> = spec.window(grid).into_iter().filter(|&j| j > k0).collect();
    let nk = grid.steps - k0;
    let nw = window.len();
    let ns = kern.len();
    let mut recovered_tail = vec![0.0; nk];
    let mut deconv_sv = Vec::new();
    if nk > 0 && nw > 0 {
        let mut a = DMatrix::zeros(ns * nw, nk);
        let mut b = DVector::zeros(ns * nw);
        for (s, w) in kern.iter().enumerate() {
            let known = w.convolve(&mu);
            for (i, &j) in window.iter().enumerate() {
                let r = s * nw + i;
                b[r] = data[s].values[j] - known[j];
                for k in k0 + 1..=j {
                    a[(r, k - k0 - 1)] = w.coefficient(j, k);
                }
            }
        }
        let sol = tsvd_solve(&a, &b, DECONVOLUTION_CUTOFF)?;
        recovered_tail = sol.x;
        deconv_sv = sol.singular_values;
    }
    for (k, v) in recovered_tail.iter().enumerate() {
        mu[k0 + 1 + k] = *v;
    }

    let mut report = InverseReport::empty("reconstruct-mu-h", op.coords.clone());
    fill_h_report(&mut report, &stage, opts.svd_cutoff);
    report.recovered_mu = Some(mu.clone());
    let mu_signal = TimeSignal {
        grid,
        values: mu,
        t0: Some(spec.t0),
    };
    report.support = support_estimate(&mu_signal, data, opts.support_threshold);
    report.flags.extend(hypothesis_flags(op, order, spec));
    if let Some(&smin) = deconv_sv.iter().rfind(|&&s| s > 0.0) {
        report.notes.push(format!(
            "deconvolution: {} unknowns, smallest singular value {:e}, cutoff {:e} relative",
            nk, smin, DECONVOLUTION_CUTOFF
        ));
    }
    Ok(MuHRecovery {
        h: stage.h,
        mu: mu_signal,
        report,
    })
}

/// Singular spectra of the wave source-to-observation map for horizons
/// `factors * T*`, observation starting at 0. The certificate at each
/// horizon is the smallest singular value (no truncation).
pub fn hyperbolic_uniqueness_experiment(
    op: &DiscreteOperator,
    mu: &TimeSignal,
    omega: &Region,
    n_sensors: usize,
    t0: f64,
    basis: &SourceBasis,
    factors: &[f64],
) -> Result<InverseReport> {
    if !op.coeffs.is_drift_free() {
        return Err(FracError::Hypothesis(vec![Violation::new(
            Condition::ZeroDrift,
            "the wave case needs b = 0",
        )]));
    }
    if factors.is_empty() {
        return Err(invalid("need at least one horizon factor"));
    }
    let t_star = control_time(&op.mesh, &op.coeffs, omega, t0)?;
    let dt = mu.grid.dt;
    let horizons: Vec<f64> = factors
        .iter()
        .map(|f| (f * t_star / dt).round().max(1.0) * dt)
        .collect();
    let t_max = horizons.iter().cloned().fold(0.0, f64::max);
    let spec = ObservationSpec::new(op, omega.clone(), n_sensors, t0, 0.0, t_max)?;
    let v = source_violations(mu, &spec);
    if !v.is_empty() {
        return Err(FracError::Hypothesis(v));
    }
    let cols = basis.columns(op)?;
    let (grid, mu_h) = horizon_grid(mu, t_max)?;
    let order = OrderField::Constant(2.0);
    let sens = Sensitivity::build(
        op,
        &order,
        &cols,
        &spec,
        grid,
        DuhamelMethod::Spectral { n_modes: None },
    )?;

    let mut report = InverseReport::empty("hyperbolic-uniqueness", op.coords.clone());
    report.n_basis = cols.len();
    for (&f, &t) in factors.iter().zip(&horizons) {
        let s = spec.with_window(0.0, t);
        let a = sens.matrix(&mu_h, &s);
        let sv = singular_values(&a);
        report.sweep.push(CertificatePoint {
            t_end: t,
            sigma_min: *sv.last().unwrap_or(&0.0),
            sigma_max: *sv.first().unwrap_or(&0.0),
        });
        report.flags.push(Flag::new(
            Condition::ControlTime.tag(),
            true,
            format!("T = {t} ({f} T*), T >= T* is {}", t >= t_star - 1e-12),
        ));
        if t == t_max {
            report.n_rows = a.nrows();
            report.certificate = *sv.last().unwrap_or(&0.0);
            report.rank = sv.iter().filter(|&&x| x > 0.0).count();
            report.singular_values = sv;
        }
    }
    let first = report.sweep.first().map_or(0.0, |p| p.sigma_min);
    let last = report.sweep.last().map_or(0.0, |p| p.sigma_min);
    let ratio = if first > 0.0 {
        last / first
    } else {
        f64::INFINITY
    };
    report.flags.push(Flag::new(
        "certificate-growth",
        ratio >= CERTIFICATE_GROWTH,
        format!("sigma_min ratio last/first horizon = {ratio:e} (T* = {t_star})"),
    ));
    report.notes.push(format!("control time T* = {t_star}"));
    Ok(report)
}

/// Geometry of the variable-order uniqueness setting, checked before any
/// computation: interfaces inside the buffer set, omega meeting the buffer,
/// h (and its basis) vanishing on both, admissible order spread, b = 0.
pub fn variable_order_violations(
    op: &DiscreteOperator,
    order: &OrderField,
    buffer: &Region,
    spec: &ObservationSpec,
    cols: &[Vec<f64>],
    h_true: Option<&[f64]>,
) -> Vec<Violation> {
    let mut v = order.violations(&op.mesh);
    for x in order.interfaces() {
        if !buffer.intervals.iter().any(|i| x > i.lo && x < i.hi) {
            v.push(Violation::new(
                Condition::InterfaceBuffer,
                format!("interface x = {x} is not inside the buffer set"),
            ));
        }
    }
    let mut all: Vec<Vec<f64>> = cols.to_vec();
    if let Some(h) = h_true {
        all.push(h.to_vec());
    }
    if let Some(x) = support_hit(&all, &op.coords, buffer) {
        v.push(Violation::new(
            Condition::InterfaceBuffer,
            format!("h is nonzero at x = {x} inside the buffer set"),
        ));
    }
    if !overlaps_open(&spec.omega, buffer) {
        v.push(Violation::new(
            Condition::ObservationBuffer,
            "observation region does not meet the buffer set",
        ));
    }
    if let Some(x) = support_hit(&all, &op.coords, &spec.omega) {
        v.push(Violation::new(
            Condition::ObservationBuffer,
            format!("h is nonzero at x = {x} inside the observation region"),
        ));
    }
    if !op.coeffs.is_drift_free() {
        v.push(Violation::new(
            Condition::ZeroDrift,
            "variable orders need b = 0",
        ));
    }
    v
}

/// Open sets meet when some pair of components overlaps with positive length.
fn overlaps_open(a: &Region, b: &Region) -> bool {
    a.intervals
        .iter()
        .any(|p| b.intervals.iter().any(|q| p.lo.max(q.lo) < p.hi.min(q.hi)))
}

/// Generates noiseless observations from `h_true` with the given order and
/// recovers it through `reconstruct_h`, after the geometry checks.
#[allow(clippy::too_many_arguments)]
pub fn variable_order_experiment(
    op: &DiscreteOperator,
    order: &OrderField,
    buffer: &Region,
    spec: &ObservationSpec,
    basis: &SourceBasis,
    mu: &TimeSignal,
    h_true: &[f64],
    opts: &InverseOptions,
) -> Result<InverseReport> {
    let cols = basis.columns(op)?;
    let v = variable_order_violations(op, order, buffer, spec, &cols, Some(h_true));
    if !v.is_empty() {
        return Err(FracError::Hypothesis(v));
    }
    let (grid, mu_h) = horizon_grid(mu, spec.t_end)?;
    let mu_cut = TimeSignal::new(grid, mu_h)?;
    let u = crate::forward::duhamel_solve(op, order, &mu_cut, h_true, opts.method)?;
    let data = observe(&u, spec)?;
    let (_, mut report) = reconstruct_h(op, order, &mu_cut, spec, &data, basis, opts)?;
    report.experiment = "variable-order".into();
    report.compare_h(op, h_true);
    Ok(report)
}
