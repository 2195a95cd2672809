//! Scenario files: a TOML schema with defaults for every field, validation
//! against the structural conditions of the selected experiment, canonical
//! hashing, and the deterministic experiment runner with its CSV/JSON
//! artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, FracError, Result};
use crate::forward::{
    duhamel_solve, verify_weak_solution, wave_solve, DuhamelMethod, SpaceTimeField, WeakCheck,
};
use crate::fractional::{bump_with_derivatives, TimeGrid, TimeSignal};
use crate::grid::{
    control_time, Boundary, CoefficientSet, DiscreteOperator, Interval, Region, SpatialMesh,
};
use crate::hypotheses::{Condition, Violation};
use crate::inverse::{
    observe, reconstruct_h, reconstruct_mu_h, variable_order_violations, InverseOptions,
    InverseReport, MuHRecovery, ObservationSpec, SourceBasis, DEFAULT_SUPPORT_THRESHOLD,
    DEFAULT_SVD_CUTOFF,
};
use crate::operators::{ContourParams, OrderField};

pub const TOOL_NAME: &str = "fracsource";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Closed-form profile in one variable (space for coefficients and h, time
/// for mu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// value + slope * x
    Affine {
        value: f64,
        slope: f64,
    },
    /// scale * exp(-1 / (1 - s^2)) on (lo, hi), s the centered coordinate.
    Bump {
        lo: f64,
        hi: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Indicator {
        lo: f64,
        hi: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// scale * sin(mode pi (x - lo) / (hi - lo)) on (lo, hi).
    Sine {
        lo: f64,
        hi: f64,
        #[serde(default = "one_usize")]
        mode: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Equispaced samples on [start, end], linear in between, constant beyond.
    Nodal {
        start: f64,
        end: f64,
        values: Vec<f64>,
    },
    Sum {
        terms: Vec<Profile>,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Affine { value, slope } => value + slope * x,
            Profile::Bump { lo, hi, scale } => {
                scale * bump_with_derivatives(x, 0.5 * (lo + hi), 0.5 * (hi - lo)).0
            }
            Profile::Indicator { lo, hi, scale } => {
                if x >= *lo && x <= *hi {
                    *scale
                } else {
                    0.0
                }
            }
            Profile::Sine {
                lo,
                hi,
                mode,
                scale,
            } => {
                if x > *lo && x < *hi {
                    scale * (*mode as f64 * std::f64::consts::PI * (x - lo) / (hi - lo)).sin()
                } else {
                    0.0
                }
            }
            Profile::Nodal { start, end, values } => {
                let n = values.len();
                if n == 1 {
                    return values[0];
                }
                let s = ((x - start) / (end - start) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
                let i = (s.floor() as usize).min(n - 2);
                let f = s - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
            Profile::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Profile::Bump { lo, hi, .. }
            | Profile::Indicator { lo, hi, .. }
            | Profile::Sine { lo, hi, .. } => {
                if !(hi > lo) {
                    return Err(invalid(format!("profile interval [{lo}, {hi}] is empty")));
                }
            }
            Profile::Nodal { start, end, values } => {
                if values.is_empty() || !(end > start) {
                    return Err(invalid("nodal profile needs values and start < end"));
                }
            }
            Profile::Sum { terms } => {
                for t in terms {
                    t.check()?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Forward,
    InvertH,
    InvertMuH,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Forward => "forward",
            Experiment::InvertH => "invert-h",
            Experiment::InvertMuH => "invert-mu-h",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub dimension: usize,
    pub x0: f64,
    pub x1: f64,
    /// Interior nodes.
    pub n: usize,
    pub boundary: Boundary,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            dimension: 1,
            x0: 0.0,
            x1: 1.0,
            n: 64,
            boundary: Boundary::Dirichlet,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSpec {
    pub a: Profile,
    pub b: Profile,
    pub c: Profile,
    pub rho: Profile,
    /// Ellipticity constant; the nodal minimum of a and c when absent.
    pub kappa: Option<f64>,
    /// Relaxes c >= kappa to c >= 0.
    pub allow_zero_c: bool,
    /// Integrability exponent of c, kept as metadata.
    pub q: Option<f64>,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        Self {
            a: Profile::constant(1.0),
            b: Profile::constant(0.0),
            c: Profile::constant(1.0),
            rho: Profile::constant(1.0),
            kappa: None,
            allow_zero_c: false,
            q: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OrderSpec {
    Constant {
        alpha: f64,
    },
    /// Pieces split at `breaks`, one order per piece.
    Piecewise {
        breaks: Vec<f64>,
        alphas: Vec<f64>,
    },
}

impl Default for OrderSpec {
    fn default() -> Self {
        OrderSpec::Constant { alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub mu: Profile,
    pub t0: f64,
    /// Spatial profile; ground truth for the inverse experiments.
    pub h: Profile,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            mu: Profile::Bump {
                lo: 0.0,
                hi: 0.3,
                scale: 1.0,
            },
            t0: 0.3,
            h: Profile::Bump {
                lo: 0.35,
                hi: 0.65,
                scale: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    /// Components of omega as [lo, hi] pairs.
    pub omega: Vec<[f64; 2]>,
    pub t1: f64,
    pub t_end: f64,
    pub sensors: usize,
    /// Buffer set around order interfaces.
    pub buffer: Vec<[f64; 2]>,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            omega: vec![[0.0, 0.3], [0.7, 1.0]],
            t1: 0.0,
            t_end: 1.0,
            sensors: 6,
            buffer: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSpec {
    /// Spectral for constant orders with b = 0, contour otherwise.
    #[default]
    Auto,
    Spectral,
    Contour,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourOverrides {
    pub theta: Option<f64>,
    pub delta_scale: Option<f64>,
    pub eps: Option<f64>,
    pub n_arc: Option<usize>,
    pub n_leg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub method: MethodSpec,
    pub dt: f64,
    /// Forward horizon; the observation horizon when absent.
    pub t_end: Option<f64>,
    pub n_modes: Option<usize>,
    pub svd_cutoff: f64,
    pub support_threshold: f64,
    pub contour: ContourOverrides,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            method: MethodSpec::Auto,
            dt: 5e-3,
            t_end: None,
            n_modes: None,
            svd_cutoff: DEFAULT_SVD_CUTOFF,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
            contour: ContourOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSpec {
    pub basis: SourceBasis,
}

impl Default for InverseSpec {
    fn default() -> Self {
        Self {
            basis: SourceBasis::Sine {
                lo: 0.3,
                hi: 0.7,
                count: 6,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Experiment,
    pub seed: u64,
    pub mesh: MeshSpec,
    pub coefficients: CoefficientSpec,
    pub order: OrderSpec,
    pub source: SourceSpec,
    pub observation: ObservationConfig,
    pub solver: SolverSpec,
    pub inverse: InverseSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            experiment: Experiment::Forward,
            seed: 7,
            mesh: MeshSpec::default(),
            coefficients: CoefficientSpec::default(),
            order: OrderSpec::default(),
            source: SourceSpec::default(),
            observation: ObservationConfig::default(),
            solver: SolverSpec::default(),
            inverse: InverseSpec::default(),
        }
    }
}

fn region(pairs: &[[f64; 2]]) -> Region {
    Region::new(pairs.iter().map(|p| Interval::new(p[0], p[1])).collect())
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses a scenario without validating it.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        FracError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// Reads, parses and validates a scenario for its own experiment.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let sc = parse_scenario(&text)?;
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    /// Canonical TOML text: every default filled in, fixed field order.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(format!("scenario serialization failed: {e}")))
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.canonical()?.as_bytes())))
    }

    pub fn with_experiment(&self, experiment: Experiment) -> Self {
        Self {
            experiment,
            ..self.clone()
        }
    }

    pub fn mesh(&self) -> Result<SpatialMesh> {
        if self.mesh.dimension != 1 {
            return Err(invalid(format!(
                "only one-dimensional meshes are supported (got dimension {})",
                self.mesh.dimension
            )));
        }
        SpatialMesh::new(self.mesh.x0, self.mesh.x1, self.mesh.n, self.mesh.boundary)
    }

    pub fn coefficient_set(&self, mesh: &SpatialMesh) -> CoefficientSet {
        let cs = &self.coefficients;
        let mut set = CoefficientSet::from_fns(
            mesh,
            |x| cs.a.eval(x),
            |x| cs.b.eval(x),
            |x| cs.c.eval(x),
            |x| cs.rho.eval(x),
            1.0,
        );
        set.allow_zero_c = cs.allow_zero_c;
        set.kappa = cs.kappa.unwrap_or_else(|| {
            let amin = set.a.iter().cloned().fold(f64::INFINITY, f64::min);
            if cs.allow_zero_c {
                amin
            } else {
                amin.min(set.c.iter().cloned().fold(f64::INFINITY, f64::min))
            }
        });
        set
    }

    pub fn operator(&self) -> Result<DiscreteOperator> {
        let mesh = self.mesh()?;
        DiscreteOperator::assemble(&mesh, &self.coefficient_set(&mesh))
    }

    pub fn order_field(&self) -> Result<OrderField> {
        match &self.order {
            OrderSpec::Constant { alpha } => Ok(OrderField::Constant(*alpha)),
            OrderSpec::Piecewise { breaks, alphas } => {
                OrderField::piecewise(self.mesh.x0, self.mesh.x1, breaks, alphas)
            }
        }
    }

    /// Horizon of the time grid.
    pub fn horizon(&self) -> f64 {
        self.solver.t_end.unwrap_or(self.observation.t_end)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon(), self.solver.dt)
    }

    pub fn mu_signal(&self, grid: TimeGrid) -> TimeSignal {
        let mut s = TimeSignal::from_fn(grid, |t| self.source.mu.eval(t));
        s.t0 = Some(self.source.t0);
        s
    }

    pub fn h_values(&self, op: &DiscreteOperator) -> Vec<f64> {
        op.sample(|x| self.source.h.eval(x))
    }

    pub fn omega(&self) -> Region {
        region(&self.observation.omega)
    }

    pub fn buffer(&self) -> Region {
        region(&self.observation.buffer)
    }

    pub fn observation_spec(&self, op: &DiscreteOperator) -> Result<ObservationSpec> {
        let o = &self.observation;
        ObservationSpec::new(op, self.omega(), o.sensors, self.source.t0, o.t1, o.t_end)
    }

    pub fn contour_params(&self, order: &OrderField) -> ContourParams {
        let mut p = ContourParams::for_order(order.max());
        let o = &self.solver.contour;
        if let Some(v) = o.theta {
            p.theta = v;
        }
        if let Some(v) = o.delta_scale {
            p.delta_scale = v;
        }
        if let Some(v) = o.eps {
            p.eps = v;
        }
        if let Some(v) = o.n_arc {
            p.n_arc = v;
        }
        if let Some(v) = o.n_leg {
            p.n_leg = v;
        }
        p
    }

    pub fn method(&self, op: &DiscreteOperator, order: &OrderField) -> DuhamelMethod {
        let spectral = match self.solver.method {
            MethodSpec::Spectral => true,
            MethodSpec::Contour => false,
            MethodSpec::Auto => order.is_constant() && op.is_self_adjoint(),
        };
        if spectral {
            DuhamelMethod::Spectral {
                n_modes: self.solver.n_modes,
            }
        } else {
            DuhamelMethod::Contour(self.contour_params(order))
        }
    }

    pub fn inverse_options(&self, op: &DiscreteOperator, order: &OrderField) -> InverseOptions {
        InverseOptions {
            method: self.method(op, order),
            svd_cutoff: self.solver.svd_cutoff,
            support_threshold: self.solver.support_threshold,
        }
    }

    /// Validates for the scenario's own experiment.
    pub fn validate(&self) -> Result<Vec<String>> {
        let (violations, log) = self.check()?;
        if violations.is_empty() {
            Ok(log)
        } else {
            Err(FracError::Hypothesis(violations))
        }
    }

    /// Structural conditions of the selected experiment. Returns the
    /// violations and a log of the checks and warnings.
    pub fn check(&self) -> Result<(Vec<Violation>, Vec<String>)> {
        let mut v = Vec::new();
        let mut log = Vec::new();
        for p in [
            &self.coefficients.a,
            &self.coefficients.b,
            &self.coefficients.c,
            &self.coefficients.rho,
            &self.source.mu,
            &self.source.h,
        ] {
            p.check()?;
        }
        if !(self.solver.dt > 0.0)
            || !(self.solver.svd_cutoff > 0.0)
            || !(self.solver.support_threshold >= 0.0)
        {
            return Err(invalid(
                "solver needs dt > 0, svd_cutoff > 0 and support_threshold >= 0",
            ));
        }
        let mesh = self.mesh()?;
        let coeffs = self.coefficient_set(&mesh);
        v.extend(coeffs.violations(&mesh));
        log.push(format!("coefficients: kappa = {}", coeffs.kappa));
        let order = self.order_field()?;
        v.extend(order.violations(&mesh));

        let grid = self.time_grid()?;
        let mu = self.mu_signal(grid);
        let t0 = self.source.t0;
        if !(t0 > 0.0) {
            v.push(Violation::new(
                Condition::SourceSupport,
                format!("T0 = {t0} must be positive"),
            ));
        } else if !mu
            .values
            .iter()
            .enumerate()
            .any(|(j, &x)| x != 0.0 && grid.t(j) > 0.0 && grid.t(j) < t0)
        {
            v.push(Violation::new(
                Condition::SourceSupport,
                format!("mu vanishes identically on (0, T0 = {t0})"),
            ));
        }
        let wave = matches!(order, OrderField::Constant(a) if a == 2.0);
        let drift_free = coeffs.is_drift_free();
        if wave && !drift_free {
            v.push(Violation::new(Condition::ZeroDrift, "order 2 needs b = 0"));
        }
        if self.experiment == Experiment::Forward {
            log.push(format!("checked {} for the forward experiment", tags(&v)));
            return Ok((v, log));
        }

        let o = &self.observation;
        if !(o.t_end >= t0) {
            v.push(Violation::new(
                Condition::Horizon,
                format!("T = {} is below T0 = {t0}", o.t_end),
            ));
        }
        if !(o.t1 >= 0.0 && o.t1 < o.t_end) {
            v.push(Violation::new(
                Condition::WindowStart,
                format!("window start T1 = {} is not in [0, T = {})", o.t1, o.t_end),
            ));
        }
        if self.experiment == Experiment::InvertMuH && !(o.t1 < t0) {
            v.push(Violation::new(
                Condition::WindowBeforeT0,
                format!("window start T1 = {} must lie before T0 = {t0}", o.t1),
            ));
        }
        if o.t_end > grid.t_end() + 1e-12 {
            return Err(invalid("observation horizon exceeds the solver horizon"));
        }
        if self.coefficient_set(&mesh).violations(&mesh).is_empty() {
            let op = DiscreteOperator::assemble(&mesh, &coeffs)?;
            let h = self.h_values(&op);
            let cols = self.inverse.basis.columns(&op)?;
            let omega = self.omega();
            let nonzero_in = |vals: &[f64], r: &Region| {
                op.coords
                    .iter()
                    .zip(vals)
                    .find(|(x, &y)| r.contains(**x) && y != 0.0)
                    .map(|(x, _)| *x)
            };
            if self.experiment == Experiment::InvertMuH && h.iter().all(|&x| x == 0.0) {
                v.push(Violation::new(
                    Condition::NonzeroSource,
                    "h vanishes identically",
                ));
            }
            match &order {
                OrderField::Constant(a) => {
                    let a = *a;
                    if !wave {
                        if let Some(x) = nonzero_in(&h, &omega) {
                            v.push(Violation::new(
                                Condition::SourceOffObservation,
                                format!("h is nonzero at x = {x} inside the observation region"),
                            ));
                        }
                        if let Some(x) = cols.iter().find_map(|c| nonzero_in(c, &omega)) {
                            v.push(Violation::new(
                                Condition::SourceOffObservation,
                                format!("basis for h is nonzero at x = {x} inside the observation region"),
                            ));
                        }
                    }
                    if a <= 1.0 && !coeffs.rho.iter().all(|&r| r == 1.0) {
                        v.push(Violation::new(
                            Condition::UnitDensity,
                            format!("order {a} needs rho = 1"),
                        ));
                    }
                    if a > 1.0 && !drift_free {
                        v.push(Violation::new(
                            Condition::ZeroDrift,
                            format!("order {a} needs b = 0"),
                        ));
                    }
                    if a == 1.0 && o.t1 > 0.0 {
                        log.push(
                            "warning: order 1 with a delayed window (T1 > 0) is outside the known uniqueness results"
                                .into(),
                        );
                    }
                    if wave {
                        let t_star = control_time(&mesh, &coeffs, &omega, t0)?;
                        log.push(format!("control time T* = {t_star}"));
                        if o.t_end < t_star - 1e-12 {
                            v.push(Violation::new(
                                Condition::ControlTime,
                                format!("T = {} is below the control time T* = {t_star}", o.t_end),
                            ));
                        }
                    }
                }
                OrderField::Piecewise(_) => {
                    let spec = ObservationSpec {
                        omega: omega.clone(),
                        t0,
                        t1: o.t1,
                        t_end: o.t_end,
                        sensors: vec![],
                        quadrature: vec![],
                    };
                    v.extend(variable_order_violations(
                        &op,
                        &order,
                        &self.buffer(),
                        &spec,
                        &cols,
                        Some(&h),
                    ));
                }
            }
        }
        let mut unique: Vec<Violation> = Vec::with_capacity(v.len());
        for x in v {
            if !unique.contains(&x) {
                unique.push(x);
            }
        }
        log.push(format!(
            "checked {} for the {} experiment",
            tags(&unique),
            self.experiment.name()
        ));
        Ok((unique, log))
    }
}

fn tags(v: &[Violation]) -> String {
    if v.is_empty() {
        "all conditions: none violated".into()
    } else {
        format!(
            "conditions: violated {}",
            v.iter()
                .map(|x| x.condition.tag())
                .collect::<Vec<_>>()
                .join(", ")
        )
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

/// CSV with a header `t,<x_1>,...` and one row per time sample.
pub fn field_csv(u: &SpaceTimeField) -> String {
    let mut s = String::from("t");
    for x in &u.coords {
        s.push_str(&format!(",{x}"));
    }
    s.push('\n');
    for j in 0..u.grid.n_points() {
        s.push_str(&format!("{}", u.grid.t(j)));
        for v in u.at(j) {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

/// CSV with the given header and rows of numbers.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(
            &r.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        s.push('\n');
    }
    s
}

pub fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| invalid(format!("JSON encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputEntry>,
    pub validation_log: Vec<String>,
    pub status: String,
    pub exit_code: i32,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code_for(err: &FracError) -> i32 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Collects artifacts of one run in an output directory.
pub struct ArtifactWriter {
    dir: PathBuf,
    outputs: Vec<OutputEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: vec![],
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.outputs.push(OutputEntry {
            file: name.into(),
            sha256: hex(&Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    pub fn outputs(&self) -> &[OutputEntry] {
        &self.outputs
    }

    /// Writes `manifest.json` (not itself listed among the outputs).
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = self.outputs;
        fs::write(self.dir.join("manifest.json"), json_text(&manifest)?)?;
        Ok(manifest)
    }
}

fn h_table(coords: &[f64], recovered: &[f64], truth: &[f64]) -> String {
    let rows: Vec<Vec<f64>> = (0..coords.len())
        .map(|i| vec![coords[i], recovered[i], truth[i]])
        .collect();
    table_csv(&["x", "recovered", "truth"], &rows)
}

fn spectrum_table(sv: &[f64]) -> String {
    let rows: Vec<Vec<f64>> = sv
        .iter()
        .enumerate()
        .map(|(i, &s)| vec![i as f64, s])
        .collect();
    table_csv(&["index", "singular_value"], &rows)
}

/// Diagnostics written next to a forward field.
#[derive(Debug, Clone, Serialize)]
pub struct ForwardSummary {
    pub method: DuhamelMethod,
    pub dt: f64,
    pub steps: usize,
    pub n_dof: usize,
    pub max_abs: f64,
    pub causal_onset: Option<f64>,
    pub mu_onset: Option<f64>,
    /// Laplace-domain residuals on the run horizon (truncated transforms).
    pub weak_residuals: Vec<WeakCheck>,
}

/// In-memory result of one experiment.
#[derive(Debug, Clone)]
pub enum Outcome {
    Forward {
        field: SpaceTimeField,
        summary: ForwardSummary,
    },
    InvertH {
        truth: Vec<f64>,
        h: Vec<f64>,
        report: InverseReport,
    },
    InvertMuH {
        truth_h: Vec<f64>,
        truth_mu: TimeSignal,
        recovery: MuHRecovery,
    },
}

impl Outcome {
    pub fn report(&self) -> Option<&InverseReport> {
        match self {
            Outcome::Forward { .. } => None,
            Outcome::InvertH { report, .. } => Some(report),
            Outcome::InvertMuH { recovery, .. } => Some(&recovery.report),
        }
    }
}

impl Scenario {
    /// Forward field for the source mu(t) h(x); spectral wave solver for order 2.
    pub fn solve_forward(
        &self,
        op: &DiscreteOperator,
        order: &OrderField,
        mu: &TimeSignal,
        h: &[f64],
    ) -> Result<SpaceTimeField> {
        if matches!(order, OrderField::Constant(a) if *a == 2.0) {
            let eig = op.eigensystem(self.solver.n_modes.unwrap_or(op.n_dof()))?;
            wave_solve(op, &eig, mu, h)
        } else {
            duhamel_solve(op, order, mu, h, self.method(op, order))
        }
    }

    /// Runs the experiment without validation or file output.
    pub fn compute(&self) -> Result<Outcome> {
        let op = self.operator()?;
        let order = self.order_field()?;
        let grid = self.time_grid()?;
        let mu = self.mu_signal(grid);
        let h = self.h_values(&op);
        let u = self.solve_forward(&op, &order, &mu, &h)?;
        match self.experiment {
            Experiment::Forward => {
                let weak_residuals =
                    verify_weak_solution(&op, &order, &u, &mu, &h, &[1.0, 2.0, 4.0])?;
                let summary = ForwardSummary {
                    method: self.method(&op, &order),
                    dt: grid.dt,
                    steps: grid.steps,
                    n_dof: u.n_dof(),
                    max_abs: u.max_abs(),
                    causal_onset: u.causal_onset(),
                    mu_onset: mu.support(0.0).map(|s| s.0),
                    weak_residuals,
                };
                Ok(Outcome::Forward { field: u, summary })
            }
            Experiment::InvertH => {
                let spec = self.observation_spec(&op)?;
                let data = observe(&u, &spec)?;
                let opts = self.inverse_options(&op, &order);
                let (est, mut report) =
                    reconstruct_h(&op, &order, &mu, &spec, &data, &self.inverse.basis, &opts)?;
                report.compare_h(&op, &h);
                Ok(Outcome::InvertH {
                    truth: h,
                    h: est,
                    report,
                })
            }
            Experiment::InvertMuH => {
                let spec = self.observation_spec(&op)?;
                let data = observe(&u, &spec)?;
                let opts = self.inverse_options(&op, &order);
                let mut recovery =
                    reconstruct_mu_h(&op, &order, &mu, &spec, &data, &self.inverse.basis, &opts)?;
                recovery.report.compare_h(&op, &h);
                recovery.report.compare_mu(&mu);
                Ok(Outcome::InvertMuH {
                    truth_h: h,
                    truth_mu: mu,
                    recovery,
                })
            }
        }
    }
}

/// Writes the artifacts of an outcome.
pub fn write_outcome(outcome: &Outcome, w: &mut ArtifactWriter) -> Result<()> {
    match outcome {
        Outcome::Forward { field, summary } => {
            w.write("field.csv", &field_csv(field))?;
            w.write("summary.json", &json_text(summary)?)?;
        }
        Outcome::InvertH { truth, h, report } => {
            w.write("report.json", &json_text(report)?)?;
            w.write("h.csv", &h_table(&report.coords, h, truth))?;
            w.write(
                "singular_values.csv",
                &spectrum_table(&report.singular_values),
            )?;
        }
        Outcome::InvertMuH {
            truth_h,
            truth_mu,
            recovery,
        } => {
            let report = &recovery.report;
            w.write("report.json", &json_text(report)?)?;
            w.write("h.csv", &h_table(&report.coords, &recovery.h, truth_h))?;
            let rows: Vec<Vec<f64>> = (0..recovery.mu.grid.n_points())
                .map(|j| {
                    vec![
                        recovery.mu.grid.t(j),
                        recovery.mu.values[j],
                        truth_mu.values[j],
                    ]
                })
                .collect();
            w.write("mu.csv", &table_csv(&["t", "recovered", "truth"], &rows))?;
            w.write(
                "singular_values.csv",
                &spectrum_table(&report.singular_values),
            )?;
        }
    }
    Ok(())
}

fn run_body(sc: &Scenario, w: &mut ArtifactWriter) -> Result<()> {
    write_outcome(&sc.compute()?, w)
}

/// Validates and runs the scenario's experiment, writing artifacts and
/// `manifest.json` into `out`. Failures of the experiment are recorded in
/// the manifest (status and exit code); only I/O failures are returned.
pub fn run_experiment(sc: &Scenario, out: &Path) -> Result<RunManifest> {
    run_validated(sc, out, sc.experiment.name(), |w| {
        run_body(sc, w)?;
        Ok(true)
    })
}

/// Validates `sc`, runs `body` when it is admissible and records the outcome
/// in `manifest.json`. `body` returns whether its checks passed; failures
/// other than I/O are recorded rather than returned.
pub fn run_validated(
    sc: &Scenario,
    out: &Path,
    label: &str,
    body: impl FnOnce(&mut ArtifactWriter) -> Result<bool>,
) -> Result<RunManifest> {
    let started = unix_now();
    let mut w = ArtifactWriter::new(out)?;
    let mut manifest = RunManifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        experiment: label.into(),
        scenario_hash: sc.hash()?,
        seed: sc.seed,
        started_unix: started,
        finished_unix: started,
        outputs: vec![],
        validation_log: vec![],
        status: "ok".into(),
        exit_code: EXIT_OK,
    };
    let result = match sc.check() {
        Ok((violations, log)) => {
            manifest.validation_log = log;
            if violations.is_empty() {
                w.write("scenario.toml", &sc.canonical()?)?;
                body(&mut w)
            } else {
                Err(FracError::Hypothesis(violations))
            }
        }
        Err(e) => Err(e),
    };
    match result {
        Ok(true) => {}
        Ok(false) => {
            manifest.status = "checks failed".into();
            manifest.exit_code = EXIT_FAILED_CHECK;
        }
        Err(FracError::Io(e)) => return Err(FracError::Io(e)),
        Err(e) => {
            manifest.status = e.to_string();
            manifest.exit_code = exit_code_for(&e);
        }
    }
    manifest.finished_unix = unix_now();
    w.finish(manifest)
}

/// One-line summary of an inverse report.
pub fn summarize(report: &InverseReport) -> String {
    format!(
        "rank {}/{}, certificate {:e}, h error {}",
        report.rank,
        report.n_basis,
        report.certificate,
        report.h_error.map_or("n/a".into(), |e| format!("{e:e}"))
    )
}
