//! Named structural conditions. Every rejected configuration carries the tag
//! of the condition it breaks so that reports and exit codes can point at it.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Condition {
    /// Density bounded below by a positive constant.
    Rho,
    /// Uniform ellipticity of `a` and the lower bound on `c`.
    Ellipticity,
    /// Source profile compactly supported and not identically zero on (0, T0).
    SourceSupport,
    /// Order subdomains cover the domain without overlap.
    Partition,
    /// Admissible order spread: 0 < a_min <= a_max < min(2 a_min, 1).
    VariableOrder,
    /// Interfaces between order subdomains lie in the buffer set, and h vanishes there.
    InterfaceBuffer,
    /// h vanishes in the observation set, which meets the buffer set.
    ObservationBuffer,
    /// Observation horizon T is at least T0.
    Horizon,
    /// Window start T1 lies before T.
    WindowStart,
    /// Window start T1 lies before T0.
    WindowBeforeT0,
    /// h agrees in the observation set and is not identically zero.
    NonzeroSource,
    /// h vanishes in the observation set.
    SourceOffObservation,
    /// Density equal to one (first-order and fractional constant-order case).
    UnitDensity,
    /// Drift coefficient b vanishes.
    ZeroDrift,
    /// Observation time exceeds the travel-time control bound.
    ControlTime,
}

impl Condition {
    pub fn tag(self) -> &'static str {
        match self {
            Condition::Rho => "rho-positive",
            Condition::Ellipticity => "ellipticity",
            Condition::SourceSupport => "t1b",
            Condition::Partition => "partition",
            Condition::VariableOrder => "vo",
            Condition::InterfaceBuffer => "t3b",
            Condition::ObservationBuffer => "t3aa",
            Condition::Horizon => "T>=T0",
            Condition::WindowStart => "T1<T",
            Condition::WindowBeforeT0 => "T1<T0",
            Condition::NonzeroSource => "c2aa",
            Condition::SourceOffObservation => "h=0-in-omega",
            Condition::UnitDensity => "rho=1",
            Condition::ZeroDrift => "b=0",
            Condition::ControlTime => "T>=T*",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub detail: String,
}

impl Violation {
    pub fn new(condition: Condition, detail: impl Into<String>) -> Self {
        Self {
            condition,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.condition, self.detail)
    }
}
