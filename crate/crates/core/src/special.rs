//! Gamma function and the two-parameter Mittag-Leffler function.
//!
//! Gamma uses upward recurrence into a Stirling series with the power split
//! in half so that large arguments do not overflow before the final product.
//! Mittag-Leffler picks between a power series, an asymptotic expansion with
//! pole residues, and a Hankel-contour integral.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

use crate::error::{invalid, FracError, Result};
use crate::quadrature::{composite, gl16, graded_breaks};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const STIRLING_SHIFT: f64 = 10.0;
/// B_{2k} / (2k (2k - 1)) for k = 1..8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];
const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

fn stirling_series(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn stirling_series_c(z: Complex64) -> Complex64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut acc = Complex64::new(0.0, 0.0);
    for c in STIRLING.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// sin(pi x) with exact argument reduction.
pub fn sin_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    let mut r = x - 2.0 * (0.5 * x).round();
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

fn gamma_positive(x: f64) -> f64 {
    if x > GAMMA_MAX_ARG {
        return f64::INFINITY;
    }
    let mut y = x;
    let mut prod = 1.0;
    while y < STIRLING_SHIFT {
        prod *= y;
        y += 1.0;
    }
    let half = 0.5 * (y - 0.5);
    let p = y.powf(half);
    SQRT_2PI * (p * (-y).exp()) * p * stirling_series(y).exp() / prod
}

/// Gamma function of a real argument; errors at the poles.
pub fn gamma(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) {
        return Err(FracError::GammaPole(x));
    }
    if x.is_nan() {
        return Err(invalid("Gamma of NaN"));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x >= 0.5 {
        gamma_positive(x)
    } else {
        PI / (sin_pi(x) * gamma_positive(1.0 - x))
    }
}

/// Reciprocal Gamma, an entire function: zero at the non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x >= 0.5 {
        if x > GAMMA_MAX_ARG {
            (-ln_gamma_positive(x)).exp()
        } else {
            1.0 / gamma_positive(x)
        }
    } else {
        sin_pi(x) * gamma_positive(1.0 - x) / PI
    }
}

fn ln_gamma_positive(x: f64) -> f64 {
    if x < STIRLING_SHIFT {
        gamma_positive(x).ln()
    } else {
        (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_series(x)
    }
}

/// Natural log of |Gamma(x)|.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) {
        return Err(FracError::GammaPole(x));
    }
    if x > 0.0 {
        Ok(ln_gamma_positive(x))
    } else {
        Ok((PI / sin_pi(x).abs()).ln() - ln_gamma_positive(1.0 - x))
    }
}

/// Gamma function of a complex argument.
pub fn gamma_complex(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return gamma(z.re).map(|g| Complex64::new(g, 0.0));
    }
    Ok(gamma_complex_unchecked(z))
}

fn gamma_complex_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let s = (z * PI).sin();
        return Complex64::new(PI, 0.0)
            / (s * gamma_complex_unchecked(Complex64::new(1.0, 0.0) - z));
    }
    let mut y = z;
    let mut prod = Complex64::new(1.0, 0.0);
    while y.re < STIRLING_SHIFT {
        prod *= y;
        y += 1.0;
    }
    let lg = (y - 0.5) * y.ln() - y + LN_SQRT_2PI + stirling_series_c(y);
    lg.exp() / prod
}

/// Evaluation strategy used for a Mittag-Leffler value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MlRegime {
    Series,
    Asymptotic,
    Integral,
}

/// Parameters of E_{alpha, beta}; `regime` forces a strategy when set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MlParams {
    pub alpha: f64,
    pub beta: f64,
    pub regime: Option<MlRegime>,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            regime: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MlValue {
    pub value: Complex64,
    pub regime: MlRegime,
}

const ASYM_TERMS: usize = 80;

/// Reusable evaluator for a fixed (alpha, beta). Coefficient tables are
/// built once, which matters when a kernel needs millions of evaluations.
#[derive(Debug, Clone)]
pub struct MittagLeffler {
    alpha: f64,
    beta: f64,
    series: Vec<f64>,
    asym: Vec<f64>,
    asym_envelope: Vec<f64>,
    z_switch: f64,
    cut_free: bool,
}

impl MittagLeffler {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid(format!(
                "Mittag-Leffler order alpha={alpha} outside (0, 2]"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!(
                "Mittag-Leffler beta={beta} must be positive"
            )));
        }
        let cap = if alpha < 1.0 {
            (300.0 / alpha).ceil() as usize
        } else {
            300
        };
        let series = (0..cap).map(|k| rgamma(alpha * k as f64 + beta)).collect();
        let asym = (0..=ASYM_TERMS)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    rgamma(beta - alpha * k as f64)
                }
            })
            .collect();
        // |1/Gamma(b - a k)| <= Gamma(1 - b + a k) / pi once the argument is
        // negative; bounding by this envelope keeps accidental near-zero
        // coefficients from ending the sum early.
        let asym_envelope = (0..=ASYM_TERMS)
            .map(|k| {
                let x = beta - alpha * k as f64;
                if x >= 0.5 {
                    rgamma(x).abs()
                } else {
                    gamma_positive(1.0 - x) / PI
                }
            })
            .collect();
        let cut_free = alpha.fract() == 0.0 && beta.fract() == 0.0;
        Ok(Self {
            alpha,
            beta,
            series,
            asym,
            asym_envelope,
            z_switch: 5.0f64.min(3.0f64.powf(alpha)),
            cut_free,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Automatic regime selection.
    pub fn eval(&self, z: Complex64) -> MlValue {
        if z.norm() <= self.z_switch {
            if let Some(value) = self.series_sum(z) {
                return MlValue {
                    value,
                    regime: MlRegime::Series,
                };
            }
        }
        if let Some(v) = self.asymptotic(z) {
            return MlValue {
                value: v,
                regime: MlRegime::Asymptotic,
            };
        }
        MlValue {
            value: self.integral(z),
            regime: MlRegime::Integral,
        }
    }

    /// Real-argument convenience wrapper.
    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).value.re
    }

    /// Evaluate with a forced regime. The asymptotic regime may refuse.
    pub fn eval_with(&self, z: Complex64, regime: MlRegime) -> Result<MlValue> {
        let value = match regime {
            MlRegime::Series => {
                if z.norm() > 10.0 {
                    return Err(invalid("series regime is limited to |z| <= 10"));
                }
                self.series_sum(z).ok_or_else(|| {
                    FracError::Numerical(format!(
                        "Taylor series does not converge in double precision at z = {z}"
                    ))
                })?
            }
            MlRegime::Asymptotic => self.asymptotic(z).ok_or_else(|| {
                FracError::Numerical(format!("asymptotic expansion does not converge at z = {z}"))
            })?,
            MlRegime::Integral => self.integral(z),
        };
        Ok(MlValue { value, regime })
    }

    /// Taylor sum; `None` when the table runs out or a term overflows.
    fn series_sum(&self, z: Complex64) -> Option<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut zk = Complex64::new(1.0, 0.0);
        let mut small = 0;
        for &c in &self.series {
            let term = zk * c;
            if !(term.re.is_finite() && term.im.is_finite()) {
                return None;
            }
            sum += term;
            if term.norm() <= 1e-17 * sum.norm() {
                small += 1;
                if small >= 2 {
                    return Some(sum);
                }
            } else {
                small = 0;
            }
            zk *= z;
            if zk.norm() == 0.0 {
                return Some(sum);
            }
        }
        None
    }

    /// Principal-sheet poles s_j = |z|^{1/alpha} e^{i(arg z + 2 pi j)/alpha}
    /// with arguments in (-pi, pi].
    fn poles(&self, z: Complex64) -> Vec<Complex64> {
        let r = z.norm().powf(1.0 / self.alpha);
        let arg = z.arg();
        let mut out = Vec::new();
        let jmax = (self.alpha / 2.0).ceil() as i64 + 1;
        for j in -jmax..=jmax {
            let phi = (arg + TAU * j as f64) / self.alpha;
            if phi > -PI && phi <= PI {
                out.push(Complex64::from_polar(r, phi));
            }
        }
        out
    }

    fn residue(&self, s: Complex64) -> Complex64 {
        s.powf(1.0 - self.beta) * s.exp() / self.alpha
    }

    fn asymptotic(&self, z: Complex64) -> Option<Complex64> {
        let poles = self.poles(z);
        if !self.cut_free {
            for s in &poles {
                if PI - s.arg().abs() < 0.05 * PI {
                    return None;
                }
            }
        }
        let mut sum: Complex64 = poles.iter().map(|&s| self.residue(s)).sum();
        let zinv = z.inv();
        let mut zk = Complex64::new(1.0, 0.0);
        let mut prev = f64::INFINITY;
        for k in 1..=ASYM_TERMS {
            zk *= zinv;
            let c = self.asym[k];
            sum -= zk * c;
            if self.cut_free && c == 0.0 && self.asym[k..].iter().all(|&v| v == 0.0) {
                return sum.is_finite().then_some(sum);
            }
            let env = zk.norm() * self.asym_envelope[k];
            if env > prev {
                return None;
            }
            if env <= 1e-17 * sum.norm().max(1e-300) {
                return sum.is_finite().then_some(sum);
            }
            prev = env;
        }
        None
    }

    fn integral(&self, z: Complex64) -> Complex64 {
        let poles = self.poles(z);
        let rz = z.norm().powf(1.0 / self.alpha);
        let candidates = [
            0.6 * PI,
            0.7 * PI,
            0.8 * PI,
            0.9 * PI,
            0.65 * PI,
            0.75 * PI,
            0.85 * PI,
        ];
        let mut theta = candidates[0];
        let mut best = -1.0;
        for &th in &candidates {
            let d = poles
                .iter()
                .map(|s| (s.arg().abs() - th).abs())
                .fold(f64::INFINITY, f64::min);
            if d > best + 1e-12 {
                best = d;
                theta = th;
            }
        }
        let delta = 1.0f64.min(0.5 * rz);
        let r_max = delta + 40.0 / theta.cos().abs();
        let standoff = (rz * best.min(0.5 * PI).sin()).max(1e-6 * rz);
        let focus = if rz > delta && rz < r_max {
            Some((rz, standoff))
        } else {
            None
        };

        let mut residues = Complex64::new(0.0, 0.0);
        for &s in &poles {
            if s.arg().abs() < theta && s.norm() > delta {
                residues += self.residue(s);
            }
        }

        let a = self.alpha;
        let b = self.beta;
        let f = |s: Complex64| -> Complex64 {
            let ls = s.ln();
            let sa = (ls * a).exp();
            (s + ls * (a - b)).exp() / (sa - z)
        };

        let leg = graded_breaks(delta, r_max, 0.0, focus, 4.0);
        let (rn, rw) = composite(&leg, gl16());
        let real_input = z.im == 0.0;
        let e_up = Complex64::from_polar(1.0, theta);
        let e_dn = e_up.conj();

        // upper half: arc over [0, theta] and the upper leg
        let arc_panels = 4;
        let arc_breaks: Vec<f64> = (0..=arc_panels)
            .map(|i| theta * i as f64 / arc_panels as f64)
            .collect();
        let (an, aw) = composite(&arc_breaks, gl16());
        let mut upper = Complex64::new(0.0, 0.0);
        for (&phi, &w) in an.iter().zip(&aw) {
            let e = Complex64::from_polar(1.0, phi);
            let s = e * delta;
            upper += f(s) * Complex64::i() * s * w;
        }
        for (&r, &w) in rn.iter().zip(&rw) {
            upper += f(e_up * r) * e_up * w;
        }
        if real_input {
            let v = upper.im / PI;
            return Complex64::new(residues.re + v, 0.0);
        }
        let mut lower = Complex64::new(0.0, 0.0);
        for (&phi, &w) in an.iter().zip(&aw) {
            let e = Complex64::from_polar(1.0, -phi);
            let s = e * delta;
            lower += f(s) * Complex64::i() * s * w;
        }
        for (&r, &w) in rn.iter().zip(&rw) {
            lower -= f(e_dn * r) * e_dn * w;
        }
        residues + (upper + lower) / Complex64::new(0.0, TAU)
    }
}

/// One-shot evaluation of E_{alpha, beta}(z).
pub fn mittag_leffler(params: &MlParams, z: Complex64) -> Result<MlValue> {
    let ml = MittagLeffler::new(params.alpha, params.beta)?;
    match params.regime {
        None => Ok(ml.eval(z)),
        Some(r) => ml.eval_with(z, r),
    }
}

/// Outcome of checking |E_{a,a}(-t^a lambda)| (1 + t^a lambda) over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MlBound {
    pub constant: f64,
    pub worst_t: f64,
    pub worst_lambda: f64,
}

/// Smallest C with |E_{a,a}(-t^a lambda)| <= C / (1 + t^a lambda) on the grid.
pub fn ml_bound_check(alpha: f64, t_grid: &[f64], lambda_grid: &[f64]) -> Result<MlBound> {
    let ml = MittagLeffler::new(alpha, alpha)?;
    let mut out = MlBound {
        constant: 0.0,
        worst_t: f64::NAN,
        worst_lambda: f64::NAN,
    };
    for &t in t_grid {
        if t < 0.0 {
            return Err(invalid("negative time in bound check"));
        }
        for &lam in lambda_grid {
            let x = t.powf(alpha) * lam;
            let ratio = ml.eval_real(-x).abs() * (1.0 + x);
            if ratio > out.constant {
                out = MlBound {
                    constant: ratio,
                    worst_t: t,
                    worst_lambda: lam,
                };
            }
        }
    }
    Ok(out)
}
