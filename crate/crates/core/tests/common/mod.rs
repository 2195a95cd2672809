//! Test-only oracles: double-double arithmetic (about 32 significant
//! digits) with exp, ln and a Stirling-series Gamma, plus extended-precision
//! Mittag-Leffler Taylor sums and reference values frozen from a 50-digit
//! evaluation.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.3190468138462996e-17,
    };
    pub const HALF_LN_2PI: Dd = Dd {
        hi: 0.9189385332046728,
        lo: -3.8782941580672414e-17,
    };
    pub const SQRT_PI: Dd = Dd {
        hi: 1.772453850905516,
        lo: -7.666586499825799e-17,
    };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn scale(self, s: f64) -> Self {
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub fn recip(self) -> Self {
        Dd::ONE / self
    }

    pub fn powi(self, n: u32) -> Self {
        let mut r = Dd::ONE;
        let mut b = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                r = r * b;
            }
            b = b * b;
            n >>= 1;
        }
        r
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / Dd::LN2.hi).round();
        let r = (self - Dd::LN2 * Dd::new(k)).scale(1.0 / 1024.0);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..30 {
            term = term * r / Dd::new(n as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        // 2^k in two factors keeps each within range
        let k = k as i32;
        sum.scale(2f64.powi(k / 2)).scale(2f64.powi(k - k / 2))
    }

    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of a non-positive number");
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..3 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// Bernoulli numbers B_2, B_4, ..., B_26 as (numerator, denominator).
const BERNOULLI: [(f64, f64); 13] = [
    (1.0, 6.0),
    (-1.0, 30.0),
    (1.0, 42.0),
    (-1.0, 30.0),
    (5.0, 66.0),
    (-691.0, 2730.0),
    (7.0, 6.0),
    (-3617.0, 510.0),
    (43867.0, 798.0),
    (-174611.0, 330.0),
    (854513.0, 138.0),
    (-236364091.0, 2730.0),
    (8553103.0, 6.0),
];

/// ln Gamma(z) for z >= 25 by the Stirling series with 13 correction terms.
fn ln_gamma_stirling(z: Dd) -> Dd {
    assert!(z.hi >= 25.0);
    let mut s = (z - Dd::new(0.5)) * z.ln() - z + Dd::HALF_LN_2PI;
    let z2 = z * z;
    let mut zp = z;
    for (k, &(num, den)) in BERNOULLI.iter().enumerate() {
        let m = 2.0 * (k + 1) as f64;
        s = s + Dd::new(num) / (Dd::new(den) * Dd::new(m * (m - 1.0)) * zp);
        zp = zp * z2;
    }
    s
}

/// ln Gamma(x) for x > 0, shifting up to the Stirling range.
pub fn dd_ln_gamma(x: f64) -> Dd {
    dd_ln_gamma_dd(Dd::new(x))
}

/// Same with a double-double argument, so that alpha k + beta can be
/// formed without rounding.
pub fn dd_ln_gamma_dd(x: Dd) -> Dd {
    assert!(x.hi > 0.0);
    let mut z = x;
    let mut prod = Dd::ONE;
    while z.hi < 25.0 {
        prod = prod * z;
        z = z + Dd::ONE;
    }
    ln_gamma_stirling(z) - prod.ln()
}

pub fn dd_gamma(x: f64) -> f64 {
    dd_ln_gamma(x).exp().to_f64()
}

/// E_{alpha,beta}(x) for real x by the Taylor series in double-double with
/// up to `max_terms` terms, each term exp(k ln|x| - ln Gamma(alpha k + beta)).
pub fn dd_mittag_leffler(alpha: f64, beta: f64, x: f64, max_terms: usize) -> f64 {
    let mut sum = Dd::new(1.0 / dd_gamma(beta));
    if x == 0.0 {
        return sum.to_f64();
    }
    let lx = Dd::new(x.abs()).ln();
    for k in 1..max_terms {
        let arg = Dd::new(alpha) * Dd::new(k as f64) + Dd::new(beta);
        let mag = (lx * Dd::new(k as f64) - dd_ln_gamma_dd(arg)).exp();
        let term = if x < 0.0 && k % 2 == 1 { -mag } else { mag };
        sum = sum + term;
        if mag.hi < 1e-40 && alpha * k as f64 + beta > x.abs().powf(1.0 / alpha) + 10.0 {
            break;
        }
    }
    sum.to_f64()
}

/// E_{1/2,1/2}(x) by the Taylor series with exact Gamma values at integers
/// and half-integers: Gamma(k/2 + 1/2) alternates between (m-1)! and
/// (2m)! sqrt(pi) / (4^m m!).
pub fn dd_ml_half_half(x: f64, terms: usize) -> f64 {
    let xd = Dd::new(x);
    // even k = 2m: Gamma(m + 1/2); odd k = 2m + 1: Gamma(m + 1) = m!
    let mut g_half = Dd::SQRT_PI; // Gamma(1/2)
    let mut g_int = Dd::ONE; // Gamma(1)
    let mut xk = Dd::ONE;
    let mut sum = Dd::ZERO;
    for k in 0..terms {
        let m = k / 2;
        let term = if k % 2 == 0 {
            if m > 0 {
                g_half = g_half * Dd::new(m as f64 - 0.5);
            }
            xk / g_half
        } else {
            if m > 0 {
                g_int = g_int * Dd::new(m as f64);
            }
            xk / g_int
        };
        if !term.hi.is_finite() || (k > 50 && term.hi.abs() < 1e-40) {
            break;
        }
        sum = sum + term;
        xk = xk * xd;
    }
    sum.to_f64()
}

/// (alpha, beta, Re z, Im z, Re E, Im E), Taylor sums at up to 1100 digits.
pub const ML_REFERENCE: [(f64, f64, f64, f64, f64, f64); 16] = [
    (0.5, 0.5, -3.0, 0.0, 0.02718613000358643569, 0.0),
    (0.5, 0.5, -50.0, 0.0, 0.0001127702815676619389, 0.0),
    (0.5, 1.0, -10.0, 0.0, 0.05614099274382258586, 0.0),
    (0.5, 1.0, -50.0, 0.0, 0.0112815362653237725, 0.0),
    (0.8, 0.8, -20.0, 0.0, 0.0004958252095920866887, 0.0),
    (0.8, 1.8, -50.0, 0.0, 0.01991064447684194015, 0.0),
    (0.3, 0.3, -8.0, 0.0, 0.003110791423923998053, 0.0),
    (0.9, 0.9, -30.0, 0.0, 0.0001182504479430720679, 0.0),
    (1.5, 1.5, -20.0, 0.0, 0.006198501246861341928, 0.0),
    (1.5, 1.0, -50.0, 0.0, -0.004578385105839277991, 0.0),
    (1.0, 1.0, -50.0, 0.0, 1.928749847963917783e-22, 0.0),
    (1.9, 1.9, -40.0, 0.0, 0.06984973110194137198, 0.0),
    (
        0.7,
        1.2,
        -3.0,
        4.0,
        0.0671871414269686298,
        0.09724281450961477779,
    ),
    (
        0.6,
        0.6,
        -30.0,
        30.0,
        -1.807283236545442701e-6,
        0.0001521881128939142053,
    ),
    (
        0.5,
        1.0,
        -2.0,
        45.0,
        0.0005565363156804623505,
        0.01251589101037736261,
    ),
    (
        1.2,
        0.7,
        0.0,
        -25.0,
        -30.20980079988533884,
        -76.1886870841942749,
    ),
];

/// Gamma at scattered points (the binary64 arguments, not their decimal
/// spellings), 40-digit evaluation.
pub const GAMMA_REFERENCE: [(f64, f64); 8] = [
    (0.001, 999.4237724845954453),
    (0.37, 2.4035500200786532783),
    (1.5, 0.88622692545275801365),
    (4.7, 15.431411600047435652),
    (9.99, 354802.01701983109757),
    (33.3, 7.4875775965226323274e+35),
    (101.25, 2.9558374475433668949e+158),
    (170.0, 4.2690680090047052749e+304),
];

pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

pub fn bump(t: f64, lo: f64, hi: f64) -> f64 {
    fracsource::fractional::bump_with_derivatives(t, 0.5 * (lo + hi), 0.5 * (hi - lo)).0
}

/// Least-squares slope of log2(err) against the refinement level.
pub fn observed_rate(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = (0..errors.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
