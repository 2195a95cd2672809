//! Gauss–Legendre rules and composite panel helpers.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 1 {
        return (z, 1.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Cached 16-point rule, the workhorse panel rule.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Composite rule on the given breakpoints: returns (nodes, weights).
pub fn composite(breaks: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = rule;
    let mut nodes = Vec::with_capacity(x.len() * breaks.len());
    let mut weights = Vec::with_capacity(x.len() * breaks.len());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Breakpoints on [a, b] whose panel widths stay below `w_max`, shrink
/// geometrically towards `a` (scale `a - origin` from a singular point at
/// `origin`) and towards a near-singular point at radius `focus` with
/// stand-off distance `standoff`.
pub fn graded_breaks(
    a: f64,
    b: f64,
    origin: f64,
    focus: Option<(f64, f64)>,
    w_max: f64,
) -> Vec<f64> {
    let mut out = vec![a];
    let mut r = a;
    while r < b {
        let mut w = w_max.min((r - origin).max(1e-300));
        if let Some((c, d)) = focus {
            let dist = (r - c).abs().max(d);
            if r < c {
                w = w.min(0.5 * dist).min((c - r).max(d));
            } else {
                w = w.min(dist);
            }
        }
        r = (r + w).min(b);
        if b - r < 1e-12 * w {
            r = b;
        }
        out.push(r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        for deg in 0..32 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert!((q - exact).abs() < 1e-14, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn odd_rule_has_center_node() {
        let (x, w) = gauss_legendre(5);
        assert!(x[2].abs() < 1e-16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_exp() {
        let br = graded_breaks(0.0, 10.0, -1.0, None, 1.0);
        let (x, w) = composite(&br, gl16());
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * (-x).exp()).sum();
        assert!((q - (1.0 - (-10.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn graded_breaks_refine_near_focus() {
        let br = graded_breaks(1.0, 20.0, 0.0, Some((5.0, 0.01)), 4.0);
        let near = br.windows(2).filter(|p| (p[0] - 5.0).abs() < 0.1).count();
        assert!(near >= 3);
        assert_eq!(*br.last().unwrap(), 20.0);
    }
}
