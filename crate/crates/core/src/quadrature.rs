//! Gauss–Legendre rules and the singular angular weights
//! `∫ sin^{N−2}φ · cos^β φ dφ` used by the finite-volume discretizations.

use std::f64::consts::FRAC_PI_2;

const GL_POINTS: usize = 12;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `∫_a^b sin^{N−2}φ · cos^β φ dφ` for `0 ≤ a < b ≤ π/2` and `β > −1`.
///
/// In `t = π/2 − φ` the integrand is `cos^{N−2}t · t^β · (sin t / t)^β`.
/// The piece touching `t = 0` is mapped through `y = t^{β+1}`, which removes
/// the singularity; the rest is split geometrically and integrated in `t`.
pub fn angular_weight(a: f64, b: f64, n_dim: usize, beta: f64) -> f64 {
    debug_assert!(beta > -1.0 && a <= b);
    let ta = (FRAC_PI_2 - a).max(0.0);
    let mut lo = (FRAC_PI_2 - b).max(0.0);
    let mut acc = 0.0;
    if lo == 0.0 {
        let top = ta.min(SINGULAR_PIECE);
        acc += singular_piece(top, n_dim, beta);
        lo = top;
    }
    while lo < ta {
        let hi = (1.5 * lo).min(ta);
        acc += gl(lo, hi, |t| t.cos().powi(n_dim as i32 - 2) * t.sin().powf(beta));
        lo = hi;
    }
    acc
}

const SINGULAR_PIECE: f64 = 0.01;

/// `∫_0^top cos^{N−2}t · sin^β t dt` via `y = t^{β+1}`.
fn singular_piece(top: f64, n_dim: usize, beta: f64) -> f64 {
    let p = beta + 1.0;
    gl(0.0, top.powf(p), |y| {
        let t = y.powf(1.0 / p);
        let sinc = if t < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t };
        t.cos().powi(n_dim as i32 - 2) * sinc.powf(beta)
    }) / p
}

fn gl(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gl_cached();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

fn gl_cached() -> &'static (Vec<f64>, Vec<f64>) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_POINTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let int = |f: &dyn Fn(f64) -> f64| x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum::<f64>();
        assert_relative_eq!(int(&|_| 1.0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(int(&|t| t.powi(8)), 2.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn weight_matches_closed_forms() {
        // N = 3: ∫ sin φ cos^β φ = cos^{β+1} a − cos^{β+1} b, over β+1.
        for beta in [-0.9, -0.1, 0.0, 0.5, 1.0, 1.5] {
            let (a, b): (f64, f64) = (0.3, FRAC_PI_2);
            let exact = (a.cos().powf(beta + 1.0) - 0.0) / (beta + 1.0);
            assert_relative_eq!(angular_weight(a, b, 3, beta), exact, epsilon = 1e-12);
            let (a, b): (f64, f64) = (0.0, 0.7);
            let exact = (1.0 - b.cos().powf(beta + 1.0)) / (beta + 1.0);
            assert_relative_eq!(angular_weight(a, b, 3, beta), exact, epsilon = 1e-12);
        }
        // N = 4, β = 1: ∫_0^{π/2} sin²φ cos φ = 1/3.
        assert_relative_eq!(angular_weight(0.0, FRAC_PI_2, 4, 1.0), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn weight_is_additive() {
        let whole = angular_weight(0.1, 1.5, 5, -0.4);
        let parts = angular_weight(0.1, 0.9, 5, -0.4) + angular_weight(0.9, 1.5, 5, -0.4);
        assert_relative_eq!(whole, parts, epsilon = 1e-12);
    }
}
