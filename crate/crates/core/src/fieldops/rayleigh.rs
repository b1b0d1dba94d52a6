//! Upper estimates of the first eigenvalue of `−L_μ` on the model half-ball by
//! Rayleigh quotients of trial functions `cos^α φ · χ(r, φ)`.
//!
//! For such trials the ground-state identity turns the quotient into
//!
//! ```text
//! ∫ cos^{2α}φ (χ_r² + r^{−2} χ_φ² + κ r^{−2} χ²) / ∫ cos^{2α}φ χ²,
//! ```
//!
//! free of the cancelling `δ^{−2}` singularities of the direct form.

use serde::Serialize;

use crate::angular::AngularFv;
use crate::fieldops::grid::AxiGrid;
use crate::params::HardyParams;

#[derive(Debug, Clone, Serialize)]
pub struct RayleighReport {
    pub mu: f64,
    /// Smallest quotient over the trials.
    pub lambda: f64,
    pub best_trial: usize,
    pub quotients: Vec<f64>,
}

/// Radial profile of trial `k ≥ 1`: `cos(π r / 2) · r^{k−1}`.
fn trial(k: usize, r: f64) -> f64 {
    (0.5 * std::f64::consts::PI * r).cos() * r.powi(k as i32 - 1)
}

/// Discrete Rayleigh quotient of `cos^α φ · χ` on the grid, with `χ` sampled
/// at the nodes, centered differences and the finite-volume angular weights.
pub fn rayleigh_quotient(grid: &AxiGrid, hp: &HardyParams, chi: impl Fn(f64, f64) -> f64) -> f64 {
    let fv = AngularFv::new(grid.mesh(), hp.n(), hp.alpha());
    let (nr, m) = (grid.radial_len(), grid.angular_len());
    let w = grid.radial_weights();
    let vals: Vec<Vec<f64>> = grid
        .radii()
        .iter()
        .map(|r| grid.angles().iter().map(|p| chi(*r, *p)).collect())
        .collect();
    let kappa = hp.kappa();
    let n = hp.nf();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..nr {
        let r = grid.radii()[j];
        let vol = w[j] * r.powf(n);
        for i in 0..m {
            let x = vals[j][i];
            let (rows, d1, _) = grid.radial_fd(j);
            let dx: f64 = (0..3).map(|k| d1[k] * vals[rows[k]][i]).sum();
            let dphi = fv.derivative(&vals[j], i);
            let grad2 = (dx * dx + dphi * dphi) / (r * r);
            num += vol * fv.mass[i] * (grad2 + kappa * x * x / (r * r));
            den += vol * fv.mass[i] * x * x;
        }
    }
    num / den
}

/// Minimum quotient over `trials` radial profiles `cos(πr/2)·r^{k−1}`.
pub fn rayleigh_lambda(grid: &AxiGrid, hp: &HardyParams, trials: usize) -> RayleighReport {
    let quotients: Vec<f64> = (1..=trials.max(1))
        .map(|k| rayleigh_quotient(grid, hp, |r, _| trial(k, r)))
        .collect();
    let (best_trial, lambda) = quotients
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, q)| if *q < acc.1 { (k + 1, *q) } else { acc });
    RayleighReport {
        mu: hp.mu(),
        lambda,
        best_trial,
        quotients,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularMesh;

    fn grid() -> AxiGrid {
        AxiGrid::new(1e-4, 400, AngularMesh::chebyshev(41).unwrap()).unwrap()
    }

    #[test]
    fn positive_and_decreasing_in_mu() {
        let g = grid();
        let lo = rayleigh_lambda(&g, &HardyParams::new(3, 0.01).unwrap(), 4);
        let hi = rayleigh_lambda(&g, &HardyParams::new(3, 0.25).unwrap(), 4);
        assert!(hi.lambda > 0.0);
        assert!(lo.lambda > hi.lambda);
        assert_eq!(lo.quotients.len(), 4);
    }

    #[test]
    fn matches_one_dimensional_quotient() {
        // For radial χ the angular factor cancels:
        // λ = ∫ (χ'² + κ χ²/r²) r^{N−1} / ∫ χ² r^{N−1}.
        let hp = HardyParams::new(3, 0.25).unwrap();
        let got = rayleigh_quotient(&grid(), &hp, |r, _| trial(1, r));
        let n = 200_000;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let r = (k as f64 + 0.5) / n as f64;
            let b = trial(1, r);
            let db = -0.5 * std::f64::consts::PI * (0.5 * std::f64::consts::PI * r).sin();
            num += (db * db + hp.kappa() * b * b / (r * r)) * r * r;
            den += b * b * r * r;
        }
        assert!((got - num / den).abs() < 1e-3 * got, "{got} {}", num / den);
    }
}
