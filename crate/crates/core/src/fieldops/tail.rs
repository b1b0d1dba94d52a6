//! Empirical weak-`L^p` tails: `m(λ) = ∫_{u > λ} δ^γ dx ≍ λ^{−p}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldops::grid::SolutionField;
use crate::stats::ls_slope;

const LAMBDA_POINTS: usize = 60;
const POINTS_PER_DECADE: f64 = 10.0;
const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct WeakNormReport {
    pub gamma: f64,
    pub p_hat: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// `sup_λ λ · m(λ)^{1/p̂}` over the λ grid.
    pub norm: f64,
    pub fit_points: usize,
    /// `(λ, m(λ))` over the full λ grid.
    pub distribution: Vec<(f64, f64)>,
}

/// Fits the tail exponent of `field` (assumed nonnegative) against the weight
/// `δ^γ`. The λ grid is log-spaced between the 1st and 99.9th percentiles of
/// the nonzero node values, with at least 60 points and 10 per decade; the
/// fit uses the middle two decades.
pub fn weak_tail(field: &SolutionField, n_dim: usize, gamma: f64) -> Result<WeakNormReport> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain {
            name: "gamma",
            value: gamma,
            interval: "[0, ∞)",
        });
    }
    let vol = field.grid.cell_volumes(n_dim, gamma);
    let mut pairs: Vec<(f64, f64)> = field
        .values
        .iter()
        .zip(&vol)
        .filter(|(u, w)| **w > 0.0 && **u != 0.0)
        .map(|(u, w)| (u.abs(), *w))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Fit("field vanishes identically".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pct = |p: f64| pairs[((p * (pairs.len() - 1) as f64).round()) as usize].0;
    let (lo, hi) = (pct(0.01), pct(0.999));
    if !(lo > 0.0 && hi > lo * (1.0 + 1e-12)) {
        return Err(Error::Fit(format!(
            "degenerate value range [{lo:e}, {hi:e}] for a tail fit"
        )));
    }

    // Suffix sums give m(λ) for every threshold.
    let mut suffix = vec![0.0; pairs.len() + 1];
    for k in (0..pairs.len()).rev() {
        suffix[k] = suffix[k + 1] + pairs[k].1;
    }
    let m_of = |lam: f64| suffix[pairs.partition_point(|p| p.0 <= lam)];
    let (llo, lhi) = (lo.ln(), hi.ln());
    let points = LAMBDA_POINTS.max((POINTS_PER_DECADE * (lhi - llo) / std::f64::consts::LN_10).ceil() as usize + 1);
    let distribution: Vec<(f64, f64)> = (0..points)
        .map(|k| {
            let lam = (llo + (lhi - llo) * k as f64 / (points - 1) as f64).exp();
            (lam, m_of(lam))
        })
        .collect();

    let center = 0.5 * (llo + lhi);
    let half = std::f64::consts::LN_10.min(0.5 * (lhi - llo));
    let (wlo, whi) = ((center - half).exp(), (center + half).exp());
    let pts: Vec<(f64, f64)> = distribution
        .iter()
        .filter(|(l, m)| *l >= wlo * (1.0 - 1e-12) && *l <= whi * (1.0 + 1e-12) && *m > 0.0)
        .map(|(l, m)| (l.ln(), m.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} λ points with positive measure in the fit window, need {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    let p_hat = -ls_slope(&pts).0;
    if !(p_hat > 0.0) {
        return Err(Error::Fit(format!("nonpositive tail exponent {p_hat}")));
    }
    let norm = distribution
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(l, m)| l * m.powf(1.0 / p_hat))
        .fold(0.0, f64::max);
    Ok(WeakNormReport {
        gamma,
        p_hat,
        lambda_lo: wlo,
        lambda_hi: whi,
        norm,
        fit_points: pts.len(),
        distribution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularMesh;
    use crate::fieldops::AxiGrid;

    #[test]
    fn constant_field_is_degenerate() {
        let g = AxiGrid::new(1e-3, 20, AngularMesh::chebyshev(10).unwrap()).unwrap();
        let f = SolutionField::from_fn(&g, |_, _| 2.0).unwrap();
        assert!(matches!(weak_tail(&f, 3, 0.0), Err(Error::Fit(_))));
    }

    #[test]
    fn radial_power_has_known_tail() {
        // u = r^{−a}: m(λ) = |{r < λ^{−1/a}}| ∝ λ^{−N/a}.
        let g = AxiGrid::new(1e-6, 600, AngularMesh::chebyshev(9).unwrap()).unwrap();
        let f = SolutionField::from_fn(&g, |r, _| r.powf(-1.5)).unwrap();
        let rep = weak_tail(&f, 3, 0.0).unwrap();
        assert!((rep.p_hat - 2.0).abs() < 0.02, "{}", rep.p_hat);
        assert!(rep.lambda_lo < rep.lambda_hi && rep.p_hat > 1.0);
    }

    #[test]
    fn negative_weight_rejected() {
        let g = AxiGrid::new(1e-3, 20, AngularMesh::chebyshev(10).unwrap()).unwrap();
        let f = SolutionField::from_fn(&g, |r, _| 1.0 / r).unwrap();
        assert!(weak_tail(&f, 3, -0.5).is_err());
    }
}
