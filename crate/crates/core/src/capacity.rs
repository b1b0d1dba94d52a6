//! Removability of isolated boundary points in the supercritical range,
//! decided through closed-form Bessel capacity criteria on `ℝ^{N−1}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::HardyParams;

/// Relative slack on `s·p ≤ d` inside [`classify_removability`], so that the
/// rounding of `s(q_crit)·p(q_crit)` does not move the threshold.
pub const THRESHOLD_SLACK: f64 = 1e-12;

/// Number of points of the uniform part of the `q` grid used by [`sweep`].
pub const SWEEP_POINTS: usize = 99;

/// A Bessel capacity `C_{s,p}` on `ℝ^d` together with the set it measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityQuery {
    pub s: f64,
    pub p: f64,
    pub d: usize,
    pub set: SetDescriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDescriptor {
    Point,
    Ball { radius: f64 },
}

impl CapacityQuery {
    pub fn new(s: f64, p: f64, d: usize, set: SetDescriptor) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::input(format!("capacity order s = {s} must be positive")));
        }
        if !(p > 1.0) {
            return Err(Error::input(format!("capacity exponent p = {p} must exceed 1")));
        }
        if d < 2 {
            return Err(Error::input(format!("ambient dimension d = {d} must be at least 2")));
        }
        if let SetDescriptor::Ball { radius } = set {
            if !(radius > 0.0) {
                return Err(Error::input(format!("ball radius {radius} must be positive")));
            }
        }
        Ok(Self { s, p, d, set })
    }

    /// Whether the set has zero capacity. Balls never do.
    pub fn is_null(&self) -> bool {
        match self.set {
            SetDescriptor::Point => point_capacity_zero(self.s, self.p, self.d),
            SetDescriptor::Ball { .. } => false,
        }
    }
}

/// A point has zero `C_{s,p}` capacity in `ℝ^d` iff `s·p ≤ d`.
pub fn point_capacity_zero(s: f64, p: f64, d: usize) -> bool {
    s * p <= d as f64
}

/// Capacity pair `((α+1)/q − α, q/(q−1))` attached to an exponent `q`.
pub fn capacity_pair(alpha: f64, q: f64) -> (f64, f64) {
    ((alpha + 1.0) / q - alpha, q / (q - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    SupercriticalGeneric,
    SupercriticalEpsilonCase,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::SupercriticalGeneric => "supercritical_generic",
            Regime::SupercriticalEpsilonCase => "supercritical_epsilon_case",
        }
    }
}

/// The ε-window of the case `q = α + 1` and its certifying part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonWindow {
    /// Open window `(0, upper)`.
    pub upper: f64,
    /// Certifying ε satisfy `0 < ε ≤ certified_upper`; zero when none do.
    pub certified_upper: f64,
}

impl EpsilonWindow {
    pub fn is_empty(&self) -> bool {
        !(self.upper > 0.0)
    }

    pub fn certifies(&self) -> bool {
        !self.is_empty() && self.certified_upper > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemovabilityVerdict {
    pub q: f64,
    pub q_crit: f64,
    pub regime: Regime,
    /// Capacity order and exponent used for the point test.
    pub s: f64,
    pub p: f64,
    pub point_removable: bool,
    /// Set when the ε-window is empty and no verdict can be drawn.
    pub inconclusive: bool,
    pub epsilon_window: Option<EpsilonWindow>,
}

impl RemovabilityVerdict {
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }
}

/// Upper end `min{α+1, (N−1)α/(α+1) − (1−α)}` of the ε-window.
pub fn epsilon_window_upper(hp: &HardyParams) -> f64 {
    let a = hp.alpha();
    (a + 1.0).min((hp.nf() - 1.0) * a / (a + 1.0) - (1.0 - a))
}

fn is_epsilon_case(hp: &HardyParams, q: f64) -> bool {
    (q - (hp.alpha() + 1.0)).abs() <= 1e-12
}

/// Classifies `q ∈ (1, 2)` as subcritical or, above `q_crit`, decides whether
/// an isolated boundary point is removable.
pub fn classify_removability(hp: &HardyParams, q: f64) -> Result<RemovabilityVerdict> {
    if !(q > 1.0 && q < 2.0) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            interval: "(1, 2)",
        });
    }
    let a = hp.alpha();
    let q_crit = hp.q_crit();
    let d = hp.nf() - 1.0;
    let (s, p) = capacity_pair(a, q);
    let mut verdict = RemovabilityVerdict {
        q,
        q_crit,
        regime: Regime::Subcritical,
        s,
        p,
        point_removable: false,
        inconclusive: false,
        epsilon_window: None,
    };
    if q < q_crit {
        return Ok(verdict);
    }
    if is_epsilon_case(hp, q) {
        let p = (a + 1.0) / a;
        let upper = epsilon_window_upper(hp);
        let bound = d / p - (1.0 - a);
        let window = EpsilonWindow {
            upper: upper.max(0.0),
            certified_upper: if upper > 0.0 { bound.min(upper).max(0.0) } else { 0.0 },
        };
        // order reported at the middle of the certifying part, or of the window
        let eps = if window.certifies() {
            0.5 * window.certified_upper
        } else {
            0.5 * window.upper
        };
        verdict.regime = Regime::SupercriticalEpsilonCase;
        verdict.s = eps + 1.0 - a;
        verdict.p = p;
        verdict.inconclusive = window.is_empty();
        verdict.point_removable = window.certifies();
        verdict.epsilon_window = Some(window);
        return Ok(verdict);
    }
    verdict.regime = Regime::SupercriticalGeneric;
    verdict.point_removable = s * p <= d * (1.0 + THRESHOLD_SLACK);
    Ok(verdict)
}

/// `|s(q_crit)·p(q_crit) − (N−1)|`: the point threshold of the capacity pair
/// sits exactly at `q_crit`.
pub fn threshold_consistency(hp: &HardyParams) -> f64 {
    let (s, p) = capacity_pair(hp.alpha(), hp.q_crit());
    (s * p - (hp.nf() - 1.0)).abs()
}

/// Log-log slope of `r ↦ r^{d − sp}`, the closed-form comparable of
/// `C_{s,p}(B_r)`, over `radii`.
pub fn ball_capacity_scaling(s: f64, p: f64, d: usize, radii: &[f64]) -> Result<f64> {
    let gap = d as f64 - s * p;
    if !(gap > 0.0) {
        return Err(Error::input(format!(
            "degenerate ball scaling: s·p = {} is not below d = {d}",
            s * p
        )));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::input("radii must be positive"));
    }
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 100.0 {
        return Err(Error::input("radii must span at least two decades"));
    }
    let pts: Vec<(f64, f64)> = radii.iter().map(|r| (r.ln(), gap * r.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Uniform `q` grid on `(1, 2)` with `q_crit` and `α + 1` inserted.
pub fn sweep_grid(hp: &HardyParams) -> Vec<f64> {
    let mut qs: Vec<f64> = (1..=SWEEP_POINTS).map(|i| 1.0 + i as f64 / (SWEEP_POINTS + 1) as f64).collect();
    for extra in [hp.q_crit(), hp.alpha() + 1.0] {
        if extra > 1.0 && extra < 2.0 && qs.iter().all(|q| (q - extra).abs() > 1e-12) {
            qs.push(extra);
        }
    }
    qs.sort_by(|a, b| a.total_cmp(b));
    qs
}

/// Verdicts over [`sweep_grid`].
pub fn sweep(hp: &HardyParams) -> Vec<RemovabilityVerdict> {
    sweep_grid(hp)
        .into_iter()
        .map(|q| classify_removability(hp, q).expect("sweep grid lies in (1, 2)"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(n: usize, mu: f64) -> HardyParams {
        HardyParams::new(n, mu).unwrap()
    }

    #[test]
    fn point_tests() {
        assert!(point_capacity_zero(1.0, 2.0, 2));
        assert!(point_capacity_zero(0.4375, 8.0 / 3.0, 2));
        assert!(!point_capacity_zero(0.6111, 3.857, 2));
    }

    #[test]
    fn worked_classifications() {
        let h = hp(3, 0.25);
        let v = classify_removability(&h, 1.6).unwrap();
        assert_eq!(v.regime, Regime::SupercriticalGeneric);
        assert!(v.point_removable);
        assert!((v.sp() - 7.0 / 6.0).abs() < 1e-12);
        assert_eq!(classify_removability(&h, 1.35).unwrap().regime, Regime::Subcritical);
        let e = classify_removability(&h, 1.5).unwrap();
        assert_eq!(e.regime, Regime::SupercriticalEpsilonCase);
        let w = e.epsilon_window.unwrap();
        assert!((w.upper - 1.0 / 6.0).abs() < 1e-12);
        assert!((w.certified_upper - 1.0 / 6.0).abs() < 1e-12);
        assert!(e.point_removable && !e.inconclusive);
    }

    #[test]
    fn flip_happens_at_q_crit() {
        for (n, mu) in [(3, 0.25), (5, 0.1), (4, 0.21)] {
            let h = hp(n, mu);
            let qc = h.q_crit();
            assert!(threshold_consistency(&h) <= 1e-12);
            assert_eq!(classify_removability(&h, qc * (1.0 - 1e-12)).unwrap().regime, Regime::Subcritical);
            assert!(classify_removability(&h, qc).unwrap().point_removable);
        }
    }

    #[test]
    fn ball_slopes() {
        let radii = [1e-3, 1e-2, 1e-1, 1.0];
        assert!((ball_capacity_scaling(0.5, 2.0, 2, &radii).unwrap() - 1.0).abs() < 1e-12);
        assert!((ball_capacity_scaling(0.4375, 8.0 / 3.0, 2, &radii).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!(ball_capacity_scaling(1.0, 2.0, 2, &radii).is_err());
        assert!(ball_capacity_scaling(0.5, 2.0, 2, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn bad_queries_refused() {
        assert!(CapacityQuery::new(0.0, 2.0, 2, SetDescriptor::Point).is_err());
        assert!(CapacityQuery::new(1.0, 1.0, 2, SetDescriptor::Point).is_err());
        assert!(CapacityQuery::new(1.0, 2.0, 1, SetDescriptor::Point).is_err());
        assert!(classify_removability(&hp(3, 0.25), 2.0).is_err());
        let q = CapacityQuery::new(1.0, 2.0, 2, SetDescriptor::Point).unwrap();
        assert!(q.is_null());
    }

    #[test]
    fn sweep_contains_the_threshold() {
        let h = hp(3, 0.25);
        let rows = sweep(&h);
        assert!(rows.iter().any(|v| v.q == h.q_crit() && v.point_removable));
        assert!(rows.windows(2).all(|w| w[0].q < w[1].q));
    }
}
