//! Explicit supersolutions near a flat boundary point `z`:
//!
//! ```text
//! w = c (R² − |x − z|²)^{−b} g(δ),
//! g(δ) = δ^γ                                  (μ < 1/4, γ ∈ (1−α, α)),
//! g(δ) = δ^{1/2} (ln(e² R / δ))^{1/2}          (μ = 1/4),
//! ```
//!
//! on `Ω ∩ B_R(z)` for the flat model boundary `δ = x_N`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::HardyParams;

/// Largest admissible radius `β₀/16` with `β₀ = 1` for the flat boundary.
pub const MAX_BARRIER_RADIUS: f64 = 1.0 / 16.0;

/// Default number of sample points per axis.
pub const BARRIER_SAMPLES: usize = 200;

/// Relative tolerance of the residual certificate.
pub const BARRIER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum BarrierProfile {
    /// `δ^γ`, for `μ < 1/4`.
    Power { gamma: f64 },
    /// `δ^{1/2} (ln(e²R/δ))^{1/2}`, for `μ = 1/4`.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierSpec {
    /// Tangential position of `z` on the flat boundary.
    pub center: f64,
    pub radius: f64,
    pub b: f64,
    pub amplitude: f64,
    pub profile: BarrierProfile,
}

impl BarrierSpec {
    /// The profile matching `hp`: a power `γ` when `μ < 1/4` (required), the
    /// logarithmic weight when `μ = 1/4` (`gamma` ignored).
    pub fn new(hp: &HardyParams, gamma: Option<f64>, b: f64, radius: f64) -> Result<Self> {
        let profile = if hp.is_critical_hardy() {
            BarrierProfile::Log
        } else {
            BarrierProfile::Power {
                gamma: gamma.ok_or_else(|| Error::input("γ is required when μ < 1/4"))?,
            }
        };
        Ok(Self {
            center: 0.0,
            radius,
            b,
            amplitude: 1.0,
            profile,
        })
    }

    /// Effective `γ` of the boundary profile (1/2 in the logarithmic case).
    pub fn gamma(&self) -> f64 {
        match self.profile {
            BarrierProfile::Power { gamma } => gamma,
            BarrierProfile::Log => 0.5,
        }
    }

    /// Lower bound `max{(4−q)/(q−1) + γ, (N−2)/2, 1}` for `b`.
    pub fn b_min(&self, n: usize, q: f64) -> f64 {
        ((4.0 - q) / (q - 1.0) + self.gamma()).max(0.5 * (n as f64 - 2.0)).max(1.0)
    }

    pub fn validate(&self, hp: &HardyParams, q: f64) -> Result<()> {
        if !(q > 1.0) {
            return Err(Error::Domain {
                name: "q",
                value: q,
                interval: "(1, ∞)",
            });
        }
        if !(self.radius > 0.0 && self.radius <= MAX_BARRIER_RADIUS) {
            return Err(Error::input(format!(
                "radius R = {} violates 0 < R ≤ 1/16",
                self.radius
            )));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::input(format!("amplitude c = {} must be positive", self.amplitude)));
        }
        match (self.profile, hp.is_critical_hardy()) {
            (BarrierProfile::Power { gamma }, false) => {
                let a = hp.alpha();
                if !(gamma > 1.0 - a && gamma < a) {
                    return Err(Error::input(format!(
                        "γ = {gamma} outside (1−α, α) = ({}, {a})",
                        1.0 - a
                    )));
                }
            }
            (BarrierProfile::Log, true) => {}
            (BarrierProfile::Power { .. }, true) => {
                return Err(Error::input("μ = 1/4 requires the logarithmic barrier"));
            }
            (BarrierProfile::Log, false) => {
                return Err(Error::input("the logarithmic barrier is reserved for μ = 1/4"));
            }
        }
        let bmin = self.b_min(hp.n(), q);
        if !(self.b >= bmin) {
            return Err(Error::input(format!(
                "b = {} below max{{(4−q)/(q−1)+γ, (N−2)/2, 1}} = {bmin}",
                self.b
            )));
        }
        Ok(())
    }

    /// `(g, g'/g, g''/g)` at distance `t`.
    fn profile_at(&self, t: f64) -> (f64, f64, f64) {
        match self.profile {
            BarrierProfile::Power { gamma } => (t.powf(gamma), gamma / t, gamma * (gamma - 1.0) / (t * t)),
            BarrierProfile::Log => {
                let l = (std::f64::consts::E.powi(2) * self.radius / t).ln();
                let h1 = 0.5 / t - 0.5 / (t * l);
                let h2 = -0.5 / (t * t) + (l - 1.0) / (2.0 * t * t * l * l);
                ((t * l).sqrt(), h1, h1 * h1 + h2)
            }
        }
    }

    /// `w` at tangential offset `s` from `z` and height `t`.
    pub fn value(&self, s: f64, t: f64) -> f64 {
        let p = self.radius * self.radius - s * s - t * t;
        self.amplitude * p.powf(-self.b) * self.profile_at(t).0
    }

    /// `(|∇w|, Δw, w)` from closed-form derivatives.
    pub fn derivatives(&self, n: usize, s: f64, t: f64) -> (f64, f64, f64) {
        let x2 = s * s + t * t;
        let p = self.radius * self.radius - x2;
        let b = self.b;
        let (g, d1, d2) = self.profile_at(t);
        let w = self.amplitude * p.powf(-b) * g;
        // ∇w = w (2b x / P + (g'/g) e_N).
        let gs = w * 2.0 * b * s / p;
        let gt = w * (2.0 * b * t / p + d1);
        let lap = w * (2.0 * b * (n as f64 * p + 2.0 * (b + 1.0) * x2) / (p * p) + 4.0 * b * t * d1 / p + d2);
        (gs.hypot(gt), lap, w)
    }

    /// `(−L_μ w + |∇w|^q, local scale)` at one point.
    pub fn residual_at(&self, hp: &HardyParams, q: f64, s: f64, t: f64) -> (f64, f64) {
        let (grad, lap, w) = self.derivatives(hp.n(), s, t);
        let pot = hp.mu() * w / (t * t);
        let absorb = grad.powf(q);
        (-lap - pot + absorb, lap.abs() + pot + absorb)
    }
}

/// Minimum of the residual over the sample grid and the certificate status.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub spec: BarrierSpec,
    pub samples_per_axis: usize,
    pub sample_points: usize,
    /// Minimum of the residual.
    pub min_residual: f64,
    /// Minimum of the residual divided by its local scale.
    pub min_relative: f64,
    pub holds: bool,
}

/// Evaluates the residual on the midpoints of an `n × n` grid of
/// `(s, t) ∈ (0, R)²` with `s² + t² < R²`, relative to `z`.
pub fn barrier_residual(spec: &BarrierSpec, hp: &HardyParams, q: f64, samples: usize) -> Result<BarrierReport> {
    spec.validate(hp, q)?;
    if samples < 2 {
        return Err(Error::input("need at least 2 samples per axis"));
    }
    let step = spec.radius / samples as f64;
    let mut min_residual = f64::INFINITY;
    let mut min_relative = f64::INFINITY;
    let mut count = 0;
    for a in 0..samples {
        let s = (a as f64 + 0.5) * step;
        for c in 0..samples {
            let t = (c as f64 + 0.5) * step;
            if s * s + t * t >= spec.radius * spec.radius {
                continue;
            }
            let (res, scale) = spec.residual_at(hp, q, s, t);
            count += 1;
            min_residual = min_residual.min(res);
            min_relative = min_relative.min(res / scale);
        }
    }
    Ok(BarrierReport {
        spec: *spec,
        samples_per_axis: samples,
        sample_points: count,
        min_residual,
        min_relative,
        holds: min_relative >= -BARRIER_TOL,
    })
}

/// Smallest amplitude `2^k`, `k ∈ [−64, 256]`, whose certificate holds.
/// The residual divided by `c` increases with `c`, so bisection on `k` applies.
pub fn search_amplitude(spec: &BarrierSpec, hp: &HardyParams, q: f64, samples: usize) -> Result<BarrierReport> {
    let at = |k: i32| {
        let s = BarrierSpec {
            amplitude: 2f64.powi(k),
            ..*spec
        };
        barrier_residual(&s, hp, q, samples)
    };
    let (mut lo, mut hi) = (-64, 256);
    let top = at(hi)?;
    if !top.holds {
        return Err(Error::Fit(format!(
            "no amplitude up to 2^{hi} certifies the barrier (min relative residual {:.3e})",
            top.min_relative
        )));
    }
    let bottom = at(lo)?;
    if bottom.holds {
        return Ok(bottom);
    }
    let mut best = top;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let rep = at(mid)?;
        if rep.holds {
            hi = mid;
            best = rep;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_case() -> (HardyParams, BarrierSpec) {
        let hp = HardyParams::new(3, 3.0 / 16.0).unwrap();
        let spec = BarrierSpec::new(&hp, Some(0.6), 9.0, MAX_BARRIER_RADIUS).unwrap();
        (hp, spec)
    }

    fn log_case() -> (HardyParams, BarrierSpec) {
        let hp = HardyParams::new(3, 0.25).unwrap();
        let spec = BarrierSpec::new(&hp, None, 9.0, MAX_BARRIER_RADIUS).unwrap();
        (hp, spec)
    }

    /// Central differences in `(x_1, x_2, x_N)` with `x = (s, 0, t)`.
    fn fd(spec: &BarrierSpec, s: f64, t: f64) -> (f64, f64) {
        let h = 1e-5 * t.min(spec.radius - (s * s + t * t).sqrt());
        let f = |a: f64, b: f64, c: f64| spec.value((a * a + b * b).sqrt(), c);
        let w0 = f(s, 0.0, t);
        let dx = (f(s + h, 0.0, t) - f(s - h, 0.0, t)) / (2.0 * h);
        let dz = (f(s, 0.0, t + h) - f(s, 0.0, t - h)) / (2.0 * h);
        let lap = (f(s + h, 0.0, t) + f(s - h, 0.0, t) + f(s, h, t) + f(s, -h, t) + f(s, 0.0, t + h) + f(s, 0.0, t - h)
            - 6.0 * w0)
            / (h * h);
        (dx.hypot(dz), lap)
    }

    #[test]
    fn closed_form_derivatives_match_differences() {
        for (_, spec) in [power_case(), log_case()] {
            let spec = BarrierSpec { b: 2.0, ..spec };
            for (s, t) in [(0.01, 0.02), (0.03, 0.005), (0.001, 0.04)] {
                let (g, lap, _) = spec.derivatives(3, s, t);
                let (gf, lf) = fd(&spec, s, t);
                assert!((g - gf).abs() < 1e-6 * g, "{g} {gf}");
                assert!((lap - lf).abs() < 1e-4 * lap.abs().max(g / t), "{lap} {lf}");
            }
        }
    }

    #[test]
    fn bound_arithmetic() {
        let (hp, spec) = power_case();
        assert!((spec.b_min(3, 4.0 / 3.0) - 8.6).abs() < 1e-12);
        assert!(spec.validate(&hp, 4.0 / 3.0).is_ok());
        let low_b = BarrierSpec { b: 8.5, ..spec };
        assert!(low_b.validate(&hp, 4.0 / 3.0).is_err());
    }

    #[test]
    fn gamma_outside_window_is_named() {
        let (hp, spec) = power_case();
        let bad = BarrierSpec {
            profile: BarrierProfile::Power { gamma: 0.2 },
            ..spec
        };
        match bad.validate(&hp, 4.0 / 3.0) {
            Err(Error::Input(msg)) => assert!(msg.contains("γ = 0.2")),
            other => panic!("{other:?}"),
        }
        let wide = BarrierSpec { radius: 0.1, ..spec };
        assert!(wide.validate(&hp, 4.0 / 3.0).is_err());
    }

    #[test]
    fn amplitude_search_certifies_both_cases() {
        for (hp, spec, q) in [(power_case().0, power_case().1, 4.0 / 3.0), (log_case().0, log_case().1, 4.0 / 3.0)] {
            let rep = search_amplitude(&spec, &hp, q, 60).unwrap();
            assert!(rep.holds && rep.min_relative >= -BARRIER_TOL);
            let half = BarrierSpec {
                amplitude: rep.spec.amplitude / 2.0,
                ..rep.spec
            };
            let below = barrier_residual(&half, &hp, q, 60).unwrap();
            assert!(!below.holds || rep.spec.amplitude == 2f64.powi(-64));
        }
    }
}
