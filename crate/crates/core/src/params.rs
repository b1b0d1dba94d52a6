//! Closed-form constants of the problem
//!
//! ```text
//!     -Δu - μ/δ² u + |∇u|^q = 0
//! ```
//!
//! together with the eigenfunction of the weighted spherical operator and the
//! sub/supersolution amplitudes used to bracket the separable profile.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance used to decide that μ sits at the critical Hardy value 1/4.
const CRITICAL_MU_TOL: f64 = 1e-15;

/// Dimension `N` and Hardy coefficient `μ`, with the derived exponent `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyParams {
    n: usize,
    mu: f64,
    alpha: f64,
}

impl HardyParams {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain {
                name: "N",
                value: n as f64,
                interval: "[3, ∞)",
            });
        }
        let alpha = alpha_of_mu(mu)?;
        Ok(Self { n, mu, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension as a float, for use inside formulas.
    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// True when μ = 1/4, where the two boundary exponents coalesce.
    pub fn is_critical_hardy(&self) -> bool {
        (self.mu - 0.25).abs() <= CRITICAL_MU_TOL
    }

    /// First eigenvalue κ_μ = α(N + α − 2) of the weighted spherical operator.
    pub fn kappa(&self) -> f64 {
        self.alpha * (self.nf() + self.alpha - 2.0)
    }

    pub fn q_crit(&self) -> f64 {
        q_crit(self.n, self.alpha)
    }
}

/// `α = 1/2 + sqrt(1/4 − μ)` for `μ ∈ (0, 1/4]`.
pub fn alpha_of_mu(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= 0.25) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            interval: "(0, 1/4]",
        });
    }
    Ok(0.5 + (0.25 - mu).max(0.0).sqrt())
}

/// Critical exponent `(N + α)/(N + α − 1)`.
pub fn q_crit(n: usize, alpha: f64) -> f64 {
    let a = n as f64 + alpha;
    a / (a - 1.0)
}

/// `ℓ_{N,q} = ((2−q)/(q−1))·(q/(q−1) − N)`.
pub fn ell(n: usize, q: f64) -> f64 {
    sing_exp(q) * (q / (q - 1.0) - n as f64)
}

/// Self-similar decay exponent `(2−q)/(q−1)`.
pub fn sing_exp(q: f64) -> f64 {
    (2.0 - q) / (q - 1.0)
}

/// Every closed-form constant attached to a triple `(N, μ, q)`.
///
/// Fields that only exist below the critical exponent are `None` when
/// `q ≥ q_crit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentPack {
    #[serde(skip)]
    pub n: usize,
    #[serde(skip)]
    pub q: f64,
    pub alpha: f64,
    pub q_crit: f64,
    pub ell: f64,
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    pub sing_exp: f64,
}

impl ExponentPack {
    pub fn is_subcritical(&self) -> bool {
        self.q < self.q_crit
    }

    pub fn require_subcritical(&self) -> Result<()> {
        if self.is_subcritical() {
            Ok(())
        } else {
            Err(Error::Supercritical {
                q: self.q,
                q_crit: self.q_crit,
            })
        }
    }

    /// Exponent `N + α − (N + α − 1) q` governing how fast the absorbed part
    /// of a weak singularity vanishes relative to the Martin kernel.
    pub fn deficit_exponent(&self) -> f64 {
        let a = self.n as f64 + self.alpha;
        a - (a - 1.0) * self.q
    }

    /// `(γ₁, γ₂, α₀)`, or a supercritical error.
    pub fn bracket(&self) -> Result<(f64, f64, f64)> {
        match (self.gamma1, self.gamma2, self.alpha0) {
            (Some(g1), Some(g2), Some(a0)) => Ok((g1, g2, a0)),
            _ => Err(Error::Supercritical {
                q: self.q,
                q_crit: self.q_crit,
            }),
        }
    }
}

/// Builds the [`ExponentPack`] for `hp` and `q ∈ (1, 2)`.
pub fn exponent_pack(hp: &HardyParams, q: f64) -> Result<ExponentPack> {
    if !(q > 1.0 && q < 2.0) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            interval: "(1, 2)",
        });
    }
    let n = hp.n();
    let alpha = hp.alpha();
    let qc = hp.q_crit();
    let ell = ell(n, q);
    let kappa = hp.kappa();
    let s = sing_exp(q);

    let mut pack = ExponentPack {
        n,
        q,
        alpha,
        q_crit: qc,
        ell,
        kappa,
        gamma1: None,
        alpha0: None,
        mu0: None,
        gamma2: None,
        sing_exp: s,
    };
    if q >= qc {
        return Ok(pack);
    }

    let gamma1 = ((ell - kappa) / alpha.powf(q)).powf(1.0 / (q - 1.0));

    // (N + a)/(N + a − 1) > q  ⇔  a < q/(q−1) − N; the upper bound 1 caps it.
    let upper = (q / (q - 1.0) - hp.nf()).min(1.0);
    let alpha0 = 0.5 * (alpha + upper);
    let mu0 = 0.25 - (alpha0 - 0.5).powi(2);
    let kappa0 = alpha0 * (hp.nf() + alpha0 - 2.0);

    // Coefficient of φ₀^{α₀−2}: γ(μ₀ − μ) + γ^q α₀^q ≤ 0.
    let root_edge = ((hp.mu() - mu0) / alpha0.powf(q)).powf(1.0 / (q - 1.0));
    // Coefficient of φ₀^{α₀}: γ(κ₀ − ℓ) + γ^q (s² − α₀²)^{q/2} ≤ 0; when
    // s² ≤ α₀² the γ^q contribution is absent and no constraint arises.
    let spread = s * s - alpha0 * alpha0;
    let root_bulk = if spread > 0.0 {
        ((ell - kappa0) / spread.powf(0.5 * q)).powf(1.0 / (q - 1.0))
    } else {
        f64::INFINITY
    };
    let mut gamma2 = root_edge.min(root_bulk).min(gamma1);
    while gamma2 >= gamma1 {
        gamma2 *= 0.5;
    }

    pack.gamma1 = Some(gamma1);
    pack.alpha0 = Some(alpha0);
    pack.mu0 = Some(mu0);
    pack.gamma2 = Some(gamma2);
    Ok(pack)
}

/// Eigenfunction `φ_μ = cos(φ)^α`, with the angle measured from the north pole.
pub fn phi_mu(phi_angle: f64, alpha: f64) -> f64 {
    phi_angle.cos().max(0.0).powf(alpha)
}

/// `|∇'φ₀|² + φ₀² − 1` for `φ₀ = e_N·σ`, which vanishes identically.
pub fn grad_identity_gap(phi_angle: f64) -> f64 {
    let (s, c) = phi_angle.sin_cos();
    s * s + c * c - 1.0
}

/// Boundary weight `W(δ)`: `δ^{1−α}` for `μ < 1/4`, `δ^{1/2}|ln δ|` at `μ = 1/4`.
///
/// `diam` only enters through the precondition `δ < diam`.
pub fn weight_w(delta: f64, hp: &HardyParams, diam: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            interval: "(0, diam)",
        });
    }
    if !(delta <= diam) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            interval: "(0, diam)",
        });
    }
    if hp.is_critical_hardy() {
        Ok(delta.sqrt() * delta.ln().abs())
    } else {
        Ok(delta.powf(1.0 - hp.alpha()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_of_mu(0.25).unwrap(), 0.5);
        assert_eq!(alpha_of_mu(3.0 / 16.0).unwrap(), 0.75);
        assert_relative_eq!(alpha_of_mu(0.21).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn alpha_rejects_out_of_range() {
        for mu in [0.0, -0.1, 0.2500001, f64::NAN] {
            let err = alpha_of_mu(mu).unwrap_err();
            assert!(err.to_string().contains("(0, 1/4]"), "{err}");
        }
    }

    #[test]
    fn alpha_inverts_mu() {
        for mu in [0.01, 0.05, 0.1, 0.2, 0.25] {
            let a = alpha_of_mu(mu).unwrap();
            assert_relative_eq!(a * (1.0 - a), mu, epsilon = 1e-15);
        }
    }

    #[test]
    fn q_crit_examples() {
        assert_relative_eq!(q_crit(3, 0.5), 1.4, epsilon = 1e-15);
        assert_relative_eq!(q_crit(3, 0.7), 37.0 / 27.0, epsilon = 1e-15);
        // α → 1 recovers (N+1)/N.
        assert_relative_eq!(q_crit(3, 1.0 - 1e-12), 4.0 / 3.0, epsilon = 1e-11);
    }

    #[test]
    fn pack_at_four_thirds() {
        let hp = HardyParams::new(3, 0.25).unwrap();
        let p = exponent_pack(&hp, 4.0 / 3.0).unwrap();
        assert_relative_eq!(p.ell, 2.0, epsilon = 1e-13);
        assert_relative_eq!(p.kappa, 0.75, epsilon = 1e-15);
        assert_relative_eq!(p.sing_exp, 2.0, epsilon = 1e-13);
        // 1.25³·2⁴, evaluated exactly.
        assert_relative_eq!(p.gamma1.unwrap(), 31.25, epsilon = 1e-11);
    }

    #[test]
    fn pack_at_critical_exponent() {
        let hp = HardyParams::new(3, 0.25).unwrap();
        let p = exponent_pack(&hp, 1.4).unwrap();
        assert_relative_eq!(p.ell, 0.75, epsilon = 1e-14);
        assert_relative_eq!(p.ell, p.kappa, epsilon = 1e-14);
        assert!(p.gamma1.is_none() && p.gamma2.is_none() && p.alpha0.is_none());
        assert!(matches!(
            p.require_subcritical(),
            Err(Error::Supercritical { .. })
        ));
    }

    #[test]
    fn pack_alpha0_is_midpoint() {
        let hp = HardyParams::new(3, 0.25).unwrap();
        let p = exponent_pack(&hp, 1.2).unwrap();
        // q/(q−1) − N = 3 > 1, so the interval is (1/2, 1).
        assert_relative_eq!(p.alpha0.unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(p.mu0.unwrap(), 3.0 / 16.0, epsilon = 1e-15);
        let a0 = p.alpha0.unwrap();
        let qc0 = q_crit(3, a0);
        assert!(1.2 < qc0 && qc0 < p.q_crit);

        let p = exponent_pack(&hp, 1.38).unwrap();
        let upper = 1.38 / 0.38 - 3.0;
        assert!(upper < 1.0);
        assert_relative_eq!(p.alpha0.unwrap(), 0.5 * (0.5 + upper), epsilon = 1e-14);
    }

    #[test]
    fn gamma2_satisfies_both_brackets() {
        let hp = HardyParams::new(3, 0.25).unwrap();
        for q in [1.1, 1.2, 1.3, 1.39] {
            let p = exponent_pack(&hp, q).unwrap();
            let (g1, g2, a0) = p.bracket().unwrap();
            let mu0 = p.mu0.unwrap();
            let k0 = a0 * (3.0 + a0 - 2.0);
            assert!(g2 <= g1);
            let edge = g2 * (mu0 - hp.mu()) + g2.powf(q) * a0.powf(q);
            assert!(edge <= 1e-12 * g2, "q={q}: {edge}");
            let spread = (p.sing_exp.powi(2) - a0 * a0).max(0.0);
            let bulk = g2 * (k0 - p.ell) + g2.powf(q) * spread.powf(q / 2.0);
            assert!(bulk <= 1e-12 * g2, "q={q}: {bulk}");
        }
    }

    #[test]
    fn pack_rejects_q_outside_unit_interval() {
        let hp = HardyParams::new(3, 0.25).unwrap();
        assert!(exponent_pack(&hp, 1.0).is_err());
        assert!(exponent_pack(&hp, 2.0).is_err());
    }

    #[test]
    fn phi_mu_examples() {
        assert_eq!(phi_mu(0.0, 0.3), 1.0);
        assert!(phi_mu(std::f64::consts::FRAC_PI_2, 0.7) < 1e-10);
        assert_relative_eq!(
            phi_mu(std::f64::consts::FRAC_PI_3, 0.5),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn grad_gap_examples() {
        for phi in [0.0, std::f64::consts::FRAC_PI_4, 1.2] {
            assert!(grad_identity_gap(phi).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_examples() {
        let hp = HardyParams::new(3, 3.0 / 16.0).unwrap();
        assert_relative_eq!(weight_w(0.01, &hp, 2.0).unwrap(), 0.01f64.powf(0.25));
        let hp = HardyParams::new(3, 0.25).unwrap();
        let d = (-2.0f64).exp();
        assert_relative_eq!(
            weight_w(d, &hp, 2.0).unwrap(),
            2.0 * (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_eq!(weight_w(1.0, &hp, 2.0).unwrap(), 0.0);
        assert!(weight_w(0.0, &hp, 2.0).is_err());
        assert!(weight_w(-1.0, &hp, 2.0).is_err());
    }

    #[test]
    fn dimension_below_three_rejected() {
        assert!(HardyParams::new(2, 0.1).is_err());
    }
}
