//! Separable profiles on the upper hemisphere.
//!
//! A solution `u = r^{−(2−q)/(q−1)} ω(σ)` of the half-space problem reduces to
//!
//! ```text
//!     −Δ'ω − μ ω/(e_N·σ)² − ℓ_{N,q} ω + J(ω, ∇'ω) = 0,   ω = 0 on ∂S^{N−1}_+
//!     J(s, ξ) = (((2−q)/(q−1))² s² + |ξ|²)^{q/2}
//! ```
//!
//! which, for axisymmetric ω, is a two-point problem in the polar angle. The
//! unknown is regularized as `v = ω / cos^α φ` and discretized with the
//! weighted finite-volume stencil of [`crate::angular`].

use serde::Serialize;

pub use crate::angular::{AngularMesh, Grading, DEFAULT_ANGULAR_NODES};
use crate::angular::{regularize, second_derivative, AngularFv};
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::params::{exponent_pack, ExponentPack, HardyParams};

/// Smoothing of the q-power at vanishing gradient.
pub(crate) const GRAD_EPS: f64 = 1e-12;

/// Where the Newton iteration starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// `γ₁ φ_μ`, the constant `γ₁` in regularized form.
    Supersolution,
    /// `γ₂ φ_{μ₀}`.
    Subsolution,
    /// Explicit regularized values `v_i`, one per node.
    Profile(Vec<f64>),
}

/// Iteration controls for [`solve_omega_with`].
#[derive(Debug, Clone)]
pub struct OmegaOptions {
    pub start: Start,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Newton stops once the scaled residual falls below this.
    pub target_tol: f64,
    /// A run counts as converged at or below this scaled residual.
    pub converged_tol: f64,
    pub max_sweeps: usize,
    /// Rescale the starting profile by the amplitude that balances the
    /// linear and absorption terms in total before iterating.
    pub project_amplitude: bool,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        Self {
            start: Start::Supersolution,
            max_newton: 40,
            max_halvings: 8,
            target_tol: 1e-10,
            converged_tol: 1e-8,
            max_sweeps: 200,
            project_amplitude: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveStats {
    pub newton_iterations: usize,
    pub monotone_sweeps: usize,
    /// Smallest nodewise distance of any iterate to the bracket
    /// `[γ₂ cos^{α₀−α}, γ₁]`, in regularized units. Never negative.
    pub min_bracket_margin: f64,
    pub trace: Vec<f64>,
}

/// Discrete profile `ω` on an [`AngularMesh`].
#[derive(Debug, Clone, Serialize)]
pub struct HemisphereSolution {
    pub mesh: AngularMesh,
    #[serde(skip)]
    pub hp: HardyParams,
    pub exponents: ExponentPack,
    pub omega: Vec<f64>,
    /// `ω / cos^α φ`; the boundary entry is the limit value.
    pub v: Vec<f64>,
    pub residual_sup: f64,
    pub stats: SolveStats,
}

impl HemisphereSolution {
    /// Wraps a given profile `ω` (not necessarily a solution).
    pub fn from_profile(hp: &HardyParams, q: f64, mesh: &AngularMesh, omega: Vec<f64>) -> Result<Self> {
        let m = mesh.len();
        if omega.len() != m {
            return Err(Error::input(format!(
                "profile has {} values for {m} nodes",
                omega.len()
            )));
        }
        let exponents = exponent_pack(hp, q)?;
        let cos = mesh.cosines();
        let v = regularize(mesh.nodes(), &cos, hp.alpha(), &omega);
        let residual_sup = if exponents.is_subcritical() {
            let problem = Problem::new(hp, &exponents, mesh)?;
            let vhat: Vec<f64> = v.iter().map(|x| x / problem.scale).collect();
            problem.evaluate(&vhat).scaled
        } else {
            f64::NAN
        };
        Ok(Self {
            mesh: mesh.clone(),
            hp: *hp,
            exponents,
            omega,
            v,
            residual_sup,
            stats: SolveStats::default(),
        })
    }

    pub fn phi(&self) -> &[f64] {
        self.mesh.nodes()
    }

    /// Separable half-space solution `r^{−(2−q)/(q−1)} ω(φ_i)`.
    pub fn separable(&self, r: f64, i: usize) -> f64 {
        r.powf(-self.exponents.sing_exp) * self.omega[i]
    }

    /// Scaling `T_ℓ[u](r, φ_i) = ℓ^{(2−q)/(q−1)} u(ℓ r, φ_i)` of the separable
    /// solution; equals [`Self::separable`] for every `ℓ > 0`.
    pub fn rescaled_separable(&self, ell: f64, r: f64, i: usize) -> f64 {
        ell.powf(self.exponents.sing_exp) * self.separable(ell * r, i)
    }
}

/// Works on `v / γ₁`, so every unknown is of order one whatever the size of
/// `γ₁`; the absorption weights carry the factor `γ₁^{q−1} = (ℓ−κ)/α^q`.
struct Problem {
    fv: AngularFv,
    scale: f64,
    eps2: f64,
    absorb: Vec<f64>,
    gap: f64,
    se: f64,
    alpha: f64,
    q: f64,
    ell: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

struct Eval {
    f: Vec<f64>,
    scaled: f64,
    merit: f64,
}

impl Problem {
    fn new(hp: &HardyParams, pack: &ExponentPack, mesh: &AngularMesh) -> Result<Self> {
        let (g1, g2, a0) = pack.bracket()?;
        if !(g1.is_finite() && g2.is_normal() && g2 > 0.0) {
            return Err(Error::input(format!(
                "bracket [{g2:e}, {g1:e}] at q = {} leaves the floating-point range",
                pack.q
            )));
        }
        let alpha = hp.alpha();
        let q = pack.q;
        let fv = AngularFv::new(mesh, hp.n(), alpha);
        let amp = (pack.ell - pack.kappa) / alpha.powf(q);
        let absorb = fv.weights(alpha + q * (alpha - 1.0)).into_iter().map(|w| w * amp).collect();
        let lower = fv.cos.iter().map(|c| g2 / g1 * c.powf(a0 - alpha)).collect();
        let upper = vec![1.0; fv.len()];
        Ok(Self {
            fv,
            scale: g1,
            eps2: (GRAD_EPS / g1).powi(2).max(f64::MIN_POSITIVE),
            absorb,
            gap: pack.ell - pack.kappa,
            se: pack.sing_exp,
            alpha,
            q,
            ell: pack.ell,
            lower,
            upper,
        })
    }

    /// `(B_i, ∂B/∂v_i direct, g_i)` with `g = c v' − α s v`.
    #[inline]
    fn grad_sq(&self, v: &[f64], i: usize) -> (f64, f64, f64) {
        let c = self.fv.cos[i];
        let s = self.fv.sin[i];
        let dv = self.fv.derivative(v, i);
        let g = c * dv - self.alpha * s * v[i];
        let a = self.se * c * v[i];
        let b = a * a + g * g + self.eps2;
        let db = 2.0 * self.se * c * a - 2.0 * self.alpha * s * g;
        (b, db, g)
    }

    fn diag_scale(&self, i: usize) -> f64 {
        let mut d = self.gap * self.fv.mass[i];
        if i + 1 < self.fv.len() {
            d += self.fv.face[i];
        }
        if i > 0 {
            d += self.fv.face[i - 1];
        }
        d
    }

    fn evaluate(&self, v: &[f64]) -> Eval {
        let m = self.fv.len();
        let vmax = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut f = vec![0.0; m];
        let mut scaled = 0.0f64;
        let mut merit = 0.0;
        for i in 0..m {
            let (b, _, _) = self.grad_sq(v, i);
            let nl = self.absorb[i] * b.powf(0.5 * self.q);
            let fi = self.fv.flux_div(v, i) + self.gap * self.fv.mass[i] * v[i] - nl;
            let d = self.diag_scale(i);
            f[i] = fi;
            scaled = scaled.max(fi.abs() / (d * vmax + nl + f64::MIN_POSITIVE));
            merit += (fi / d).powi(2);
        }
        Eval {
            f,
            scaled,
            merit: merit.sqrt() / (vmax + f64::MIN_POSITIVE),
        }
    }

    fn jacobian(&self, v: &[f64]) -> BandMatrix {
        let m = self.fv.len();
        let mut jac = BandMatrix::zeros(m, 2, 2);
        for i in 0..m {
            if i + 1 < m {
                jac.add(i, i + 1, self.fv.face[i]);
                jac.add(i, i, -self.fv.face[i]);
            }
            if i > 0 {
                jac.add(i, i - 1, self.fv.face[i - 1]);
                jac.add(i, i, -self.fv.face[i - 1]);
            }
            jac.add(i, i, self.gap * self.fv.mass[i]);
            let (b, db, g) = self.grad_sq(v, i);
            let w = self.absorb[i] * 0.5 * self.q * b.powf(0.5 * self.q - 1.0);
            jac.add(i, i, -w * db);
            let c = self.fv.cos[i];
            if i > 0 && c != 0.0 {
                let cols = self.fv.derivative_columns(i);
                for (k, col) in cols.iter().enumerate() {
                    jac.add(i, *col, -w * 2.0 * g * c * self.fv.deriv[i][k]);
                }
            }
        }
        jac
    }

    /// The equation is `A v + (ℓ−κ) M v − N(v)` with `N` homogeneous of
    /// degree `q`, so along the ray `t v` the node-summed residual vanishes at
    /// `t^{q−1} = (ℓ−κ) Σ M v / Σ N(v)` (the flux terms telescope).
    fn project_amplitude(&self, v: &mut [f64]) {
        let lin: f64 = (0..v.len()).map(|i| self.gap * self.fv.mass[i] * v[i]).sum();
        let nl: f64 = (0..v.len())
            .map(|i| self.absorb[i] * self.grad_sq(v, i).0.powf(0.5 * self.q))
            .sum();
        if lin > 0.0 && nl > 0.0 {
            let t = (lin / nl).powf(1.0 / (self.q - 1.0));
            v.iter_mut().for_each(|x| *x *= t);
        }
    }

    fn clamp(&self, v: &mut [f64]) -> f64 {
        let mut margin = f64::INFINITY;
        for ((x, lo), hi) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
            margin = margin.min(*x - lo).min(hi - *x);
        }
        margin
    }

    fn newton(&self, v: &mut Vec<f64>, opts: &OmegaOptions, stats: &mut SolveStats) -> Result<f64> {
        let mut ev = self.evaluate(v);
        for _ in 0..opts.max_newton {
            if ev.scaled <= opts.target_tol {
                break;
            }
            let lu = self.jacobian(v).factor()?;
            let mut step: Vec<f64> = ev.f.iter().map(|x| -x).collect();
            lu.solve_in_place(&mut step);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let mut trial: Vec<f64> = v.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
                let margin = self.clamp(&mut trial);
                let ev_try = self.evaluate(&trial);
                if ev_try.merit < ev.merit {
                    accepted = Some((trial, ev_try, margin));
                    break;
                }
                lambda *= 0.5;
            }
            let Some((trial, ev_try, margin)) = accepted else {
                break;
            };
            *v = trial;
            ev = ev_try;
            stats.newton_iterations += 1;
            stats.min_bracket_margin = stats.min_bracket_margin.min(margin);
            stats.trace.push(ev.scaled);
        }
        Ok(ev.scaled)
    }

    /// Classical monotone iteration `(−A + Λ M) v⁺ = (Λ + ℓ − κ) M v − N(v)`.
    fn monotone(&self, v: &mut [f64], opts: &OmegaOptions, stats: &mut SolveStats) -> Result<f64> {
        let m = self.fv.len();
        let mut lip = 0.0f64;
        for profile in [&self.upper[..], &*v] {
            for i in 0..m {
                let (b, db, _) = self.grad_sq(profile, i);
                let d = self.absorb[i] * 0.5 * b.powf(0.5 * self.q - 1.0) * db.abs() / self.fv.mass[i];
                lip = lip.max(d);
            }
        }
        let shift = self.ell + self.q * lip;
        let mut op = BandMatrix::zeros(m, 1, 1);
        for i in 0..m {
            if i + 1 < m {
                op.add(i, i + 1, -self.fv.face[i]);
                op.add(i, i, self.fv.face[i]);
            }
            if i > 0 {
                op.add(i, i - 1, -self.fv.face[i - 1]);
                op.add(i, i, self.fv.face[i - 1]);
            }
            op.add(i, i, shift * self.fv.mass[i]);
        }
        let lu = op.factor()?;
        let mut scaled = self.evaluate(v).scaled;
        for _ in 0..opts.max_sweeps {
            if scaled <= opts.converged_tol {
                break;
            }
            let mut rhs: Vec<f64> = (0..m)
                .map(|i| {
                    let (b, _, _) = self.grad_sq(v, i);
                    (shift + self.gap) * self.fv.mass[i] * v[i] - self.absorb[i] * b.powf(0.5 * self.q)
                })
                .collect();
            lu.solve_in_place(&mut rhs);
            let margin = self.clamp(&mut rhs);
            v.copy_from_slice(&rhs);
            scaled = self.evaluate(v).scaled;
            stats.monotone_sweeps += 1;
            stats.min_bracket_margin = stats.min_bracket_margin.min(margin);
            stats.trace.push(scaled);
        }
        Ok(scaled)
    }
}

/// Solves the hemisphere problem with default options.
pub fn solve_omega(hp: &HardyParams, q: f64, mesh: &AngularMesh) -> Result<HemisphereSolution> {
    solve_omega_with(hp, q, mesh, &OmegaOptions::default())
}

/// Damped Newton on the regularized unknown, clamped to the sub/supersolution
/// bracket, with a monotone-iteration fallback.
pub fn solve_omega_with(
    hp: &HardyParams,
    q: f64,
    mesh: &AngularMesh,
    opts: &OmegaOptions,
) -> Result<HemisphereSolution> {
    let pack = exponent_pack(hp, q)?;
    pack.require_subcritical()?;
    let problem = Problem::new(hp, &pack, mesh)?;
    let mut v = match &opts.start {
        Start::Supersolution => problem.upper.clone(),
        Start::Subsolution => problem.lower.clone(),
        Start::Profile(p) => {
            if p.len() != mesh.len() {
                return Err(Error::input("starting profile does not match the mesh"));
            }
            p.iter().map(|x| x / problem.scale).collect()
        }
    };
    if opts.project_amplitude {
        problem.project_amplitude(&mut v);
    }
    let mut stats = SolveStats {
        min_bracket_margin: problem.clamp(&mut v),
        ..SolveStats::default()
    };

    let mut scaled = problem.newton(&mut v, opts, &mut stats)?;
    if scaled > opts.converged_tol {
        problem.monotone(&mut v, opts, &mut stats)?;
        scaled = problem.newton(&mut v, opts, &mut stats)?;
    }
    if scaled > opts.converged_tol {
        return Err(Error::Convergence {
            solver: "hemisphere newton",
            iterations: stats.newton_iterations + stats.monotone_sweeps,
            residual: scaled,
            trace: stats.trace,
        });
    }
    v.iter_mut().for_each(|x| *x *= problem.scale);
    stats.min_bracket_margin *= problem.scale;
    let omega = problem
        .fv
        .cos
        .iter()
        .zip(&v)
        .map(|(c, x)| c.powf(hp.alpha()) * x)
        .collect();
    Ok(HemisphereSolution {
        mesh: mesh.clone(),
        hp: *hp,
        exponents: pack,
        omega,
        v,
        residual_sup: scaled,
        stats,
    })
}

/// Finite-difference residual of the profile equation at interior nodes,
///
/// `ω'' + (N−2) cot φ ω' + μ ω / cos²φ + ℓ ω − (s² ω² + ω'²)^{q/2}`.
///
/// Nonpositive for supersolutions, nonnegative for subsolutions.
pub fn ode_residual(sol: &HemisphereSolution) -> Result<Vec<f64>> {
    let pack = &sol.exponents;
    pack.require_subcritical()?;
    let x = sol.mesh.nodes();
    let w = &sol.omega;
    let m = x.len();
    let nm2 = sol.hp.nf() - 2.0;
    let mu = sol.hp.mu();
    let q = pack.q;
    let se = pack.sing_exp;
    Ok((1..m - 1)
        .map(|i| {
            let hm = x[i] - x[i - 1];
            let hp = x[i + 1] - x[i];
            let d1 = (-hp / (hm * (hm + hp))) * w[i - 1]
                + ((hp - hm) / (hm * hp)) * w[i]
                + (hm / (hp * (hm + hp))) * w[i + 1];
            let d2 = second_derivative(x, w, i);
            let (s, c) = x[i].sin_cos();
            d2 + nm2 * (c / s) * d1 + mu * w[i] / (c * c) + pack.ell * w[i]
                - (se * w[i]).hypot(d1).powf(q)
        })
        .collect())
}

/// Least-squares slope of `log ω` against `log cos φ` over the last decade of
/// `cos φ` before the boundary.
pub fn boundary_exponent_fit(sol: &HemisphereSolution) -> Result<f64> {
    let cos = sol.mesh.cosines();
    let m = cos.len();
    let cmin = cos[m - 2];
    let pts: Vec<(f64, f64)> = (0..m - 1)
        .filter(|&i| cos[i] <= 10.0 * cmin * (1.0 + 1e-12) && sol.omega[i] > 0.0)
        .map(|i| (cos[i].ln(), sol.omega[i].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Fit(format!(
            "boundary window holds {} usable nodes, need at least 3",
            pts.len()
        )));
    }
    Ok(crate::stats::ls_slope(&pts).0)
}

/// Solves from the supersolution and from the subsolution and returns the
/// sup-norm gap between the converged profiles.
pub fn uniqueness_probe(hp: &HardyParams, q: f64, mesh: &AngularMesh) -> Result<f64> {
    uniqueness_probe_from(hp, q, mesh, Start::Supersolution, Start::Subsolution)
}

pub fn uniqueness_probe_from(
    hp: &HardyParams,
    q: f64,
    mesh: &AngularMesh,
    first: Start,
    second: Start,
) -> Result<f64> {
    let run = |start| {
        solve_omega_with(
            hp,
            q,
            mesh,
            &OmegaOptions {
                start,
                target_tol: 1e-15,
                ..OmegaOptions::default()
            },
        )
    };
    let (a, b) = rayon::join(|| run(first), || run(second));
    let (a, b) = (a?, b?);
    Ok(a.omega
        .iter()
        .zip(&b.omega)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}

/// `max_i |ω'(φ_i)| / cos^{α−1}(φ_i)` over all nodes but the pole, computed
/// from the regularized form `ω' = cos^{α−1}(cos v' − α sin v)`.
pub fn normalized_gradient_sup(sol: &HemisphereSolution) -> f64 {
    let fv = AngularFv::new(&sol.mesh, sol.hp.n(), sol.hp.alpha());
    (1..fv.len())
        .map(|i| (fv.cos[i] * fv.derivative(&sol.v, i) - sol.hp.alpha() * fv.sin[i] * sol.v[i]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::phi_mu;

    fn hp() -> HardyParams {
        HardyParams::new(3, 0.25).unwrap()
    }

    #[test]
    fn zero_profile_has_zero_residual() {
        let mesh = AngularMesh::chebyshev(40).unwrap();
        let sol = HemisphereSolution::from_profile(&hp(), 1.2, &mesh, vec![0.0; 40]).unwrap();
        assert!(ode_residual(&sol).unwrap().iter().all(|r| r.abs() < 1e-300));
    }

    #[test]
    fn supercritical_refused() {
        let mesh = AngularMesh::chebyshev(40).unwrap();
        assert!(matches!(
            solve_omega(&hp(), 1.45, &mesh),
            Err(Error::Supercritical { .. })
        ));
        let sol = HemisphereSolution::from_profile(&hp(), 1.45, &mesh, vec![0.0; 40]).unwrap();
        assert!(matches!(ode_residual(&sol), Err(Error::Supercritical { .. })));
    }

    #[test]
    fn fit_recovers_exact_power() {
        let mesh = AngularMesh::chebyshev(400).unwrap();
        let h = hp();
        let omega: Vec<f64> = mesh.nodes().iter().map(|p| phi_mu(*p, 0.5)).collect();
        let sol = HemisphereSolution::from_profile(&h, 1.2, &mesh, omega).unwrap();
        assert!((boundary_exponent_fit(&sol).unwrap() - 0.5).abs() < 1e-10);

        let a0 = sol.exponents.alpha0.unwrap();
        let omega: Vec<f64> = mesh.nodes().iter().map(|p| phi_mu(*p, a0)).collect();
        let sol = HemisphereSolution::from_profile(&h, 1.2, &mesh, omega).unwrap();
        assert!((boundary_exponent_fit(&sol).unwrap() - a0).abs() < 1e-10);
    }

    #[test]
    fn fit_needs_enough_nodes() {
        let mesh = AngularMesh::chebyshev(5).unwrap();
        let omega = vec![0.0; 5];
        let sol = HemisphereSolution::from_profile(&hp(), 1.2, &mesh, omega).unwrap();
        assert!(matches!(boundary_exponent_fit(&sol), Err(Error::Fit(_))));
    }

    #[test]
    fn huge_amplitudes_solve_or_refuse() {
        let h = hp();
        let mesh = AngularMesh::chebyshev(80).unwrap();
        let q = 1.0 + 0.05 * (h.q_crit() - 1.0);
        let sol = solve_omega(&h, q, &mesh).unwrap();
        assert!(sol.exponents.gamma1.unwrap() > 1e150);
        assert!(sol.residual_sup <= 1e-8);
        assert!(ode_residual(&sol).unwrap().iter().all(|r| r.is_finite()));
        let q = 1.0 + 0.01 * (h.q_crit() - 1.0);
        assert!(matches!(solve_omega(&h, q, &mesh), Err(Error::Input(_))));
    }

    #[test]
    fn identical_starts_have_zero_gap() {
        let mesh = AngularMesh::chebyshev(60).unwrap();
        let gap = uniqueness_probe_from(&hp(), 1.2, &mesh, Start::Supersolution, Start::Supersolution).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn monotone_fallback_alone_converges() {
        let mesh = AngularMesh::chebyshev(60).unwrap();
        let opts = OmegaOptions {
            max_newton: 0,
            max_sweeps: 20_000,
            ..OmegaOptions::default()
        };
        let err = solve_omega_with(&hp(), 1.3, &mesh, &opts);
        let reference = solve_omega(&hp(), 1.3, &mesh).unwrap();
        match err {
            Ok(sol) => {
                assert!(sol.stats.monotone_sweeps > 0);
                let gap = sol
                    .omega
                    .iter()
                    .zip(&reference.omega)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(gap < 1e-5 * reference.omega[0], "gap {gap}");
            }
            Err(Error::Convergence { trace, .. }) => {
                // The sweep must at least make monotone progress.
                assert!(trace.last().unwrap() < trace.first().unwrap());
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn starting_profile_length_checked() {
        let mesh = AngularMesh::chebyshev(20).unwrap();
        let opts = OmegaOptions {
            start: Start::Profile(vec![1.0; 3]),
            ..OmegaOptions::default()
        };
        assert!(matches!(solve_omega_with(&hp(), 1.2, &mesh, &opts), Err(Error::Input(_))));
    }
}
