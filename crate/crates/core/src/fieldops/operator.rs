//! The discrete `−L_μ = −Δ − μ/δ²` on the model half-ball.
//!
//! Fields are factored against the ground state `cos^α φ`. For `u = cos^α φ · v`
//!
//! ```text
//! −L_μ u = −cos^α φ · r^{−2} [v_xx + (N−2) v_x − κ v + 𝒜 v],   x = ln r,
//! ```
//!
//! where `𝒜 v = (sin^{N−2} cos^{2α} v_φ)_φ / (sin^{N−2} cos^{2α})` is
//! discretized by the weighted finite-volume stencil of the hemisphere solver.
//! Linear and nonlinear solves go one step further and divide by the Martin
//! kernel `K = cos^α φ · r^{2−N−α}`; the zeroth-order term then cancels.

use rayon::prelude::*;
use serde::Serialize;

use crate::angular::{regularize, AngularFv};
use crate::error::{Error, Result};
use crate::fieldops::grid::{AxiGrid, SolutionField};
use crate::linalg::BandMatrix;
use crate::params::HardyParams;

/// Exact `L_μ`-harmonic Martin kernel of the half-space with pole at the
/// origin, normalized to 1 at `r = 1, φ = 0`.
pub fn martin_halfspace(r: f64, phi: f64, hp: &HardyParams) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Pole);
    }
    let c = phi.cos().max(0.0);
    Ok(c.powf(hp.alpha()) * r.powf(martin_exponent(hp)))
}

/// Radial exponent `2 − N − α` of the Martin kernel.
pub fn martin_exponent(hp: &HardyParams) -> f64 {
    2.0 - hp.nf() - hp.alpha()
}

/// The Martin kernel sampled on a grid.
pub fn martin_field(grid: &AxiGrid, hp: &HardyParams) -> SolutionField {
    from_kernel_ratio(grid, hp, &vec![1.0; grid.len()])
}

/// Shared stencil data for operators written in `w = u / K` form:
///
/// `S c^{2α} (w_xx + a w_x) + (S c^{2α} w_φ)_φ`,  `a = 2 − N − 2α`,
///
/// integrated over angular cells, with `S = sin^{N−2}`.
#[derive(Debug, Clone)]
pub(crate) struct KernelStencil {
    pub fv: AngularFv,
    pub nr: usize,
    pub m: usize,
    /// Per radial row, `(w_{j−1}, w_j, w_{j+1})` coefficients of `w_xx + a w_x`.
    pub radial: Vec<[f64; 3]>,
    /// Per radial row, the same for `w_x`.
    pub d1: Vec<[f64; 3]>,
    /// Innermost spacing `x_1 − x_0`.
    pub h0: f64,
}

impl KernelStencil {
    pub fn new(grid: &AxiGrid, hp: &HardyParams) -> Self {
        let fv = AngularFv::new(grid.mesh(), hp.n(), hp.alpha());
        let a = 2.0 - hp.nf() - 2.0 * hp.alpha();
        let nr = grid.radial_len();
        let (radial, d1) = (0..nr)
            .map(|j| {
                let (_, d1, d2) = grid.radial_fd(j);
                ([0, 1, 2].map(|k| d2[k] + a * d1[k]), d1)
            })
            .unzip();
        Self {
            fv,
            nr,
            m: grid.angular_len(),
            radial,
            d1,
            h0: grid.spacing(0),
        }
    }

    /// The weighted operator at interior row `j`, angular node `i`.
    #[inline]
    pub fn apply(&self, w: &[f64], j: usize, i: usize) -> f64 {
        let m = self.m;
        let [cm, c0, cp] = self.radial[j];
        let row = &w[j * m..(j + 1) * m];
        self.fv.mass[i] * (cm * w[(j - 1) * m + i] + c0 * row[i] + cp * w[(j + 1) * m + i]) + self.fv.flux_div(row, i)
    }

    /// `w_x` at interior row `j`, angular node `i`.
    #[inline]
    pub fn wx(&self, w: &[f64], j: usize, i: usize) -> f64 {
        let m = self.m;
        let [a, b, c] = self.d1[j];
        a * w[(j - 1) * m + i] + b * w[j * m + i] + c * w[(j + 1) * m + i]
    }

    /// Diagonal magnitude used to scale residuals.
    pub fn diag_scale(&self, j: usize, i: usize) -> f64 {
        let mut d = self.fv.mass[i] * self.radial[j][1].abs();
        if i + 1 < self.m {
            d += self.fv.face[i];
        }
        if i > 0 {
            d += self.fv.face[i - 1];
        }
        d
    }
}

/// Discrete `−L_μ u` at interior nodes (all but the outermost radial rows and
/// the flat boundary); zero elsewhere.
pub fn lmu_apply(field: &SolutionField, hp: &HardyParams) -> Result<SolutionField> {
    let g = &field.grid;
    let (nr, m) = (g.radial_len(), g.angular_len());
    if nr < 3 || m < 5 {
        return Err(Error::input("operator needs at least 3 radial and 5 angular nodes"));
    }
    let alpha = hp.alpha();
    let kappa = hp.kappa();
    let fv = AngularFv::new(g.mesh(), hp.n(), alpha);
    let v: Vec<Vec<f64>> = (0..nr).map(|j| regularize(g.angles(), g.cosines(), alpha, field.row(j))).collect();
    let nm2 = hp.nf() - 2.0;
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
        if j == 0 || j + 1 == nr {
            return;
        }
        let r = g.radii()[j];
        let (_, d1, d2) = g.radial_fd(j);
        for i in 0..m - 1 {
            let vxx = d2[0] * v[j - 1][i] + d2[1] * v[j][i] + d2[2] * v[j + 1][i];
            let vx = d1[0] * v[j - 1][i] + d1[1] * v[j][i] + d1[2] * v[j + 1][i];
            let ang = fv.flux_div(&v[j], i) / fv.mass[i];
            let c = g.cosines()[i].powf(alpha);
            row[i] = -c / (r * r) * (vxx + nm2 * vx - kappa * v[j][i] + ang);
        }
    });
    SolutionField::new(g.clone(), out)
}

/// Interior nodes on which [`lmu_apply`] produces a value.
pub fn interior_nodes(grid: &AxiGrid) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (nr, m) = (grid.radial_len(), grid.angular_len());
    (1..nr - 1).flat_map(move |j| (0..m - 1).map(move |i| (j, i)))
}

/// Condition at the innermost radial row, expressed on `w = u/K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerClosure {
    /// `w − limit` decays like `r^exponent` between the two innermost rows.
    Trace { limit: f64, exponent: f64 },
    /// `w_0 − 2 w_1 + w_2 = 0`.
    ZeroCurvature,
    /// `ln w` has zero curvature: `w_0 w_2 = w_1²`.
    LogLinear,
}

impl InnerClosure {
    /// `(w_0, ∂w_0/∂w_1, ∂w_0/∂w_2)` for log step `h`.
    #[inline]
    pub fn eval(&self, w1: f64, w2: f64, h: f64) -> (f64, f64, f64) {
        match *self {
            InnerClosure::Trace { limit, exponent } => {
                let f = (-exponent * h).exp();
                (limit + (w1 - limit) * f, f, 0.0)
            }
            InnerClosure::ZeroCurvature => (2.0 * w1 - w2, 2.0, -1.0),
            InnerClosure::LogLinear => (w1 * w1 / w2, 2.0 * w1 / w2, -w1 * w1 / (w2 * w2)),
        }
    }

    pub fn is_affine(&self) -> bool {
        !matches!(self, InnerClosure::LogLinear)
    }
}

/// Solves `−L_μ u = source` with `u = outer_data` on `r = 1`, `u = 0` on the
/// flat boundary, axial symmetry, and zero discrete curvature of `u / K` in
/// `ln r` at `r_min`.
pub fn solve_linear_lmu(source: &SolutionField, outer_data: &[f64], hp: &HardyParams) -> Result<SolutionField> {
    solve_linear_lmu_with(source, outer_data, hp, InnerClosure::ZeroCurvature)
}

/// [`solve_linear_lmu`] with a chosen affine inner closure. The trace of a
/// solution at the origin is only determined by a [`InnerClosure::Trace`]
/// closure; zero curvature leaves it to round-off amplified by `r_min^{−2}`.
pub fn solve_linear_lmu_with(
    source: &SolutionField,
    outer_data: &[f64],
    hp: &HardyParams,
    closure: InnerClosure,
) -> Result<SolutionField> {
    let g = &source.grid;
    let (nr, m) = (g.radial_len(), g.angular_len());
    if outer_data.len() != m {
        return Err(Error::input(format!(
            "outer data has {} values for {m} angular nodes",
            outer_data.len()
        )));
    }
    if let Some(k) = outer_data.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite outer data at node {k}")));
    }
    if !closure.is_affine() {
        return Err(Error::input("linear solves need an affine inner closure"));
    }
    if nr < 4 {
        return Err(Error::input("linear solve needs at least 4 radial nodes"));
    }
    let alpha = hp.alpha();
    let beta = martin_exponent(hp);
    let st = KernelStencil::new(g, hp);
    // Source cells carry `∫ S c^α`; the singular boundary cell reuses the
    // value of its neighbour.
    let src_weight = st.fv.weights(alpha);
    let outer = regularize(g.angles(), g.cosines(), alpha, outer_data);
    let (c0_closure, d1, d2) = closure.eval(0.0, 0.0, st.h0);

    let rows = nr - 2;
    let n = rows * m;
    let mut mat = BandMatrix::zeros(n, m, m);
    let mut rhs = vec![0.0; n];
    for jj in 0..rows {
        let j = jj + 1;
        let [cm, c0, cp] = st.radial[j];
        let r = g.radii()[j];
        let scale = r.powf(2.0 - beta);
        for i in 0..m {
            let row = jj * m + i;
            let f = source.at(j, i.min(m - 2));
            rhs[row] = -scale * f * src_weight[i];
            let mass = st.fv.mass[i];
            let mut diag = mass * c0;
            let mut up = mass * cp;
            if j == 1 {
                diag += d1 * mass * cm;
                up += d2 * mass * cm;
                rhs[row] -= c0_closure * mass * cm;
            } else {
                mat.add(row, row - m, mass * cm);
            }
            if j + 2 == nr {
                rhs[row] -= up * outer[i];
            } else {
                mat.add(row, row + m, up);
            }
            if i + 1 < m {
                mat.add(row, row + 1, st.fv.face[i]);
                diag -= st.fv.face[i];
            }
            if i > 0 {
                mat.add(row, row - 1, st.fv.face[i - 1]);
                diag -= st.fv.face[i - 1];
            }
            mat.add(row, row, diag);
        }
    }
    let ratio = mat.factor()?.solve(&rhs);
    let mut w = vec![0.0; g.len()];
    w[m..(nr - 1) * m].copy_from_slice(&ratio);
    w[(nr - 1) * m..].copy_from_slice(&outer);
    for i in 0..m {
        w[i] = closure.eval(w[m + i], w[2 * m + i], st.h0).0;
    }
    Ok(from_kernel_ratio(g, hp, &w))
}

/// `u = K · w`, exactly zero on the flat boundary.
pub(crate) fn from_kernel_ratio(g: &AxiGrid, hp: &HardyParams, w: &[f64]) -> SolutionField {
    let m = g.angular_len();
    let beta = martin_exponent(hp);
    let mut values = vec![0.0; g.len()];
    for (j, r) in g.radii().iter().enumerate() {
        let rb = r.powf(beta);
        for i in 0..m {
            values[j * m + i] = g.cosines()[i].powf(hp.alpha()) * rb * w[j * m + i];
        }
    }
    SolutionField {
        grid: g.clone(),
        values,
        gradient: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularMesh;
    use approx::assert_relative_eq;

    fn hp() -> HardyParams {
        HardyParams::new(3, 0.25).unwrap()
    }

    fn grid(nr: usize, m: usize) -> AxiGrid {
        AxiGrid::new(1e-2, nr, AngularMesh::chebyshev(m).unwrap()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        for (n, mu) in [(3, 0.25), (4, 0.1), (6, 0.21)] {
            let h = HardyParams::new(n, mu).unwrap();
            assert_relative_eq!(martin_halfspace(1.0, 0.0, &h).unwrap(), 1.0);
            let a = martin_halfspace(0.3, 0.4, &h).unwrap();
            let b = martin_halfspace(0.3 * 2.5, 0.4, &h).unwrap();
            assert_relative_eq!(b, 2.5f64.powf(2.0 - n as f64 - h.alpha()) * a, max_relative = 1e-13);
        }
        assert_relative_eq!(martin_halfspace(0.1, 0.0, &hp()).unwrap(), 31.622776601683793, max_relative = 1e-14);
        assert!(matches!(martin_halfspace(0.0, 0.1, &hp()), Err(Error::Pole)));
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = grid(9, 11);
        let z = lmu_apply(&SolutionField::zeros(&g), &hp()).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kernel_is_harmonic_to_second_order() {
        let h = HardyParams::new(4, 0.15).unwrap();
        let mut errs = Vec::new();
        let mut g = grid(21, 21);
        for _ in 0..3 {
            let k = martin_field(&g, &h);
            let res = lmu_apply(&k, &h).unwrap();
            let e = interior_nodes(&g)
                .map(|(j, i)| (res.at(j, i) * g.radii()[j].powi(2) / k.at(j, i)).abs())
                .fold(0.0, f64::max);
            errs.push(e);
            g = g.refined();
        }
        let orders = crate::stats::observed_orders(&errs);
        assert!(orders.iter().all(|p| *p > 1.9), "{errs:?} {orders:?}");
    }

    #[test]
    fn linear_solve_recovers_kernel() {
        let h = hp();
        let g = grid(41, 31);
        let k = martin_field(&g, &h);
        let u = solve_linear_lmu(&SolutionField::zeros(&g), k.row(g.radial_len() - 1), &h).unwrap();
        for (a, b) in u.values.iter().zip(&k.values) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = grid(11, 11);
        let u = solve_linear_lmu(&SolutionField::zeros(&g), &[0.0; 11], &hp()).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn solve_inverts_apply_to_second_order() {
        // u/K − 1 decays like r^{1/2}, as the trace closure assumes.
        let h = hp();
        let beta = martin_exponent(&h);
        let closure = InnerClosure::Trace { limit: 1.0, exponent: 0.5 };
        let exact = |r: f64, p: f64| {
            let c = p.cos().max(0.0);
            c.powf(0.5) * r.powf(beta) * (1.0 + 0.3 * r.sqrt() * (1.0 + 0.2 * c * c))
        };
        let mut g = grid(15, 13);
        let mut errs = Vec::new();
        for _ in 0..3 {
            let u = SolutionField::from_fn(&g, exact).unwrap();
            let f = lmu_apply(&u, &h).unwrap();
            let back = solve_linear_lmu_with(&f, u.row(g.radial_len() - 1), &h, closure).unwrap();
            let e = interior_nodes(&g)
                .map(|(j, i)| ((back.at(j, i) - u.at(j, i)) / u.at(j, i)).abs())
                .fold(0.0, f64::max);
            errs.push(e);
            g = g.refined();
        }
        assert!(errs[0] < 5e-2, "{errs:?}");
        let orders = crate::stats::observed_orders(&errs);
        assert!(orders.iter().all(|p| *p > 1.5), "{errs:?} {orders:?}");
    }

    #[test]
    fn nonaffine_closure_refused() {
        let g = grid(11, 11);
        let r = solve_linear_lmu_with(&SolutionField::zeros(&g), &[0.0; 11], &hp(), InnerClosure::LogLinear);
        assert!(matches!(r, Err(Error::Input(_))));
    }
}
