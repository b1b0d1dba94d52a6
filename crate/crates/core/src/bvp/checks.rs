//! Diagnostics on converged weak-singularity runs: the axis ratio to the
//! Martin kernel, ordering in `k`, normalized a priori bounds and the
//! consistency of the deficit `kK − u` with a linear solve.

use serde::Serialize;

use crate::angular::{regularize, AngularFv};
use crate::error::{Error, Result};
use crate::fieldops::{solve_linear_lmu_with, AxiGrid, InnerClosure, SolutionField};
use crate::params::ExponentPack;

use super::weak::WeakSingularityRun;

/// Inner sample radius of the ratio extrapolation; the outer one sits one
/// octave above it.
pub const RICHARDSON_RADIUS: f64 = 1e-3;

/// A priori bounds are taken over `r ≤ 1/2`, away from the Dirichlet sphere.
pub const APRIORI_RADIUS: f64 = 0.5;

/// Admissible ratio of normalized sups between a grid and its refinement.
pub const REFINEMENT_BAND: (f64, f64) = (0.8, 1.25);

#[derive(Debug, Clone, Serialize)]
pub struct RatioTrace {
    /// `(r, u/(kK))` along `φ = 0`.
    pub samples: Vec<(f64, f64)>,
    /// Richardson limit from the samples at `r_pair`.
    pub limit: f64,
    /// Decay exponent of `1 − u/(kK)` used in the extrapolation.
    pub exponent: f64,
    pub r_pair: (f64, f64),
}

fn nearest_row(g: &AxiGrid, r: f64) -> usize {
    let (lo, f) = g.locate(r.ln());
    if f > 0.5 {
        lo + 1
    } else {
        lo
    }
}

/// Axis samples of `u/(kK)` and their extrapolation to `r = 0`, assuming
/// `1 − u/(kK) ∝ r^p` with `p = N + α − (N + α − 1) q`.
pub fn ratio_trace(run: &WeakSingularityRun) -> RatioTrace {
    let g = run.grid();
    let m = g.angular_len();
    let samples: Vec<(f64, f64)> = g.radii().iter().enumerate().map(|(j, r)| (*r, run.ratio[j * m])).collect();
    let p = run.exponents.deficit_exponent();
    let r1 = RICHARDSON_RADIUS.max(4.0 * g.r_min());
    let j1 = nearest_row(g, r1);
    let mut j2 = nearest_row(g, 2.0 * g.radii()[j1]);
    if j2 == j1 {
        j2 = (j1 + 1).min(g.radial_len() - 1);
    }
    let (a, b) = (samples[j1], samples[j2]);
    let limit = a.1 - (b.1 - a.1) / ((b.0 / a.0).powf(p) - 1.0);
    RatioTrace {
        samples,
        limit,
        exponent: p,
        r_pair: (a.0, b.0),
    }
}

/// `u₁ ≤ u₂ + 1e−10` at every node.
pub fn comparison_check(run1: &WeakSingularityRun, run2: &WeakSingularityRun) -> Result<bool> {
    if !run1.grid().same_as(run2.grid()) {
        return Err(Error::input("runs live on different grids"));
    }
    Ok(run1
        .field
        .values
        .iter()
        .zip(&run2.field.values)
        .all(|(a, b)| *a <= *b + 1e-10))
}

/// Positivity at interior nodes and `u ≤ kK + 1e−9` at every node.
pub fn check_invariants(run: &WeakSingularityRun) -> (bool, bool) {
    let g = run.grid();
    let m = g.angular_len();
    let positive = (0..g.radial_len())
        .flat_map(|j| (0..m - 1).map(move |i| (j, i)))
        .all(|(j, i)| run.field.values[j * m + i] > 0.0);
    let dominated = run.ratio.iter().zip(&run.field.values).all(|(w, u)| {
        let kk = if *w != 0.0 { u / w } else { 0.0 };
        *u <= kk + 1e-9
    });
    (positive, dominated)
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    /// `sup u / (δ^α r^{−(2−q)/(q−1)−α})`.
    pub sup_value: f64,
    /// `sup |∇u| / (δ^{α−1} r^{−(2−q)/(q−1)−α})`.
    pub sup_gradient: f64,
    pub radius_cap: f64,
    pub nodes: usize,
}

/// Normalized sups over the nodes with `r ≤ 1/2`. With `v = u / cos^α φ`
/// both normalizations reduce to smooth expressions,
/// `r^{s} v` and `r^{s} (cos²φ v_x² + (cos φ v_φ − α sin φ v)²)^{1/2}` with
/// `s = (2−q)/(q−1)` and `x = ln r`, which stay finite on the flat boundary.
pub fn apriori_check(field: &SolutionField, exponents: &ExponentPack) -> AprioriReport {
    let g = &field.grid;
    let (nr, m) = (g.radial_len(), g.angular_len());
    let alpha = exponents.alpha;
    let s = exponents.sing_exp;
    let fv = AngularFv::new(g.mesh(), exponents.n.max(2), alpha);
    let v: Vec<Vec<f64>> = (0..nr).map(|j| regularize(g.angles(), g.cosines(), alpha, field.row(j))).collect();
    let quantities = |j: usize| -> Vec<(f64, f64)> {
        let scale = g.radii()[j].powf(s);
        let (rows, d1, _) = g.radial_fd(j);
        (0..m)
            .map(|i| {
                let c = fv.cos[i];
                let vx: f64 = (0..3).map(|k| d1[k] * v[rows[k]][i]).sum();
                let vp = if c == 0.0 { 0.0 } else { fv.derivative(&v[j], i) };
                let ang = c * vp - alpha * fv.sin[i] * v[j][i];
                (scale * v[j][i].abs(), scale * (c * c * vx * vx + ang * ang).sqrt())
            })
            .collect()
    };
    let (mut sup_value, mut sup_gradient, mut nodes) = (0.0f64, 0.0f64, 0);
    let inside = g.radii().iter().take_while(|r| **r <= APRIORI_RADIUS * (1.0 + 1e-12)).count();
    let mut rows: Vec<Vec<(f64, f64)>> = (0..inside).map(quantities).collect();
    if inside > 0 && inside < nr {
        // the cap row, interpolated in ln r so the sup does not depend on node placement
        let x = g.log_radii();
        let t = (APRIORI_RADIUS.ln() - x[inside - 1]) / (x[inside] - x[inside - 1]);
        let (lo, hi) = (&rows[inside - 1], quantities(inside));
        rows.push(
            lo.iter()
                .zip(&hi)
                .map(|(a, b)| (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)))
                .collect(),
        );
    }
    for row in &rows {
        for (val, grad) in row {
            sup_value = sup_value.max(*val);
            sup_gradient = sup_gradient.max(*grad);
            nodes += 1;
        }
    }
    AprioriReport {
        sup_value,
        sup_gradient,
        radius_cap: APRIORI_RADIUS,
        nodes,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementStability {
    pub value_ratio: f64,
    pub gradient_ratio: f64,
    pub stable: bool,
}

/// Ratios of the fine to the coarse sups against [`REFINEMENT_BAND`].
pub fn apriori_stability(coarse: &AprioriReport, fine: &AprioriReport) -> RefinementStability {
    let value_ratio = fine.sup_value / coarse.sup_value;
    let gradient_ratio = fine.sup_gradient / coarse.sup_gradient;
    let inside = |x: f64| x.is_finite() && x >= REFINEMENT_BAND.0 && x <= REFINEMENT_BAND.1;
    RefinementStability {
        value_ratio,
        gradient_ratio,
        stable: inside(value_ratio) && inside(gradient_ratio),
    }
}

/// Largest difference, relative to its maximum, between the deficit
/// `kK − u` and the linear solve of `−L_μ d = |∇u|^q` with zero data on the
/// sphere and a vanishing ratio `d/K` at the origin, over `r ≤ 1/2`.
pub fn deficit_consistency(run: &WeakSingularityRun) -> Result<f64> {
    let g = run.grid();
    let (nr, m) = (g.radial_len(), g.angular_len());
    let hp = &run.hp;
    let alpha = hp.alpha();
    let beta = 2.0 - hp.nf() - alpha;
    let fv = AngularFv::new(g.mesh(), hp.n(), alpha);
    let w = &run.ratio;
    let mut source = vec![0.0; g.len()];
    for j in 0..nr {
        let r = g.radii()[j];
        let (rows, d1, _) = g.radial_fd(j);
        let row = &w[j * m..(j + 1) * m];
        for i in 0..m - 1 {
            let c = fv.cos[i];
            let wx: f64 = (0..3).map(|k| d1[k] * w[rows[k] * m + i]).sum();
            let x = c * (wx + beta * row[i]);
            let y = c * fv.derivative(row, i) - alpha * fv.sin[i] * row[i];
            let grad = run.k * r.powf(beta - 1.0) * c.powf(alpha - 1.0) * (x * x + y * y).sqrt();
            source[j * m + i] = grad.powf(run.q);
        }
    }
    let src = SolutionField::new(g.clone(), source)?;
    let closure = InnerClosure::Trace {
        limit: 0.0,
        exponent: run.exponents.deficit_exponent(),
    };
    let lin = solve_linear_lmu_with(&src, &vec![0.0; m], hp, closure)?;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for j in 0..nr {
        if g.radii()[j] > APRIORI_RADIUS {
            continue;
        }
        for i in 0..m - 1 {
            let k = j * m + i;
            let kk = run.field.values[k] / w[k];
            let d = kk - run.field.values[k];
            diff = diff.max((d - lin.values[k]).abs());
            scale = scale.max(d.abs());
        }
    }
    Ok(diff / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularMesh;
    use crate::bvp::solve_weak;
    use crate::params::{exponent_pack, HardyParams};

    fn hp() -> HardyParams {
        HardyParams::new(3, 0.25).unwrap()
    }

    fn grid(nr: usize, m: usize) -> AxiGrid {
        AxiGrid::new(1e-4, nr, AngularMesh::chebyshev(m).unwrap()).unwrap()
    }

    #[test]
    fn exact_kernel_trace_is_one() {
        let g = grid(61, 21);
        let mut run = solve_weak(1.0, &hp(), 1.2, &g).unwrap();
        run.ratio = vec![1.0; g.len()];
        let t = ratio_trace(&run);
        assert!(t.samples.iter().all(|s| s.1 == 1.0));
        assert_eq!(t.limit, 1.0);
    }

    #[test]
    fn deficit_is_positive_and_ordered() {
        let g = grid(81, 21);
        let a = solve_weak(0.5, &hp(), 1.2, &g).unwrap();
        let b = solve_weak(1.0, &hp(), 1.2, &g).unwrap();
        let t = ratio_trace(&b);
        assert!(t.samples.iter().skip(1).take(79).all(|s| s.1 < 1.0));
        assert!(comparison_check(&a, &b).unwrap());
        assert!(!comparison_check(&b, &a).unwrap());
        assert!(comparison_check(&b, &b).unwrap());
        assert_eq!(check_invariants(&b), (true, true));
        let other = solve_weak(1.0, &hp(), 1.2, &grid(41, 21)).unwrap();
        assert!(comparison_check(&a, &other).is_err());
    }

    #[test]
    fn separable_power_has_unit_normalized_sup() {
        let h = hp();
        let pack = exponent_pack(&h, 1.2).unwrap();
        let g = grid(61, 41);
        let s = pack.sing_exp;
        let f = SolutionField::from_fn(&g, |r, p| (r * p.cos().max(0.0)).powf(0.5) * r.powf(-s - 0.5)).unwrap();
        let rep = apriori_check(&f, &pack);
        assert!((rep.sup_value - 1.0).abs() < 1e-9, "{}", rep.sup_value);
        assert!(rep.sup_gradient.is_finite());
    }

    #[test]
    fn violating_field_is_flagged_under_refinement() {
        let h = hp();
        let pack = exponent_pack(&h, 1.2).unwrap();
        let g = grid(31, 21);
        let f = |g: &AxiGrid| SolutionField::from_fn(g, |r, _| r.powf(-5.0)).unwrap();
        let coarse = apriori_check(&f(&g), &pack);
        let fine = apriori_check(&f(&g.refined()), &pack);
        assert!(!apriori_stability(&coarse, &fine).stable);
    }

    #[test]
    fn deficit_matches_linear_solve() {
        let g = grid(121, 31);
        let run = solve_weak(1.0, &hp(), 1.2, &g).unwrap();
        let e = deficit_consistency(&run).unwrap();
        assert!(e < 1e-2, "{e}");
    }
}
