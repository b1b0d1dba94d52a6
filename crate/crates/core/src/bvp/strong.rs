//! Large-mass limit of the weak singularities: the rescaled profile
//! `ℓ^{(2−q)/(q−1)} u(ℓ, φ)` against the hemisphere solution `ω`.

use serde::Serialize;

use crate::angular::regularize;
use crate::error::{Error, Result};
use crate::fieldops::{AxiGrid, GridDescriptor, SolutionField};
use crate::hemisphere::solve_omega;
use crate::params::{exponent_pack, HardyParams};

use super::checks::{comparison_check, REFINEMENT_BAND};
use super::weak::{solve_ladder, solve_weak_with, transferred_start, WeakOptions, WeakSingularityRun};

/// Radii at which the profile is compared. Close to the origin `u` still
/// follows `kK`, and the boundary layer at the sphere spoils `ℓ ≳ 0.1`.
pub const PROFILE_WINDOW: (f64, f64) = (0.02, 0.05);

/// Interior of the hemisphere used in the comparison.
pub const INTERIOR_COS: f64 = 0.2;

/// Outer cells the boundary layer at the sphere, of width
/// `k^{−(q−1)/(2−q)}`, must span at the top of the ladder.
pub const LAYER_CELLS: f64 = 2.0;

pub const MIN_RUNGS: usize = 4;
pub const MIN_DECADES: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct StrongLimitOptions {
    pub window: (f64, f64),
    pub min_cos: f64,
    pub weak: WeakOptions,
}

impl Default for StrongLimitOptions {
    fn default() -> Self {
        Self {
            window: PROFILE_WINDOW,
            min_cos: INTERIOR_COS,
            weak: WeakOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileSample {
    pub r: f64,
    /// `max |ℓ^s u(ℓ, φ)/ω(φ) − 1|` over the interior nodes of the row.
    pub max_relative_error: f64,
    /// `ℓ^s u(ℓ, 0)/ω(0)`.
    pub axis_ratio: f64,
}

/// `c⁻¹ ≤ u / (δ^α r^{−s−α}) ≤ c` on the rows of the profile window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoSidedBound {
    pub lower: f64,
    pub upper: f64,
    pub c: f64,
    pub r_range: (f64, f64),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundStability {
    pub c_ratio: f64,
    pub lower_ratio: f64,
    pub upper_ratio: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongLimitReport {
    pub n: usize,
    pub mu: f64,
    pub q: f64,
    pub ladder: Vec<f64>,
    pub grid: GridDescriptor,
    pub window: (f64, f64),
    pub min_cos: f64,
    pub omega: Vec<f64>,
    pub samples: Vec<ProfileSample>,
    pub max_relative_error: f64,
    pub two_sided: TwoSidedBound,
    /// Nodewise ordering of consecutive rungs.
    pub monotone: bool,
    pub newton_iterations: Vec<usize>,
}

pub struct StrongLimit {
    pub report: StrongLimitReport,
    pub runs: Vec<WeakSingularityRun>,
}

impl StrongLimit {
    pub fn top(&self) -> &WeakSingularityRun {
        self.runs.last().expect("ladder has at least four rungs")
    }
}

fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < MIN_RUNGS {
        return Err(Error::input(format!(
            "k ladder needs at least {MIN_RUNGS} rungs, got {}",
            ladder.len()
        )));
    }
    if ladder.windows(2).any(|w| !(w[1] > w[0])) || !(ladder[0] > 0.0) {
        return Err(Error::input("k ladder must be positive and strictly increasing"));
    }
    if (ladder[ladder.len() - 1] / ladder[0]).log10() < MIN_DECADES - 1e-12 {
        return Err(Error::input(format!("k ladder must span at least {MIN_DECADES} decades")));
    }
    Ok(())
}

fn check_layer(grid: &AxiGrid, q: f64, k_top: f64) -> Result<()> {
    let nr = grid.radial_len();
    let h = 1.0 - grid.radii()[nr - 2];
    let layer = k_top.powf(-(q - 1.0) / (2.0 - q));
    if layer < LAYER_CELLS * h {
        return Err(Error::input(format!(
            "boundary layer of width {layer:.2e} at k = {k_top:e} spans fewer than {LAYER_CELLS} outer cells of {h:.2e}; \
             lower the top of the ladder or the outer step"
        )));
    }
    Ok(())
}

/// Rows of `grid` with `lo ≤ r ≤ hi`.
fn rows_between(grid: &AxiGrid, lo: f64, hi: f64) -> Vec<usize> {
    (0..grid.radial_len())
        .filter(|j| {
            let r = grid.radii()[*j];
            r >= lo && r <= hi
        })
        .collect()
}

/// Profile errors of `run` against `omega` on the rows inside `window`.
pub fn profile_errors(run: &WeakSingularityRun, omega: &[f64], window: (f64, f64), min_cos: f64) -> Vec<ProfileSample> {
    let g = run.grid();
    let m = g.angular_len();
    let s = run.exponents.sing_exp;
    rows_between(g, window.0, window.1)
        .into_iter()
        .map(|j| {
            let r = g.radii()[j];
            let scale = r.powf(s);
            let row = run.field.row(j);
            let max_relative_error = (0..m)
                .filter(|i| g.cosines()[*i] >= min_cos)
                .map(|i| (scale * row[i] / omega[i] - 1.0).abs())
                .fold(0.0, f64::max);
            ProfileSample {
                r,
                max_relative_error,
                axis_ratio: scale * row[0] / omega[0],
            }
        })
        .collect()
}

/// Extremes of `u / (δ^α r^{−s−α}) = r^s u / cos^α φ` over the rows with
/// `r` in `window` and every angle, the flat boundary taken as a limit.
pub fn two_sided_bound(field: &SolutionField, alpha: f64, sing_exp: f64, window: (f64, f64)) -> Result<TwoSidedBound> {
    let g = &field.grid;
    let rows = rows_between(g, window.0, window.1);
    if rows.is_empty() {
        return Err(Error::input(format!("no grid rows in [{}, {}]", window.0, window.1)));
    }
    let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
    for &j in &rows {
        let scale = g.radii()[j].powf(sing_exp);
        for v in regularize(g.angles(), g.cosines(), alpha, field.row(j)) {
            lower = lower.min(scale * v);
            upper = upper.max(scale * v);
        }
    }
    Ok(TwoSidedBound {
        lower,
        upper,
        c: upper.max(1.0 / lower),
        r_range: (g.radii()[rows[0]], g.radii()[rows[rows.len() - 1]]),
    })
}

/// Compares the bounds of a run and its refinement against [`REFINEMENT_BAND`].
pub fn bound_stability(coarse: &TwoSidedBound, fine: &TwoSidedBound) -> BoundStability {
    let inside = |x: f64| x.is_finite() && x >= REFINEMENT_BAND.0 && x <= REFINEMENT_BAND.1;
    let c_ratio = fine.c / coarse.c;
    let lower_ratio = fine.lower / coarse.lower;
    let upper_ratio = fine.upper / coarse.upper;
    BoundStability {
        c_ratio,
        lower_ratio,
        upper_ratio,
        stable: inside(c_ratio) && inside(lower_ratio) && inside(upper_ratio),
    }
}

/// Solves the ladder on `grid` and compares the top rung with `ω`.
pub fn strong_limit(
    hp: &HardyParams,
    q: f64,
    grid: &AxiGrid,
    ladder: &[f64],
    opts: &StrongLimitOptions,
) -> Result<StrongLimit> {
    validate_ladder(ladder)?;
    exponent_pack(hp, q)?.require_subcritical()?;
    check_layer(grid, q, ladder[ladder.len() - 1])?;
    let (lo, hi) = opts.window;
    if !(lo > 0.0 && lo < hi && hi < 1.0) || rows_between(grid, lo, hi).is_empty() {
        return Err(Error::input(format!("profile window [{lo}, {hi}] holds no grid rows")));
    }
    let omega = solve_omega(hp, q, grid.mesh()).map_err(|e| e.at_stage("hemisphere"))?.omega;
    let runs = solve_ladder(ladder, hp, q, grid, &opts.weak)?;
    let top = runs.last().expect("validated ladder");
    let samples = profile_errors(top, &omega, opts.window, opts.min_cos);
    let max_relative_error = samples.iter().map(|s| s.max_relative_error).fold(0.0, f64::max);
    let two_sided = two_sided_bound(&top.field, hp.alpha(), top.exponents.sing_exp, opts.window)?;
    let mut monotone = true;
    for w in runs.windows(2) {
        monotone &= comparison_check(&w[0], &w[1])?;
    }
    let report = StrongLimitReport {
        n: hp.n(),
        mu: hp.mu(),
        q,
        ladder: ladder.to_vec(),
        grid: grid.descriptor(),
        window: opts.window,
        min_cos: opts.min_cos,
        omega,
        samples,
        max_relative_error,
        two_sided,
        monotone,
        newton_iterations: runs.iter().map(|r| r.stats.newton_iterations).collect(),
    };
    Ok(StrongLimit { report, runs })
}

/// Re-solves `run` on the refined grid, started from its interpolation.
pub fn refine_run(run: &WeakSingularityRun, opts: &WeakOptions) -> Result<WeakSingularityRun> {
    let fine = run.grid().refined();
    let attempt = WeakOptions {
        start: Some(transferred_start(run, &fine)),
        closure: Some(run.closure),
        ..opts.clone()
    };
    solve_weak_with(run.k, &run.hp, run.q, &fine, &attempt)
}

/// The scaling `T_ℓ u(r, φ) = ℓ^s u(ℓ r, φ)` of nodal values on `g`,
/// interpolated linearly in `ln r`; nodes with `ℓ r` off the grid are `NaN`.
pub fn rescale(g: &AxiGrid, values: &[f64], ell: f64, sing_exp: f64) -> Vec<f64> {
    let (nr, m) = (g.radial_len(), g.angular_len());
    let x = g.log_radii();
    let (first, last) = (x[0], x[nr - 1]);
    let factor = ell.powf(sing_exp);
    let mut out = vec![f64::NAN; g.len()];
    for j in 0..nr {
        let t = x[j] + ell.ln();
        if t < first - 1e-12 || t > last + 1e-12 {
            continue;
        }
        let (lo, f) = g.locate(t);
        for i in 0..m {
            let a = values[lo * m + i];
            let b = values[(lo + 1) * m + i];
            out[j * m + i] = factor * ((1.0 - f) * a + f * b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularMesh;

    fn hp() -> HardyParams {
        HardyParams::new(3, 0.25).unwrap()
    }

    #[test]
    fn ladders_are_validated() {
        let g = AxiGrid::new(1e-3, 21, AngularMesh::chebyshev(11).unwrap()).unwrap();
        let o = StrongLimitOptions::default();
        for bad in [vec![1.0, 10.0, 100.0], vec![1.0, 10.0, 5.0, 1e4], vec![1.0, 2.0, 3.0, 4.0]] {
            assert!(matches!(strong_limit(&hp(), 1.2, &g, &bad, &o), Err(Error::Input(_))));
        }
        assert!(matches!(
            strong_limit(&hp(), 1.45, &g, &[1.0, 10.0, 100.0, 1e3], &o),
            Err(Error::Supercritical { .. })
        ));
    }

    #[test]
    fn unresolved_layer_refused() {
        let g = AxiGrid::graded(1e-10, 0.02, 5e-6, AngularMesh::chebyshev(11).unwrap()).unwrap();
        let o = StrongLimitOptions::default();
        match strong_limit(&hp(), 1.3, &g, &[1e10, 1e11, 1e12, 1e13], &o) {
            Err(Error::Input(msg)) => assert!(msg.contains("boundary layer")),
            other => panic!("{:?}", other.err()),
        }
        assert!(check_layer(&g, 1.2, 1e17).is_ok());
    }

    #[test]
    fn separable_profile_has_unit_bound() {
        let g = AxiGrid::new(1e-3, 41, AngularMesh::chebyshev(21).unwrap()).unwrap();
        let s = 4.0;
        let f = SolutionField::from_fn(&g, |r, p| (r * p.cos().max(0.0)).powf(0.5) * r.powf(-s - 0.5)).unwrap();
        let b = two_sided_bound(&f, 0.5, s, (0.02, 0.5)).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9);
        assert!(bound_stability(&b, &b).stable);
    }

    #[test]
    fn scaling_is_a_group_action() {
        let g = AxiGrid::new(1e-3, 61, AngularMesh::chebyshev(11).unwrap()).unwrap();
        let h = g.log_step();
        let s = 4.0;
        let f = SolutionField::from_fn(&g, |r, p| r.powf(-1.3) * (1.0 + p.cos() * r)).unwrap();
        for ell in [(2.0 * h).exp(), 1.37] {
            let once = rescale(&g, &f.values, ell, s);
            let twice = rescale(&g, &once, ell, s);
            let square = rescale(&g, &f.values, ell * ell, s);
            let tol = if ell == 1.37 { 5e-2 } else { 1e-12 };
            for (a, b) in twice.iter().zip(&square) {
                if a.is_finite() && b.is_finite() {
                    assert!((a - b).abs() <= tol * b.abs(), "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn separable_profile_is_scale_invariant() {
        let g = AxiGrid::new(1e-3, 41, AngularMesh::chebyshev(11).unwrap()).unwrap();
        let s = 4.0;
        let f = SolutionField::from_fn(&g, |r, p| r.powf(-s) * p.cos()).unwrap();
        let t = rescale(&g, &f.values, 0.5, s);
        for (a, b) in t.iter().zip(&f.values) {
            if a.is_finite() {
                assert!((a - b).abs() <= 1e-2 * b.abs() + 1e-12);
            }
        }
    }
}
