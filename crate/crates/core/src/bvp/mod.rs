//! Boundary singularities of `−L_μ u + |∇u|^q = 0` at the origin of the model
//! half-ball.

mod barrier;
mod checks;
mod strong;
mod weak;

pub use crate::fieldops::InnerClosure;
pub use weak::{rescaled_start, transferred_start, solve_ladder, solve_weak, solve_weak_with, NewtonStats, WeakOptions, WeakSingularityRun};
pub use barrier::{
    barrier_residual, search_amplitude, BarrierProfile, BarrierReport, BarrierSpec, BARRIER_SAMPLES, BARRIER_TOL,
    MAX_BARRIER_RADIUS,
};
pub use checks::{
    apriori_check, apriori_stability, check_invariants, comparison_check, deficit_consistency, ratio_trace,
    AprioriReport, RatioTrace, RefinementStability, APRIORI_RADIUS, REFINEMENT_BAND, RICHARDSON_RADIUS,
};
pub use strong::{
    bound_stability, profile_errors, refine_run, rescale, strong_limit, two_sided_bound, BoundStability, ProfileSample,
    StrongLimit, StrongLimitOptions, StrongLimitReport, TwoSidedBound, INTERIOR_COS, LAYER_CELLS, MIN_DECADES, MIN_RUNGS,
    PROFILE_WINDOW,
};
