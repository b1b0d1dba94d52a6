//! Model-domain fields, the discrete `−L_μ`, the half-space Martin kernel,
//! Rayleigh quotients and weak-`L^p` tail estimates.

mod grid;
mod operator;
mod rayleigh;
mod tail;

pub use grid::{sci, AxiGrid, Gradient, GridDescriptor, SolutionField};
pub use operator::{
    interior_nodes, lmu_apply, martin_exponent, martin_field, martin_halfspace, solve_linear_lmu, solve_linear_lmu_with,
    InnerClosure,
};
pub use rayleigh::{rayleigh_lambda, RayleighReport};
pub use tail::{weak_tail, WeakNormReport};

pub(crate) use operator::{from_kernel_ratio, KernelStencil};
