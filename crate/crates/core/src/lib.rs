//! Numerical laboratory for the semilinear elliptic problem
//!
//! ```text
//!     −Δu − μ/δ² u + |∇u|^q = 0
//! ```
//!
//! with a Hardy boundary potential (`0 < μ ≤ 1/4`) and gradient absorption
//! (`1 < q < 2`).
//!
//! * [`params`]: closed-form exponents and sub/supersolution constants.
//! * [`hemisphere`]: the separable profile `ω` on the upper hemisphere.
//! * [`fieldops`]: the axisymmetric model half-ball, the discrete `−L_μ`,
//!   the half-space Martin kernel, Rayleigh quotients and weak-`L^p` tails.
//! * [`bvp`]: weak and strong boundary singularities and the boundary barrier.
//! * [`capacity`]: Bessel-capacity removability criteria above `q_crit`.
//! * [`suite`]: configuration, reports and the full check suite behind the CLI.

pub mod angular;
pub mod bvp;
pub mod capacity;
pub mod error;
pub mod fieldops;
pub mod hemisphere;
pub mod linalg;
pub mod params;
pub mod quadrature;
pub mod stats;
pub mod suite;

pub use error::{Error, Result};
pub use params::{exponent_pack, ExponentPack, HardyParams};
