//! Graded meshes on the polar angle `φ ∈ [0, π/2]` and the weighted
//! finite-volume stencil shared by the hemisphere and model-domain solvers.
//!
//! Unknowns are regularized as `v = u / cos^α φ`. After the ground-state
//! transform the angular operator reads `(sin^{N−2} cos^{2α} v')'`, whose
//! weight vanishes at both ends: the pole symmetry and the boundary behaviour
//! `u ≍ cos^α φ` become natural (zero-flux) conditions.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::angular_weight;

/// How nodes are distributed on `[0, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grading {
    /// `φ_i = (π/2)·sin(π i / (2(M−1)))`: uniform at the pole, clustered
    /// quadratically toward the boundary `φ = π/2`.
    Chebyshev,
}

/// Strictly increasing nodes with `φ_0 = 0` and `φ_{M−1} = π/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularMesh {
    nodes: Vec<f64>,
    grading: Grading,
}

pub const DEFAULT_ANGULAR_NODES: usize = 400;
const MIN_NODES: usize = 5;

impl AngularMesh {
    pub fn chebyshev(m: usize) -> Result<Self> {
        if m < MIN_NODES {
            return Err(Error::input(format!(
                "angular mesh needs at least {MIN_NODES} nodes, got {m}"
            )));
        }
        let last = (m - 1) as f64;
        let mut nodes: Vec<f64> = (0..m)
            .map(|i| FRAC_PI_2 * (FRAC_PI_2 * i as f64 / last).sin())
            .collect();
        nodes[m - 1] = FRAC_PI_2;
        Ok(Self {
            nodes,
            grading: Grading::Chebyshev,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    /// Mesh with `2M − 1` nodes containing every node of `self`.
    pub fn refined(&self) -> Self {
        match self.grading {
            Grading::Chebyshev => Self::chebyshev(2 * self.len() - 1).expect("refinement grows the mesh"),
        }
    }

    /// `cos φ_i`, exactly zero at the boundary node.
    pub fn cosines(&self) -> Vec<f64> {
        let m = self.len();
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, p)| if i + 1 == m { 0.0 } else { p.cos() })
            .collect()
    }
}

/// Precomputed weights of the weighted finite-volume discretization.
#[derive(Debug, Clone)]
pub(crate) struct AngularFv {
    pub phi: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    /// `sin^{N−2} cos^{2α}` at face `i + ½`, divided by the node gap.
    pub face: Vec<f64>,
    /// `∫_cell sin^{N−2} cos^{2α}`.
    pub mass: Vec<f64>,
    /// First-derivative coefficients `(w_{i−1}, w_i, w_{i+1})` at each node.
    pub deriv: Vec<[f64; 3]>,
    pub n_dim: usize,
}

impl AngularFv {
    pub fn new(mesh: &AngularMesh, n_dim: usize, alpha: f64) -> Self {
        let phi = mesh.nodes().to_vec();
        let m = phi.len();
        let cos = mesh.cosines();
        let sin: Vec<f64> = phi.iter().map(|p| p.sin()).collect();
        let faces = face_positions(&phi);
        let face = (0..m - 1)
            .map(|i| {
                let f = 0.5 * (phi[i] + phi[i + 1]);
                f.sin().powi(n_dim as i32 - 2) * f.cos().powf(2.0 * alpha) / (phi[i + 1] - phi[i])
            })
            .collect();
        let mass = cell_weights(&faces, n_dim, 2.0 * alpha);
        let deriv = derivative_weights(&phi);
        Self {
            phi,
            cos,
            sin,
            face,
            mass,
            deriv,
            n_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    /// `∫_cell sin^{N−2} cos^β` for every cell.
    pub fn weights(&self, beta: f64) -> Vec<f64> {
        cell_weights(&face_positions(&self.phi), self.n_dim, beta)
    }

    /// Angular flux divergence `Σ faces` applied to `v` at node `i`.
    #[inline]
    pub fn flux_div(&self, v: &[f64], i: usize) -> f64 {
        let mut acc = 0.0;
        if i + 1 < self.len() {
            acc += self.face[i] * (v[i + 1] - v[i]);
        }
        if i > 0 {
            acc -= self.face[i - 1] * (v[i] - v[i - 1]);
        }
        acc
    }

    /// Centered first derivative of `v` at node `i`.
    #[inline]
    pub fn derivative(&self, v: &[f64], i: usize) -> f64 {
        let [a, b, c] = self.deriv[i];
        let m = self.len();
        if i == 0 {
            0.0
        } else if i + 1 == m {
            a * v[i - 2] + b * v[i - 1] + c * v[i]
        } else {
            a * v[i - 1] + b * v[i] + c * v[i + 1]
        }
    }

    /// Column offsets matching [`Self::derivative`]'s coefficients.
    #[inline]
    pub fn derivative_columns(&self, i: usize) -> [usize; 3] {
        if i + 1 == self.len() {
            [i - 2, i - 1, i]
        } else if i == 0 {
            [0, 0, 1]
        } else {
            [i - 1, i, i + 1]
        }
    }
}

fn face_positions(phi: &[f64]) -> Vec<f64> {
    let m = phi.len();
    let mut f = Vec::with_capacity(m + 1);
    f.push(0.0);
    for i in 0..m - 1 {
        f.push(0.5 * (phi[i] + phi[i + 1]));
    }
    f.push(FRAC_PI_2);
    f
}

fn cell_weights(faces: &[f64], n_dim: usize, beta: f64) -> Vec<f64> {
    faces
        .windows(2)
        .map(|w| angular_weight(w[0], w[1], n_dim, beta))
        .collect()
}

/// Three-point derivative weights on a nonuniform mesh. The pole row is zero
/// (even symmetry); the boundary row is the one-sided backward formula.
fn derivative_weights(x: &[f64]) -> Vec<[f64; 3]> {
    let m = x.len();
    let mut out = vec![[0.0; 3]; m];
    for (i, w) in out.iter_mut().enumerate().take(m - 1).skip(1) {
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        *w = [
            -hp / (hm * (hm + hp)),
            (hp - hm) / (hm * hp),
            hm / (hp * (hm + hp)),
        ];
    }
    let h1 = x[m - 1] - x[m - 2];
    let h2 = x[m - 2] - x[m - 3];
    out[m - 1] = [
        h1 / (h2 * (h1 + h2)),
        -(h1 + h2) / (h1 * h2),
        (2.0 * h1 + h2) / (h1 * (h1 + h2)),
    ];
    out
}

/// Quadratic extrapolation of `f` from the three nodes before the last to
/// the last node of `x`.
pub(crate) fn extrapolate_last(x: &[f64], f: &[f64]) -> f64 {
    let m = x.len();
    let (x1, x2, x3) = (x[m - 2], x[m - 3], x[m - 4]);
    let xe = x[m - 1];
    let l1 = (xe - x2) * (xe - x3) / ((x1 - x2) * (x1 - x3));
    let l2 = (xe - x1) * (xe - x3) / ((x2 - x1) * (x2 - x3));
    let l3 = (xe - x1) * (xe - x2) / ((x3 - x1) * (x3 - x2));
    l1 * f[m - 2] + l2 * f[m - 3] + l3 * f[m - 4]
}

/// `u / cos^α φ` on one angular row, extended to `φ = π/2` by
/// [`extrapolate_last`].
pub(crate) fn regularize(x: &[f64], cos: &[f64], alpha: f64, u: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut v: Vec<f64> = (0..m - 1).map(|i| u[i] / cos[i].powf(alpha)).collect();
    v.push(0.0);
    v[m - 1] = extrapolate_last(x, &v);
    v
}

/// Nonuniform three-point second derivative at interior node `i`.
pub(crate) fn second_derivative(x: &[f64], f: &[f64], i: usize) -> f64 {
    let hm = x[i] - x[i - 1];
    let hp = x[i + 1] - x[i];
    2.0 * (hm * f[i + 1] - (hm + hp) * f[i] + hp * f[i - 1]) / (hm * hp * (hm + hp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mesh_shape() {
        let m = AngularMesh::chebyshev(50).unwrap();
        let x = m.nodes();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[49], FRAC_PI_2);
        let gaps: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.iter().all(|g| *g > 0.0));
        assert!(gaps.windows(2).all(|g| g[1] < g[0]), "spacing shrinks toward π/2");
        assert!(AngularMesh::chebyshev(3).is_err());
    }

    #[test]
    fn refinement_is_nested() {
        let m = AngularMesh::chebyshev(21).unwrap();
        let r = m.refined();
        assert_eq!(r.len(), 41);
        for (i, p) in m.nodes().iter().enumerate() {
            assert_relative_eq!(r.nodes()[2 * i], *p, epsilon = 1e-15);
        }
    }

    #[test]
    fn masses_sum_to_total() {
        let mesh = AngularMesh::chebyshev(30).unwrap();
        let fv = AngularFv::new(&mesh, 3, 0.5);
        // ∫_0^{π/2} sin φ cos φ dφ = 1/2.
        assert_relative_eq!(fv.mass.iter().sum::<f64>(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn derivative_is_exact_for_quadratics() {
        let mesh = AngularMesh::chebyshev(17).unwrap();
        let fv = AngularFv::new(&mesh, 3, 0.5);
        let f: Vec<f64> = fv.phi.iter().map(|p| 1.0 + 2.0 * p + 3.0 * p * p).collect();
        for i in 1..17 {
            assert_relative_eq!(fv.derivative(&f, i), 2.0 + 6.0 * fv.phi[i], epsilon = 1e-9);
        }
        for i in 1..16 {
            assert_relative_eq!(second_derivative(&fv.phi, &f, i), 6.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn constants_carry_no_flux() {
        let mesh = AngularMesh::chebyshev(12).unwrap();
        let fv = AngularFv::new(&mesh, 4, 0.7);
        let v = vec![3.0; 12];
        for i in 0..12 {
            assert_eq!(fv.flux_div(&v, i), 0.0);
        }
    }
}
