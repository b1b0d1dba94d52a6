//! The axisymmetric model half-ball `{|x| < 1, x_N > 0}` in polar form
//! `(r, φ)`, with `φ` measured from the inner normal `e_N` and `δ = r cos φ`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::angular::{AngularFv, AngularMesh};
use crate::error::{Error, Result};

/// Tensor grid: radii in `[r_min, 1]`, uniform in `ln r` away from `r = 1`
/// and optionally refined geometrically towards it, times an angular mesh.
/// Node `(j, i)` is stored at `j·M + i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiGrid {
    r: Vec<f64>,
    #[serde(skip)]
    x: Vec<f64>,
    mesh: AngularMesh,
    #[serde(skip)]
    cos: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridDescriptor {
    pub r_min: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    /// Largest spacing in `ln r`.
    pub log_step: f64,
    /// Smallest spacing in `ln r`, attained at `r = 1` on graded grids.
    pub min_log_step: f64,
}

/// Growth factor of consecutive spacings in the graded zone.
pub const GRADING_RATIO: f64 = 1.1;

/// Finite-difference weights on three nodes `xs` at the point `t`:
/// `(first derivative, second derivative)`.
pub(crate) fn fd3(xs: [f64; 3], t: f64) -> ([f64; 3], [f64; 3]) {
    let mut d1 = [0.0; 3];
    let mut d2 = [0.0; 3];
    for k in 0..3 {
        let (a, b) = (xs[(k + 1) % 3], xs[(k + 2) % 3]);
        let den = (xs[k] - a) * (xs[k] - b);
        d1[k] = ((t - a) + (t - b)) / den;
        d2[k] = 2.0 / den;
    }
    (d1, d2)
}

fn check_r_min(r_min: f64) -> Result<()> {
    if !(r_min > 0.0 && r_min < 1.0) {
        return Err(Error::Domain {
            name: "r_min",
            value: r_min,
            interval: "(0, 1)",
        });
    }
    Ok(())
}

impl AxiGrid {
    /// `radial` nodes `r_j = r_min^{1 − j/(J−1)}`.
    pub fn new(r_min: f64, radial: usize, mesh: AngularMesh) -> Result<Self> {
        check_r_min(r_min)?;
        if radial < 3 {
            return Err(Error::input(format!("need at least 3 radial nodes, got {radial}")));
        }
        let x0 = r_min.ln();
        let h = -x0 / (radial - 1) as f64;
        let x: Vec<f64> = (0..radial)
            .map(|j| if j + 1 == radial { 0.0 } else { x0 + h * j as f64 })
            .collect();
        Ok(Self::from_log_radii(x, mesh))
    }

    /// Spacing at most `log_step` in `ln r`, shrinking by [`GRADING_RATIO`]
    /// per node towards `r = 1` down to `outer_step` there.
    pub fn graded(r_min: f64, log_step: f64, outer_step: f64, mesh: AngularMesh) -> Result<Self> {
        check_r_min(r_min)?;
        if !(outer_step > 0.0 && outer_step <= log_step && log_step.is_finite()) {
            return Err(Error::input(format!(
                "need 0 < outer step {outer_step} ≤ log step {log_step}"
            )));
        }
        let span = -r_min.ln();
        let mut graded = Vec::new();
        let mut step = outer_step;
        let mut used = 0.0;
        while step < log_step && used + step < 0.5 * span {
            graded.push(step);
            used += step;
            step *= GRADING_RATIO;
        }
        let uniform = ((span - used) / log_step).ceil().max(2.0) as usize;
        let hu = (span - used) / uniform as f64;
        let mut x = Vec::with_capacity(uniform + graded.len() + 1);
        let x0 = r_min.ln();
        for j in 0..=uniform {
            x.push(x0 + hu * j as f64);
        }
        let mut at = x0 + span - used;
        for s in graded.iter().rev() {
            at += s;
            x.push(at);
        }
        *x.last_mut().expect("nonempty") = 0.0;
        if graded.is_empty() {
            x[uniform] = 0.0;
        }
        Ok(Self::from_log_radii(x, mesh))
    }

    fn from_log_radii(x: Vec<f64>, mesh: AngularMesh) -> Self {
        let r = x.iter().map(|v| v.exp()).collect();
        let cos = mesh.cosines();
        Self { r, x, mesh, cos }
    }

    /// Both directions refined by inserting midpoints; every old node is kept.
    pub fn refined(&self) -> Self {
        let mut x = Vec::with_capacity(2 * self.x.len() - 1);
        for w in self.x.windows(2) {
            x.push(w[0]);
            x.push(0.5 * (w[0] + w[1]));
        }
        x.push(0.0);
        Self::from_log_radii(x, self.mesh.refined())
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            r_min: self.r_min(),
            radial_nodes: self.radial_len(),
            angular_nodes: self.angular_len(),
            log_step: self.log_step(),
            min_log_step: self.x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    /// `ln r_j`.
    pub fn log_radii(&self) -> &[f64] {
        &self.x
    }

    /// Largest spacing in `ln r`.
    pub fn log_step(&self) -> f64 {
        self.x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// `x_{j+1} − x_j`.
    #[inline]
    pub fn spacing(&self, j: usize) -> f64 {
        self.x[j + 1] - self.x[j]
    }

    /// Rows and weights of the three-point first and second `ln r`
    /// derivatives at row `j`; one-sided on the first and last rows.
    pub(crate) fn radial_fd(&self, j: usize) -> ([usize; 3], [f64; 3], [f64; 3]) {
        let n = self.x.len();
        let c = j.clamp(1, n - 2);
        let rows = [c - 1, c, c + 1];
        let (d1, d2) = fd3([self.x[c - 1], self.x[c], self.x[c + 1]], self.x[j]);
        (rows, d1, d2)
    }

    /// Fractional row position of `ln r = t`, clamped to the grid.
    pub(crate) fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.x.len();
        if t <= self.x[0] {
            return (0, 0.0);
        }
        if t >= self.x[n - 1] {
            return (n - 2, 1.0);
        }
        let k = self.x.partition_point(|v| *v <= t) - 1;
        let k = k.min(n - 2);
        (k, (t - self.x[k]) / (self.x[k + 1] - self.x[k]))
    }

    pub fn mesh(&self) -> &AngularMesh {
        &self.mesh
    }

    pub fn angles(&self) -> &[f64] {
        self.mesh.nodes()
    }

    /// `cos φ_i`, exactly zero on the flat boundary.
    pub fn cosines(&self) -> &[f64] {
        &self.cos
    }

    pub fn radial_len(&self) -> usize {
        self.r.len()
    }

    pub fn angular_len(&self) -> usize {
        self.mesh.len()
    }

    pub fn len(&self) -> usize {
        self.radial_len() * self.angular_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.angular_len() + i
    }

    /// Distance to the flat boundary, `r cos φ`.
    #[inline]
    pub fn delta(&self, j: usize, i: usize) -> f64 {
        self.r[j] * self.cos[i]
    }

    /// Same grid, or equal up to rounding.
    pub fn same_as(&self, other: &Self) -> bool {
        self.radial_len() == other.radial_len()
            && self.mesh == other.mesh
            && self.x.iter().zip(&other.x).all(|(a, b)| (a - b).abs() <= 1e-14 * (1.0 + a.abs()))
    }

    /// Trapezoid weights in `x = ln r`.
    pub(crate) fn radial_weights(&self) -> Vec<f64> {
        let n = self.radial_len();
        (0..n)
            .map(|j| {
                let lo = if j > 0 { self.spacing(j - 1) } else { 0.0 };
                let hi = if j + 1 < n { self.spacing(j) } else { 0.0 };
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// `(∫_{cell} δ^γ dx)` per node, up to the constant area of `S^{N−2}`.
    pub fn cell_volumes(&self, n_dim: usize, gamma: f64) -> Vec<f64> {
        let fv = AngularFv::new(&self.mesh, n_dim, 0.5);
        let ang = fv.weights(gamma);
        let rw = self.radial_weights();
        let mut out = Vec::with_capacity(self.len());
        for (j, r) in self.r.iter().enumerate() {
            let radial = r.powf(n_dim as f64 + gamma) * rw[j];
            out.extend(ang.iter().map(|a| radial * a));
        }
        out
    }
}

/// Radial and normalized angular gradient components `(u_r, r^{−1} u_φ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gradient {
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

/// Scalar field on an [`AxiGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionField {
    pub grid: AxiGrid,
    pub values: Vec<f64>,
    pub gradient: Option<Gradient>,
}

impl SolutionField {
    pub fn new(grid: AxiGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::input(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value at node {k}")));
        }
        Ok(Self {
            grid,
            values,
            gradient: None,
        })
    }

    /// Samples `f(r, φ)` at every node.
    pub fn from_fn(grid: &AxiGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for r in grid.radii() {
            values.extend(grid.angles().iter().map(|p| f(*r, *p)));
        }
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &AxiGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
            gradient: None,
        }
    }

    #[inline]
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[self.grid.index(j, i)]
    }

    /// Values on the radial row `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        let m = self.grid.angular_len();
        &self.values[j * m..(j + 1) * m]
    }

    /// Attaches centered-difference gradients, one-sided (second order) on
    /// the grid edges and zero angular derivative on the axis.
    pub fn with_gradient(mut self) -> Self {
        let g = &self.grid;
        let (nr, m) = (g.radial_len(), g.angular_len());
        let fv = AngularFv::new(g.mesh(), 3, 0.5);
        let u = &self.values;
        let mut radial = vec![0.0; g.len()];
        let mut angular = vec![0.0; g.len()];
        for j in 0..nr {
            let r = g.radii()[j];
            let (rows, d1, _) = g.radial_fd(j);
            for i in 0..m {
                let ux: f64 = (0..3).map(|k| d1[k] * u[rows[k] * m + i]).sum();
                let k = j * m + i;
                radial[k] = ux / r;
                angular[k] = fv.derivative(&u[j * m..(j + 1) * m], i) / r;
            }
        }
        self.gradient = Some(Gradient { radial, angular });
        self
    }

    /// `|∇u|` per node; computes the gradient first if absent.
    pub fn gradient_magnitude(&self) -> SolutionField {
        let with = if self.gradient.is_some() {
            None
        } else {
            Some(self.clone().with_gradient())
        };
        let src = with.as_ref().unwrap_or(self);
        let g = src.gradient.as_ref().expect("gradient attached");
        let values = g.radial.iter().zip(&g.angular).map(|(a, b)| a.hypot(*b)).collect();
        SolutionField {
            grid: self.grid.clone(),
            values,
            gradient: None,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SolutionField {
        SolutionField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            gradient: None,
        }
    }

    /// Restriction to the nodes of a grid this one refines.
    pub fn restrict_to(&self, coarse: &AxiGrid) -> Result<SolutionField> {
        let (nf, mf) = (self.grid.radial_len(), self.grid.angular_len());
        let (nc, mc) = (coarse.radial_len(), coarse.angular_len());
        if nf != 2 * nc - 1 || mf != 2 * mc - 1 || !self.grid.same_as(&coarse.refined()) {
            return Err(Error::input("field grid is not a one-level refinement of the target grid"));
        }
        let mut values = Vec::with_capacity(coarse.len());
        for j in 0..nc {
            values.extend((0..mc).map(|i| self.at(2 * j, 2 * i)));
        }
        SolutionField::new(coarse.clone(), values)
    }

    /// Writes `r,phi,value` rows with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "phi", "value"])?;
        for (j, r) in self.grid.radii().iter().enumerate() {
            for (i, p) in self.grid.angles().iter().enumerate() {
                w.write_record([sci(*r), sci(*p), sci(self.at(j, i))])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "phi", "value"])?;
        for (j, r) in self.grid.radii().iter().enumerate() {
            for (i, p) in self.grid.angles().iter().enumerate() {
                w.write_record([sci(*r), sci(*p), sci(self.at(j, i))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> AxiGrid {
        AxiGrid::new(1e-3, 31, AngularMesh::chebyshev(21).unwrap()).unwrap()
    }

    #[test]
    fn radii_are_log_uniform() {
        let g = grid();
        let r = g.radii();
        assert_relative_eq!(r[0], 1e-3, max_relative = 1e-14);
        assert_eq!(r[30], 1.0);
        let q0 = r[1] / r[0];
        for w in r.windows(2) {
            assert_relative_eq!(w[1] / w[0], q0, max_relative = 1e-12);
        }
        assert!(AxiGrid::new(0.0, 10, AngularMesh::chebyshev(9).unwrap()).is_err());
        assert!(AxiGrid::new(1e-2, 2, AngularMesh::chebyshev(9).unwrap()).is_err());
    }

    #[test]
    fn graded_grid_shrinks_towards_the_sphere() {
        let g = AxiGrid::graded(1e-4, 0.05, 1e-4, AngularMesh::chebyshev(9).unwrap()).unwrap();
        let n = g.radial_len();
        assert_eq!(g.radii()[n - 1], 1.0);
        assert_relative_eq!(g.r_min(), 1e-4, max_relative = 1e-12);
        let d = g.descriptor();
        assert_relative_eq!(d.min_log_step, 1e-4, max_relative = 1e-6);
        assert!(d.log_step <= 0.05 + 1e-12);
        for j in 1..n - 1 {
            let q = g.spacing(j) / g.spacing(j - 1);
            assert!(q <= GRADING_RATIO + 1e-9 && q > 0.0, "{j} {q}");
        }
        let w: f64 = g.radial_weights().iter().sum();
        assert_relative_eq!(w, -(1e-4f64).ln(), max_relative = 1e-12);
    }

    #[test]
    fn three_point_weights_are_exact_for_quadratics() {
        let xs = [0.0, 0.3, 0.7];
        let f = |x: f64| 2.0 - x + 3.0 * x * x;
        for t in [0.0, 0.3, 0.7] {
            let (d1, d2) = fd3(xs, t);
            let a: f64 = (0..3).map(|k| d1[k] * f(xs[k])).sum();
            let b: f64 = (0..3).map(|k| d2[k] * f(xs[k])).sum();
            assert_relative_eq!(a, -1.0 + 6.0 * t, epsilon = 1e-12);
            assert_relative_eq!(b, 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_vanishes_on_the_flat_boundary() {
        let g = grid();
        for j in 0..g.radial_len() {
            assert_eq!(g.delta(j, 20), 0.0);
            assert!(g.delta(j, 19) > 0.0);
        }
    }

    #[test]
    fn gradient_of_linear_function() {
        // u = x_N = r cos φ: u_r = cos φ, r^{-1} u_φ = −sin φ.
        let g = grid();
        let f = SolutionField::from_fn(&g, |r, p| r * p.cos()).unwrap().with_gradient();
        let gr = f.gradient.as_ref().unwrap();
        for j in [0, 10, 30] {
            for i in [3, 10, 19] {
                let k = g.index(j, i);
                let p = g.angles()[i];
                assert_relative_eq!(gr.radial[k], p.cos(), max_relative = 3e-2);
                assert_relative_eq!(gr.angular[k], -p.sin(), max_relative = 2e-2);
            }
        }
        let mag = f.gradient_magnitude();
        assert_relative_eq!(mag.at(10, 10), 1.0, max_relative = 2e-2);
    }

    #[test]
    fn restriction_picks_shared_nodes() {
        let g = grid();
        let fine = g.refined();
        let f = SolutionField::from_fn(&fine, |r, p| r + p).unwrap();
        let c = f.restrict_to(&g).unwrap();
        for j in 0..g.radial_len() {
            for i in 0..g.angular_len() {
                assert_relative_eq!(c.at(j, i), g.radii()[j] + g.angles()[i], max_relative = 1e-12);
            }
        }
        assert!(c.restrict_to(&g).is_err());
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let g = AxiGrid::new(0.1, 3, AngularMesh::chebyshev(5).unwrap()).unwrap();
        let f = SolutionField::from_fn(&g, |r, _| 1.0 / 3.0 + r).unwrap();
        let mut buf = Vec::new();
        f.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,phi,value"));
        assert_eq!(text.lines().count(), 16);
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first[2], 1.0 / 3.0 + first[0]);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = grid();
        let mut v = vec![0.0; g.len()];
        v[7] = f64::NAN;
        assert!(SolutionField::new(g, v).is_err());
    }
}
