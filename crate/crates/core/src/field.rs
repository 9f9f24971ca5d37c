//! Piecewise-affine vector fields with free per-cell offsets: the discrete
//! SBV class. On a cell `T` the field is `u(x) = G_T x + b_T` in global
//! coordinates, with values in ℝ³. In 2D the third column of `G_T` is zero.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::densities::SurfaceDensity;
use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::mesh::Mesh;

/// Jump `u⁺ − u⁻` across one interior face, sampled at the face vertices.
#[derive(Clone, Debug)]
pub struct JumpRecord {
    pub face: usize,
    pub points: Vec<Point>,
    pub values: Vec<Vector3<f64>>,
    pub normal: Vector3<f64>,
    pub measure: f64,
}

impl JumpRecord {
    /// Jump at the face centroid (equals the face average).
    pub fn mean(&self) -> Vector3<f64> {
        self.values.iter().sum::<Vector3<f64>>() / self.values.len() as f64
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }
}

/// Prescribed boundary values.
#[derive(Clone, Debug, PartialEq)]
pub enum Datum {
    /// `x ↦ A x + b`.
    Affine { a: Matrix3<f64>, b: Vector3<f64> },
    /// `γ_{λ,η}`: `λ` where `x·η ≥ 0`, `0` elsewhere. `eta` is lifted to ℝ³.
    Step { lambda: Vector3<f64>, eta: Vector3<f64> },
}

impl Datum {
    pub fn zero() -> Self {
        Datum::Affine {
            a: Matrix3::zeros(),
            b: Vector3::zeros(),
        }
    }

    pub fn linear(a: Matrix3<f64>) -> Self {
        Datum::Affine {
            a,
            b: Vector3::zeros(),
        }
    }

    pub fn step(lambda: Vector3<f64>, eta: &[f64]) -> Result<Self> {
        crate::mesh::check_unit(eta)?;
        Ok(Datum::Step {
            lambda,
            eta: crate::mesh::lift(eta),
        })
    }

    pub fn eval(&self, x: &Point) -> Vector3<f64> {
        match self {
            Datum::Affine { a, b } => a * x + b,
            Datum::Step { lambda, eta } => {
                if x.dot(eta) >= 0.0 {
                    *lambda
                } else {
                    Vector3::zeros()
                }
            }
        }
    }

    pub(crate) fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if let Datum::Step { eta, .. } = self {
            if (eta - mesh.orientation()).norm() > 1e-12 {
                let dim = mesh.dimension();
                return Err(Error::OrientationMismatch {
                    datum: eta.iter().take(dim).copied().collect(),
                    mesh: mesh.orientation_vec(),
                });
            }
        }
        Ok(())
    }

    /// Splits a boundary face into pieces on which the datum is affine.
    /// Each piece is returned with its points and the datum's affine data.
    pub(crate) fn pieces(
        &self,
        mesh: &Mesh,
        vertices: &[usize],
    ) -> Vec<(Vec<Point>, Matrix3<f64>, Vector3<f64>)> {
        let pts = mesh.face_points(vertices);
        match self {
            Datum::Affine { a, b } => vec![(pts, *a, *b)],
            Datum::Step { lambda, .. } => {
                // The step is aligned with the first local axis, so the
                // level function is read off the exact local coordinates.
                let s: Vec<f64> = vertices.iter().map(|&v| mesh.local_vertex(v).x).collect();
                let zero = Matrix3::zeros();
                if s.iter().all(|&v| v >= 0.0) {
                    return vec![(pts, zero, *lambda)];
                }
                if s.iter().all(|&v| v <= 0.0) {
                    return vec![(pts, zero, Vector3::zeros())];
                }
                let (p, _) = geometry::clip(&pts, &s, &s, true);
                let (q, _) = geometry::clip(&pts, &s, &s, false);
                vec![(p, zero, *lambda), (q, zero, Vector3::zeros())]
            }
        }
    }
}

/// Residual of the SBV Gauss–Green identity
/// `∫_S [u]⊗ν + ∫ ∇u − ∫_∂ u⊗ν_out`, one row per target component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussGreen {
    pub tensor: Matrix3<f64>,
    pub dimension: usize,
}

impl GaussGreen {
    /// Residual of the divergence form for the planar (`dim` first) components.
    pub fn divergence(&self) -> f64 {
        (0..self.dimension).map(|i| self.tensor[(i, i)]).sum()
    }

    /// Residual vector per target component: `|row_i|_∞` for i = 1..3.
    pub fn per_component(&self) -> Vector3<f64> {
        Vector3::from_fn(|i, _| self.tensor.row(i).amax())
    }

    pub fn max_norm(&self) -> f64 {
        self.tensor.amax().max(self.divergence().abs())
    }
}

#[derive(Clone, Debug)]
pub struct SbvField {
    mesh: Arc<Mesh>,
    gradients: Vec<Matrix3<f64>>,
    offsets: Vec<Vector3<f64>>,
}

impl SbvField {
    pub fn new(
        mesh: Arc<Mesh>,
        gradients: Vec<Matrix3<f64>>,
        offsets: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        let expected = mesh.num_cells();
        for got in [gradients.len(), offsets.len()] {
            if got != expected {
                return Err(Error::CellCount { expected, got });
            }
        }
        let mut gradients = gradients;
        if mesh.dimension() == 2 {
            for g in &mut gradients {
                g.set_column(2, &Vector3::zeros());
            }
        }
        Ok(Self {
            mesh,
            gradients,
            offsets,
        })
    }

    pub fn from_fn(
        mesh: Arc<Mesh>,
        mut f: impl FnMut(usize) -> (Matrix3<f64>, Vector3<f64>),
    ) -> Self {
        let (gradients, offsets) = (0..mesh.num_cells()).map(&mut f).unzip();
        Self::new(mesh, gradients, offsets).expect("one entry per cell")
    }

    /// The globally affine field `x ↦ A x + b`.
    pub fn affine(mesh: Arc<Mesh>, a: Matrix3<f64>, b: Vector3<f64>) -> Self {
        Self::from_fn(mesh, |_| (a, b))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn gradients(&self) -> &[Matrix3<f64>] {
        &self.gradients
    }

    pub fn offsets(&self) -> &[Vector3<f64>] {
        &self.offsets
    }

    pub fn gradient(&self, cell: usize) -> &Matrix3<f64> {
        &self.gradients[cell]
    }

    pub fn offset(&self, cell: usize) -> &Vector3<f64> {
        &self.offsets[cell]
    }

    pub fn eval_in(&self, cell: usize, x: &Point) -> Vector3<f64> {
        self.gradients[cell] * x + self.offsets[cell]
    }

    pub fn eval(&self, x: &Point) -> Option<Vector3<f64>> {
        self.mesh.locate(x).map(|c| self.eval_in(c, x))
    }

    /// Largest entry magnitude of the affine data.
    pub fn scale(&self) -> f64 {
        let g = self.gradients.iter().map(|g| g.amax()).fold(0.0, f64::max);
        let b = self.offsets.iter().map(|b| b.amax()).fold(0.0, f64::max);
        g.max(b)
    }

    pub fn jump_on(&self, face: usize) -> JumpRecord {
        let f = &self.mesh.interior_faces()[face];
        let points = self.mesh.face_points(&f.vertices);
        let values = points
            .iter()
            .map(|p| self.eval_in(f.plus, p) - self.eval_in(f.minus, p))
            .collect();
        JumpRecord {
            face,
            points,
            values,
            normal: f.normal,
            measure: f.measure,
        }
    }

    /// One record per interior face with a nonzero jump.
    pub fn jumps(&self) -> Vec<JumpRecord> {
        (0..self.mesh.interior_faces().len())
            .map(|i| self.jump_on(i))
            .filter(|r| r.values.iter().any(|v| *v != Vector3::zeros()))
            .collect()
    }

    /// `Σ_T |T| G_T`.
    pub fn average_gradient(&self) -> Matrix3<f64> {
        self.mesh
            .cells()
            .iter()
            .zip(&self.gradients)
            .map(|(c, g)| g * c.measure)
            .sum()
    }

    /// `∫_∂ Σ_i |u_i − datum_i|`, integrated exactly.
    pub fn boundary_trace_gap(&self, datum: &Datum) -> Result<f64> {
        datum.check_mesh(&self.mesh)?;
        let mut total = 0.0;
        for face in self.mesh.boundary_faces() {
            let (g, b) = (&self.gradients[face.cell], &self.offsets[face.cell]);
            for (pts, da, db) in datum.pieces(&self.mesh, &face.vertices) {
                let diff: Vec<Vector3<f64>> =
                    pts.iter().map(|p| (g - da) * p + (b - db)).collect();
                for i in 0..3 {
                    let vals: Vec<f64> = diff.iter().map(|d| d[i]).collect();
                    total += geometry::integrate_abs_affine(&pts, &vals);
                }
            }
        }
        Ok(total)
    }

    /// `∫_S h([u], ν)`, plus `∫_∂ h(datum − u, ν_out)` when a datum is given,
    /// each face integrated with the density's own rule (exact for built-ins).
    pub fn interfacial_energy(&self, h: &dyn SurfaceDensity, datum: Option<&Datum>) -> Result<f64> {
        let mesh = &*self.mesh;
        let mut total = 0.0;
        for f in mesh.interior_faces() {
            let pts = mesh.face_points(&f.vertices);
            let jumps: Vec<Vector3<f64>> = pts
                .iter()
                .map(|p| self.eval_in(f.plus, p) - self.eval_in(f.minus, p))
                .collect();
            total += h.integrate(&pts, &jumps, &f.normal);
        }
        if let Some(datum) = datum {
            datum.check_mesh(mesh)?;
            for f in mesh.boundary_faces() {
                for (pts, da, db) in datum.pieces(mesh, &f.vertices) {
                    let jumps: Vec<Vector3<f64>> = pts
                        .iter()
                        .map(|p| (da * p + db) - self.eval_in(f.cell, p))
                        .collect();
                    total += h.integrate(&pts, &jumps, &f.normal);
                }
            }
        }
        Ok(total)
    }

    /// `∫ |[u]·ν|` with every face integral replaced by its vertex
    /// (trapezoid) rule; an upper bound for the exact value by convexity.
    pub fn trapezoid_energy(&self, datum: Option<&Datum>) -> Result<f64> {
        let mesh = &*self.mesh;
        let rule = |pts: &[Point], vals: &[f64]| -> f64 {
            geometry::overestimate_weights(pts)
                .iter()
                .zip(vals)
                .map(|(w, v)| w * v.abs())
                .sum()
        };
        let mut total = 0.0;
        for f in mesh.interior_faces() {
            let pts = mesh.face_points(&f.vertices);
            let vals: Vec<f64> = pts
                .iter()
                .map(|p| (self.eval_in(f.plus, p) - self.eval_in(f.minus, p)).dot(&f.normal))
                .collect();
            total += rule(&pts, &vals);
        }
        if let Some(datum) = datum {
            datum.check_mesh(mesh)?;
            for f in mesh.boundary_faces() {
                for (pts, da, db) in datum.pieces(mesh, &f.vertices) {
                    let vals: Vec<f64> = pts
                        .iter()
                        .map(|p| ((da * p + db) - self.eval_in(f.cell, p)).dot(&f.normal))
                        .collect();
                    total += rule(&pts, &vals);
                }
            }
        }
        Ok(total)
    }

    pub fn gauss_green_residual(&self) -> GaussGreen {
        let mesh = &*self.mesh;
        let mut r = self.average_gradient();
        for f in mesh.interior_faces() {
            let c = geometry::centroid(&mesh.face_points(&f.vertices));
            let jump = self.eval_in(f.plus, &c) - self.eval_in(f.minus, &c);
            r += jump * f.normal.transpose() * f.measure;
        }
        for f in mesh.boundary_faces() {
            let c = geometry::centroid(&mesh.face_points(&f.vertices));
            r -= self.eval_in(f.cell, &c) * f.normal.transpose() * f.measure;
        }
        GaussGreen {
            tensor: r,
            dimension: mesh.dimension(),
        }
    }
}
