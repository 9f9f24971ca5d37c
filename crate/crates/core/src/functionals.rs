//! Doubly relaxed functionals on structured triples over the cross-section,
//! for the purely interfacial energy.
//!
//! The left and right path give the same integrand; both are evaluated here
//! independently, cell by cell and face by face, with exact integrals.

use nalgebra::{Matrix3, Matrix3x2, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::SbvField;
use crate::geometry;
use crate::mesh::CellShape;

/// `(ḡ, Ḡ, d̄)` on an axis-aligned rectangle mesh of `ω`.
#[derive(Clone, Debug)]
pub struct StructuredTriple {
    g: SbvField,
    big_g: Vec<Matrix3x2<f64>>,
    d: Vec<Vector3<f64>>,
}

impl StructuredTriple {
    pub fn new(g: SbvField, big_g: Vec<Matrix3x2<f64>>, d: Vec<Vector3<f64>>) -> Result<Self> {
        let mesh = g.mesh();
        if mesh.dimension() != 2 {
            return Err(Error::Dimension(mesh.dimension()));
        }
        if mesh.shape() != CellShape::Quad || mesh.orientation() != &Vector3::x() {
            return Err(Error::Invalid(
                "structured triples live on axis-aligned rectangle meshes".into(),
            ));
        }
        let expected = mesh.num_cells();
        for got in [big_g.len(), d.len()] {
            if got != expected {
                return Err(Error::CellCount { expected, got });
            }
        }
        Ok(Self { g, big_g, d })
    }

    pub fn g(&self) -> &SbvField {
        &self.g
    }

    pub fn big_g(&self) -> &[Matrix3x2<f64>] {
        &self.big_g
    }

    pub fn d(&self) -> &[Vector3<f64>] {
        &self.d
    }

    pub fn with_d(mut self, d: Vec<Vector3<f64>>) -> Result<Self> {
        if d.len() != self.d.len() {
            return Err(Error::CellCount {
                expected: self.d.len(),
                got: d.len(),
            });
        }
        self.d = d;
        Ok(self)
    }
}

/// `∫ |∂₁ḡ₁ + ∂₂ḡ₂ − Ḡ₁₁ − Ḡ₂₂| + ∫_{S(ḡ)} |[ḡ₁]ν₁ + [ḡ₂]ν₂|`.
pub fn eval_left(t: &StructuredTriple) -> f64 {
    let mesh = t.g.mesh();
    let bulk: f64 = mesh
        .cells()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (du, gg) = (t.g.gradient(i), &t.big_g[i]);
            c.measure * ((du[(0, 0)] - gg[(0, 0)]) + (du[(1, 1)] - gg[(1, 1)])).abs()
        })
        .sum();
    bulk + planar_normal_jumps(&t.g, |j, nu| j[0] * nu[0] + j[1] * nu[1])
}

/// `∫ |tr(∇ĝ − Ĝ)| + ∫_{S(ḡ)} |[ḡ₁]ν₁ + [ḡ₂]ν₂|`.
pub fn eval_right(t: &StructuredTriple) -> f64 {
    let mesh = t.g.mesh();
    let bulk: f64 = mesh
        .cells()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let hat = t.g.gradient(i).fixed_view::<2, 2>(0, 0) - t.big_g[i].fixed_view::<2, 2>(0, 0);
            c.measure * hat.trace().abs()
        })
        .sum();
    bulk + planar_normal_jumps(&t.g, |j, nu| j[0] * nu[0] + j[1] * nu[1])
}

fn planar_normal_jumps(g: &SbvField, normal_part: impl Fn(&Vector3<f64>, &Vector3<f64>) -> f64) -> f64 {
    let mesh = g.mesh();
    (0..mesh.interior_faces().len())
        .map(|i| {
            let j = g.jump_on(i);
            let vals: Vec<f64> = j.values.iter().map(|v| normal_part(v, &j.normal)).collect();
            geometry::integrate_abs_affine(&j.points, &vals)
        })
        .sum()
}

/// `∫_Ω |∂₁g₁ + ∂₂g₂ − G₁₁ − G₂₂| + ∫_{S(g)} |[g]·ν|` on a 3D mesh.
#[allow(non_snake_case)]
pub fn eval_F3dSD(g: &SbvField, g3: &[Matrix3x2<f64>]) -> Result<f64> {
    let mesh = g.mesh();
    if mesh.dimension() != 3 {
        return Err(Error::Dimension(mesh.dimension()));
    }
    if g3.len() != mesh.num_cells() {
        return Err(Error::CellCount {
            expected: mesh.num_cells(),
            got: g3.len(),
        });
    }
    let bulk: f64 = mesh
        .cells()
        .iter()
        .zip(g3)
        .enumerate()
        .map(|(i, (c, gg))| {
            let du: &Matrix3<f64> = g.gradient(i);
            c.measure * ((du[(0, 0)] - gg[(0, 0)]) + (du[(1, 1)] - gg[(1, 1)])).abs()
        })
        .sum();
    Ok(bulk + planar_normal_jumps(g, |j, nu| j.dot(nu)))
}

#[derive(Clone, Debug, Serialize)]
pub struct PathRow {
    pub left: f64,
    pub right: f64,
    pub difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathEqualityReport {
    pub rows: Vec<PathRow>,
    pub max_difference: f64,
}

impl PathEqualityReport {
    pub fn passed(&self) -> bool {
        self.max_difference == 0.0
    }
}

pub fn path_equality_report(triples: &[StructuredTriple]) -> Result<PathEqualityReport> {
    if triples.is_empty() {
        return Err(Error::Invalid("no triples given".into()));
    }
    let rows: Vec<PathRow> = triples
        .par_iter()
        .map(|t| {
            let (left, right) = (eval_left(t), eval_right(t));
            PathRow {
                left,
                right,
                difference: (left - right).abs(),
            }
        })
        .collect();
    let max_difference = rows.iter().map(|r| r.difference).fold(0.0, f64::max);
    Ok(PathEqualityReport {
        rows,
        max_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use std::sync::Arc;

    fn quad_mesh(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::uniform(2, n, &[1.0, 0.0], CellShape::Quad).unwrap())
    }

    #[test]
    fn affine_triple_vanishes() {
        let mesh = quad_mesh(3);
        let a = Matrix3::new(1.0, 2.0, 0.0, -3.0, 0.5, 0.0, 4.0, 1.0, 0.0);
        let g = SbvField::affine(mesh.clone(), a, Vector3::new(1.0, 1.0, 1.0));
        let gg = vec![a.fixed_view::<3, 2>(0, 0).into_owned(); 9];
        let t = StructuredTriple::new(g, gg, vec![Vector3::zeros(); 9]).unwrap();
        assert_eq!(eval_left(&t), 0.0);
        assert_eq!(eval_right(&t), 0.0);
    }

    #[test]
    fn trace_term_and_step() {
        let mesh = quad_mesh(2);
        let mut a = Matrix3::zeros();
        a[(0, 0)] = 1.0;
        let g = SbvField::affine(mesh.clone(), a, Vector3::zeros());
        let t = StructuredTriple::new(g, vec![Matrix3x2::zeros(); 4], vec![Vector3::zeros(); 4]).unwrap();
        assert!((eval_left(&t) - 1.0).abs() < 1e-15);

        let g = SbvField::from_fn(mesh.clone(), |i| {
            let c = mesh.cells()[i].centroid;
            (Matrix3::zeros(), if c.x > 0.0 { Vector3::x() } else { Vector3::zeros() })
        });
        let t = StructuredTriple::new(g, vec![Matrix3x2::zeros(); 4], vec![Vector3::zeros(); 4]).unwrap();
        assert!((eval_left(&t) - 1.0).abs() < 1e-15);
        assert_eq!(eval_left(&t), eval_right(&t));
    }

    #[test]
    fn cube_functional() {
        let mesh = Arc::new(Mesh::uniform(3, 2, &[1.0, 0.0, 0.0], CellShape::Hex).unwrap());
        let mut a = Matrix3::zeros();
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        let g = SbvField::affine(mesh.clone(), a, Vector3::zeros());
        let v = eval_F3dSD(&g, &vec![Matrix3x2::zeros(); 8]).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let g = SbvField::from_fn(mesh.clone(), |i| {
            let c = mesh.cells()[i].centroid;
            (Matrix3::zeros(), if c.y > 0.0 { Vector3::y() } else { Vector3::zeros() })
        });
        let v = eval_F3dSD(&g, &vec![Matrix3x2::zeros(); 8]).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mismatched_lengths() {
        let mesh = quad_mesh(2);
        let g = SbvField::affine(mesh, Matrix3::zeros(), Vector3::zeros());
        assert!(StructuredTriple::new(g, vec![Matrix3x2::zeros(); 3], vec![Vector3::zeros(); 4]).is_err());
    }
}
