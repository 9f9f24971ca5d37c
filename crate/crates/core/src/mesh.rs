//! Meshes of the unit square `Q'`, the rotated square `Q'_η` and the rotated
//! cube `Q_ν`, all centred at the origin.
//!
//! A mesh is a tensor-product grid in a local orthonormal frame whose first
//! axis is the orientation vector, so two sides of the domain are always
//! perpendicular to it. Grid boxes may be split into two triangles (prisms in
//! 3D) along the anti-diagonal `ξ₁ + ξ₂ = const`; these splits nest under
//! `n → 2n` on uniform grids.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

pub(crate) const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellShape {
    Quad,
    Triangle,
    Hex,
    Prism,
}

impl CellShape {
    pub fn dimension(self) -> usize {
        match self {
            CellShape::Quad | CellShape::Triangle => 2,
            CellShape::Hex | CellShape::Prism => 3,
        }
    }

    pub fn default_for(dim: usize) -> Self {
        if dim == 3 {
            CellShape::Hex
        } else {
            CellShape::Quad
        }
    }

    /// The anti-diagonally split shape of the same dimension.
    pub fn split_for(dim: usize) -> Self {
        if dim == 3 {
            CellShape::Prism
        } else {
            CellShape::Triangle
        }
    }

    fn is_split(self) -> bool {
        matches!(self, CellShape::Triangle | CellShape::Prism)
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub measure: f64,
    pub centroid: Point,
}

/// Interface between `minus` and `plus`; `normal` points from `minus` to `plus`.
#[derive(Clone, Debug)]
pub struct InteriorFace {
    pub minus: usize,
    pub plus: usize,
    pub normal: Vector3<f64>,
    /// The normal in the mesh's local frame.
    pub local_normal: Vector3<f64>,
    pub measure: f64,
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct BoundaryFace {
    pub cell: usize,
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    pub local_normal: Vector3<f64>,
    pub measure: f64,
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    n: usize,
    shape: CellShape,
    orientation: Vector3<f64>,
    /// Columns are the local axes expressed in global coordinates.
    frame: Matrix3<f64>,
    breaks: Vec<Vec<f64>>,
    vertices: Vec<Point>,
    local_vertices: Vec<Point>,
    cells: Vec<Cell>,
    interior: Vec<InteriorFace>,
    boundary: Vec<BoundaryFace>,
}

/// Uniform `n×n` (or `n×n×n`) quad/hex mesh of the unit square or cube
/// rotated so that two sides are perpendicular to `orientation`.
pub fn build_mesh(dim: usize, n: usize, orientation: &[f64]) -> Result<Mesh> {
    Mesh::uniform(dim, n, orientation, CellShape::default_for(dim))
}

pub(crate) fn check_unit(v: &[f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnit(v.to_vec(), norm - 1.0));
    }
    Ok(())
}

pub(crate) fn lift(v: &[f64]) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for (i, x) in v.iter().take(3).enumerate() {
        out[i] = *x;
    }
    out
}

/// Right-handed orthonormal frame whose first column is `orientation`.
pub fn orientation_frame(dim: usize, orientation: &Vector3<f64>) -> Matrix3<f64> {
    let r1 = *orientation;
    if dim == 2 {
        let r2 = Vector3::new(-r1.y, r1.x, 0.0);
        return Matrix3::from_columns(&[r1, r2, Vector3::z()]);
    }
    let mut k = 0;
    for i in 1..3 {
        if r1[i].abs() < r1[k].abs() {
            k = i;
        }
    }
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let r2 = (e - r1 * r1.dot(&e)).normalize();
    let r3 = r1.cross(&r2);
    Matrix3::from_columns(&[r1, r2, r3])
}

impl Mesh {
    pub fn uniform(dim: usize, n: usize, orientation: &[f64], shape: CellShape) -> Result<Self> {
        if n == 0 {
            return Err(Error::Refinement { min: 1, got: 0 });
        }
        let axis: Vec<f64> = (0..=n).map(|i| -0.5 + i as f64 / n as f64).collect();
        let mut axis = axis;
        axis[n] = 0.5;
        Self::tensor(dim, n, vec![axis; dim], orientation, shape)
    }

    /// Tensor-product mesh with the given (sorted) breakpoints per local axis.
    pub fn tensor(
        dim: usize,
        n: usize,
        breaks: Vec<Vec<f64>>,
        orientation: &[f64],
        shape: CellShape,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Dimension(dim));
        }
        if shape.dimension() != dim {
            return Err(Error::Invalid(format!(
                "cell shape {shape:?} does not fit dimension {dim}"
            )));
        }
        if n == 0 {
            return Err(Error::Refinement { min: 1, got: 0 });
        }
        if orientation.len() != dim {
            return Err(Error::Invalid(format!(
                "orientation must have {dim} components, got {}",
                orientation.len()
            )));
        }
        check_unit(orientation)?;
        if breaks.len() != dim {
            return Err(Error::Invalid(format!("need {dim} break lists")));
        }
        for b in &breaks {
            if b.len() < 2 || b.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                return Err(Error::Invalid("breaks must be strictly increasing".into()));
            }
            if (b[0] + 0.5).abs() > 1e-12 || (b[b.len() - 1] - 0.5).abs() > 1e-12 {
                return Err(Error::Invalid("breaks must span [-1/2, 1/2]".into()));
            }
        }
        let orientation = lift(orientation);
        let frame = orientation_frame(dim, &orientation);
        let builder = Builder::new(dim, &breaks, shape);
        let local_vertices = builder.local_vertices();
        let vertices = local_vertices.iter().map(|p| frame * p).collect();
        let (cells, interior, boundary) = builder.topology(&local_vertices, &frame);
        Ok(Self {
            dim,
            n,
            shape,
            orientation,
            frame,
            breaks,
            vertices,
            local_vertices,
            cells,
            interior,
            boundary,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn refinement(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> CellShape {
        self.shape
    }

    pub fn orientation(&self) -> &Vector3<f64> {
        &self.orientation
    }

    /// Orientation as a `dim`-vector.
    pub fn orientation_vec(&self) -> Vec<f64> {
        self.orientation.iter().take(self.dim).copied().collect()
    }

    pub fn frame(&self) -> &Matrix3<f64> {
        &self.frame
    }

    pub fn breaks(&self) -> &[Vec<f64>] {
        &self.breaks
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point {
        &self.vertices[i]
    }

    /// Vertex coordinates in the local frame (exact breakpoint values).
    pub fn local_vertex(&self, i: usize) -> &Point {
        &self.local_vertices[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn face_points(&self, vertices: &[usize]) -> Vec<Point> {
        vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    /// Whether the break lists are the uniform `n`-grid.
    pub fn is_uniform(&self) -> bool {
        let n = self.n;
        self.breaks.iter().all(|b| {
            b.len() == n + 1
                && b.iter()
                    .enumerate()
                    .all(|(i, x)| (x - (-0.5 + i as f64 / n as f64)).abs() <= 1e-14)
        })
    }

    /// Local coordinates of a global point.
    pub fn to_local(&self, x: &Point) -> Point {
        self.frame.transpose() * x
    }

    /// Index of the cell containing `x` (closed cells; ties go to the first match).
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let xi = self.to_local(x);
        let mut idx = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..self.dim {
            let b = &self.breaks[a];
            let v = xi[a];
            if v < b[0] - 1e-12 || v > b[b.len() - 1] + 1e-12 {
                return None;
            }
            let mut k = b.partition_point(|&t| t <= v).saturating_sub(1);
            k = k.min(b.len() - 2);
            idx[a] = k;
            frac[a] = (v - b[k]) / (b[k + 1] - b[k]);
        }
        let counts: Vec<usize> = self.breaks.iter().map(|b| b.len() - 1).collect();
        let mut boxi = idx[0] + counts[0] * idx[1];
        if self.dim == 3 {
            boxi += counts[0] * counts[1] * idx[2];
        }
        if self.shape.is_split() {
            let upper = frac[0] + frac[1] > 1.0;
            Some(2 * boxi + usize::from(upper))
        } else {
            Some(boxi)
        }
    }

    pub fn total_measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }
}

struct Builder<'a> {
    dim: usize,
    breaks: &'a [Vec<f64>],
    shape: CellShape,
    counts: [usize; 3],
}

struct FaceRecord {
    cell: usize,
    vertices: Vec<usize>,
    partner: Option<usize>,
}

impl<'a> Builder<'a> {
    fn new(dim: usize, breaks: &'a [Vec<f64>], shape: CellShape) -> Self {
        let mut counts = [1usize; 3];
        for (a, b) in breaks.iter().enumerate() {
            counts[a] = b.len() - 1;
        }
        Self {
            dim,
            breaks,
            shape,
            counts,
        }
    }

    fn vid(&self, i: usize, j: usize, k: usize) -> usize {
        let nx = self.counts[0] + 1;
        let ny = self.counts[1] + 1;
        i + nx * (j + ny * k)
    }

    fn local_vertices(&self) -> Vec<Point> {
        let nz = if self.dim == 3 { self.counts[2] + 1 } else { 1 };
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..=self.counts[1] {
                for i in 0..=self.counts[0] {
                    let z = if self.dim == 3 { self.breaks[2][k] } else { 0.0 };
                    out.push(Point::new(self.breaks[0][i], self.breaks[1][j], z));
                }
            }
        }
        out
    }

    /// Cells in row-major order (x fastest) with their faces as vertex lists,
    /// polygon faces ordered around their boundary.
    fn cells(&self) -> Vec<(Vec<usize>, Vec<Vec<usize>>)> {
        let nz = if self.dim == 3 { self.counts[2] } else { 1 };
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..self.counts[1] {
                for i in 0..self.counts[0] {
                    let v = |di: usize, dj: usize, dk: usize| self.vid(i + di, j + dj, k + dk);
                    match self.shape {
                        CellShape::Quad => {
                            let vs = vec![v(0, 0, 0), v(1, 0, 0), v(1, 1, 0), v(0, 1, 0)];
                            out.push((vs.clone(), polygon_edges(&vs)));
                        }
                        CellShape::Triangle => {
                            let lo = vec![v(0, 0, 0), v(1, 0, 0), v(0, 1, 0)];
                            let hi = vec![v(1, 0, 0), v(1, 1, 0), v(0, 1, 0)];
                            out.push((lo.clone(), polygon_edges(&lo)));
                            out.push((hi.clone(), polygon_edges(&hi)));
                        }
                        CellShape::Hex => {
                            let bottom = [v(0, 0, 0), v(1, 0, 0), v(1, 1, 0), v(0, 1, 0)];
                            let top = [v(0, 0, 1), v(1, 0, 1), v(1, 1, 1), v(0, 1, 1)];
                            out.push(extrude(&bottom, &top));
                        }
                        CellShape::Prism => {
                            let lo_b = [v(0, 0, 0), v(1, 0, 0), v(0, 1, 0)];
                            let lo_t = [v(0, 0, 1), v(1, 0, 1), v(0, 1, 1)];
                            let hi_b = [v(1, 0, 0), v(1, 1, 0), v(0, 1, 0)];
                            let hi_t = [v(1, 0, 1), v(1, 1, 1), v(0, 1, 1)];
                            out.push(extrude(&lo_b, &lo_t));
                            out.push(extrude(&hi_b, &hi_t));
                        }
                    }
                }
            }
        }
        out
    }

    fn topology(
        &self,
        local: &[Point],
        frame: &Matrix3<f64>,
    ) -> (Vec<Cell>, Vec<InteriorFace>, Vec<BoundaryFace>) {
        let raw = self.cells();
        let mut cells = Vec::with_capacity(raw.len());
        let mut records: Vec<FaceRecord> = Vec::new();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut interior_pairs = Vec::new();
        let mut local_centroids = Vec::with_capacity(raw.len());
        for (c, (vs, faces)) in raw.into_iter().enumerate() {
            let lc = vs.iter().map(|&v| local[v]).sum::<Point>() / vs.len() as f64;
            local_centroids.push(lc);
            cells.push(Cell {
                measure: self.cell_measure(&vs, local),
                centroid: frame * lc,
                vertices: vs,
            });
            for f in faces {
                let mut key = f.clone();
                key.sort_unstable();
                match index.get(&key) {
                    Some(&r) => {
                        records[r].partner = Some(c);
                        interior_pairs.push(r);
                    }
                    None => {
                        index.insert(key, records.len());
                        records.push(FaceRecord {
                            cell: c,
                            vertices: f,
                            partner: None,
                        });
                    }
                }
            }
        }
        let face_geom = |rec: &FaceRecord| {
            let pts: Vec<Point> = rec.vertices.iter().map(|&v| local[v]).collect();
            let mut nrm = local_normal(&pts);
            let fc = pts.iter().sum::<Point>() / pts.len() as f64;
            if nrm.dot(&(fc - local_centroids[rec.cell])) < 0.0 {
                nrm = -nrm;
            }
            (nrm, geometry::measure(&pts))
        };
        let interior = interior_pairs
            .into_iter()
            .map(|r| {
                let rec = &records[r];
                let (nrm, m) = face_geom(rec);
                InteriorFace {
                    minus: rec.cell,
                    plus: rec.partner.expect("matched face"),
                    normal: frame * nrm,
                    local_normal: nrm,
                    measure: m,
                    vertices: rec.vertices.clone(),
                }
            })
            .collect();
        let boundary = records
            .iter()
            .filter(|r| r.partner.is_none())
            .map(|rec| {
                let (nrm, m) = face_geom(rec);
                BoundaryFace {
                    cell: rec.cell,
                    normal: frame * nrm,
                    local_normal: nrm,
                    measure: m,
                    vertices: rec.vertices.clone(),
                }
            })
            .collect();
        (cells, interior, boundary)
    }

    fn cell_measure(&self, vs: &[usize], local: &[Point]) -> f64 {
        match self.shape {
            CellShape::Quad | CellShape::Triangle => {
                let pts: Vec<Point> = vs.iter().map(|&v| local[v]).collect();
                geometry::measure(&pts)
            }
            CellShape::Hex | CellShape::Prism => {
                let half = vs.len() / 2;
                let base: Vec<Point> = vs[..half].iter().map(|&v| local[v]).collect();
                let height = local[vs[half]].z - local[vs[0]].z;
                geometry::measure(&base) * height
            }
        }
    }
}

fn polygon_edges(vs: &[usize]) -> Vec<Vec<usize>> {
    (0..vs.len())
        .map(|i| vec![vs[i], vs[(i + 1) % vs.len()]])
        .collect()
}

/// Cell vertices (bottom then top) and faces of a right prism over a polygon.
fn extrude(bottom: &[usize], top: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let k = bottom.len();
    let mut faces = vec![bottom.to_vec(), top.to_vec()];
    for i in 0..k {
        let j = (i + 1) % k;
        faces.push(vec![bottom[i], bottom[j], top[j], top[i]]);
    }
    let mut vs = bottom.to_vec();
    vs.extend_from_slice(top);
    (vs, faces)
}

fn local_normal(pts: &[Point]) -> Vector3<f64> {
    let raw = if pts.len() == 2 {
        let t = pts[1] - pts[0];
        Vector3::new(t.y, -t.x, 0.0)
    } else {
        (pts[1] - pts[0]).cross(&(pts[2] - pts[0]))
    };
    let mut nrm = raw.normalize();
    for c in nrm.iter_mut() {
        if c.abs() < 1e-15 {
            *c = 0.0;
        }
    }
    nrm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_square() {
        let m = build_mesh(2, 1, &[1.0, 0.0]).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.boundary_faces().len(), 4);
        assert!(m.interior_faces().is_empty());
    }

    #[test]
    fn two_by_two_counts() {
        let m = build_mesh(2, 2, &[1.0, 0.0]).unwrap();
        assert_eq!(m.num_cells(), 4);
        assert_eq!(m.interior_faces().len(), 4);
        assert_eq!(m.boundary_faces().len(), 8);
        assert!((m.total_measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_orientation_normals_are_rotated_axes() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = build_mesh(2, 4, &[s, s]).unwrap();
        assert_eq!(m.num_cells(), 16);
        // Oracle: axis-aligned normals ±e1, ±e2 rotated by 45°.
        let allowed = [
            Vector3::new(s, s, 0.0),
            Vector3::new(-s, -s, 0.0),
            Vector3::new(-s, s, 0.0),
            Vector3::new(s, -s, 0.0),
        ];
        let normals = m
            .interior_faces()
            .iter()
            .map(|f| f.normal)
            .chain(m.boundary_faces().iter().map(|f| f.normal));
        for nrm in normals {
            assert!(allowed.iter().any(|a| (a - nrm).norm() < 1e-12), "{nrm:?}");
            assert!((nrm.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_mesh_invariants() {
        let nu = [0.0, 0.6, 0.8];
        for shape in [CellShape::Hex, CellShape::Prism] {
            let m = Mesh::uniform(3, 3, &nu, shape).unwrap();
            assert!((m.total_measure() - 1.0).abs() < 1e-12);
            let bmeasure: f64 = m.boundary_faces().iter().map(|f| f.measure).sum();
            assert!((bmeasure - 6.0).abs() < 1e-12);
            for f in m.interior_faces() {
                assert!((f.normal.norm() - 1.0).abs() < 1e-12);
                let d = m.cells()[f.plus].centroid - m.cells()[f.minus].centroid;
                assert!(d.dot(&f.normal) > 0.0);
            }
        }
    }

    #[test]
    fn triangle_mesh_has_diagonal_faces() {
        let m = Mesh::uniform(2, 2, &[1.0, 0.0], CellShape::Triangle).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.interior_faces().len(), 4 + 4);
        let diag = m
            .interior_faces()
            .iter()
            .filter(|f| f.local_normal.x != 0.0 && f.local_normal.y != 0.0)
            .count();
        assert_eq!(diag, 4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_mesh(2, 0, &[1.0, 0.0]), Err(Error::Refinement { .. })));
        assert!(matches!(build_mesh(2, 2, &[1.0, 0.1]), Err(Error::NonUnit(..))));
        assert!(matches!(build_mesh(4, 2, &[1.0, 0.0]), Err(Error::Dimension(4))));
    }

    #[test]
    fn locate_finds_centroids() {
        for shape in [CellShape::Quad, CellShape::Triangle] {
            let m = Mesh::uniform(2, 5, &[0.6, 0.8], shape).unwrap();
            for (i, c) in m.cells().iter().enumerate() {
                assert_eq!(m.locate(&c.centroid), Some(i));
            }
        }
        let m = Mesh::uniform(3, 3, &[0.0, 0.0, 1.0], CellShape::Prism).unwrap();
        for (i, c) in m.cells().iter().enumerate() {
            assert_eq!(m.locate(&c.centroid), Some(i));
        }
    }
}
