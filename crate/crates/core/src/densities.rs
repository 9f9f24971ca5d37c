//! Energy densities: the closed-form relaxed densities for the purely
//! interfacial energy, and the `(W, h)` plugin interface.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix3x2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::mesh::check_unit;

/// `h(λ, ν) = |λ·ν|`.
pub fn h_pure(lambda: &Vector3<f64>, nu: &[f64]) -> Result<f64> {
    check_unit(nu)?;
    Ok(lambda
        .iter()
        .zip(nu)
        .map(|(l, n)| l * n)
        .sum::<f64>()
        .abs())
}

/// `|λ·η̃|` with `η̃ = (η, 0)`.
pub fn h_3d2d_closed(lambda: &Vector3<f64>, eta: &[f64]) -> Result<f64> {
    if eta.len() != 2 {
        return Err(Error::Invalid("η must have two components".into()));
    }
    check_unit(eta)?;
    Ok((lambda[0] * eta[0] + lambda[1] * eta[1]).abs())
}

/// `|A₁₁ + A₂₂ − B₁₁ − B₂₂|`, evaluated as `|(A₁₁−B₁₁) + (A₂₂−B₂₂) + 0|`.
pub fn w_3d2d_sd_closed(a: &Matrix3x2<f64>, b: &Matrix3x2<f64>) -> f64 {
    ((a[(0, 0)] - b[(0, 0)]) + (a[(1, 1)] - b[(1, 1)]) + 0.0).abs()
}

/// `|tr(A − (B₃|A e₃))|`.
#[allow(clippy::eq_op)]
pub fn w_3dsd_closed(a: &Matrix3<f64>, b3: &Matrix3x2<f64>) -> f64 {
    ((a[(0, 0)] - b3[(0, 0)]) + (a[(1, 1)] - b3[(1, 1)]) + (a[(2, 2)] - a[(2, 2)])).abs()
}

/// `W_{3d,SD}((A|d), B)`; the director drops out of the trace.
pub fn w_3dsd2d_closed(a: &Matrix3x2<f64>, b: &Matrix3x2<f64>, d: &Vector3<f64>) -> f64 {
    w_3dsd_closed(&append_column(a, d), b)
}

/// `|λ·η̃|` if `λ₃ = 0`, else `0`.
pub fn psi1_bar(lambda: &Vector3<f64>, eta: &[f64]) -> Result<f64> {
    let h = h_3d2d_closed(lambda, eta)?;
    Ok(if lambda[2] == 0.0 { h } else { 0.0 })
}

/// `(A|d)`.
pub fn append_column(a: &Matrix3x2<f64>, d: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::from_columns(&[a.column(0).into(), a.column(1).into(), *d])
}

/// The first two columns.
pub fn planar_part(a: &Matrix3<f64>) -> Matrix3x2<f64> {
    a.fixed_columns::<2>(0).into()
}

/// `(A|0)` as a 3×3 matrix.
pub fn embed(a: &Matrix3x2<f64>) -> Matrix3<f64> {
    append_column(a, &Vector3::zeros())
}

pub trait BulkDensity: Send + Sync {
    fn eval(&self, a: &Matrix3<f64>) -> f64;

    /// True when the density vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }

    fn name(&self) -> &str {
        "custom"
    }
}

/// Surface densities with exact integration over faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    /// `|λ·ν|`.
    NormalJump,
    /// `|λ·ν̃|` where `λ₃ = 0`, else `0` (2D normals).
    Psi1Bar,
    Custom,
}

pub trait SurfaceDensity: Send + Sync {
    fn eval(&self, jump: &Vector3<f64>, normal: &Vector3<f64>) -> f64;

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::Custom
    }

    fn name(&self) -> &str {
        "custom"
    }

    /// `∫_F h([u], ν)` for a jump that is affine on the flat piece `F`,
    /// given by its vertex values.
    fn integrate(&self, points: &[Point], jumps: &[Vector3<f64>], normal: &Vector3<f64>) -> f64 {
        quadrature(points, jumps, |j| self.eval(j, normal))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroBulk;

impl BulkDensity for ZeroBulk {
    fn eval(&self, _a: &Matrix3<f64>) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "zero-bulk"
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NormalJump;

impl SurfaceDensity for NormalJump {
    fn eval(&self, jump: &Vector3<f64>, normal: &Vector3<f64>) -> f64 {
        jump.dot(normal).abs()
    }

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::NormalJump
    }

    fn name(&self) -> &str {
        "interfacial-normal"
    }

    fn integrate(&self, points: &[Point], jumps: &[Vector3<f64>], normal: &Vector3<f64>) -> f64 {
        let vals: Vec<f64> = jumps.iter().map(|j| j.dot(normal)).collect();
        geometry::integrate_abs_affine(points, &vals)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Psi1Bar;

impl SurfaceDensity for Psi1Bar {
    fn eval(&self, jump: &Vector3<f64>, normal: &Vector3<f64>) -> f64 {
        if jump[2] == 0.0 {
            (jump[0] * normal[0] + jump[1] * normal[1]).abs()
        } else {
            0.0
        }
    }

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::Psi1Bar
    }

    fn name(&self) -> &str {
        "psi1bar"
    }

    /// An affine third component that is not identically zero vanishes only
    /// on a null set, where the density contributes nothing.
    fn integrate(&self, points: &[Point], jumps: &[Vector3<f64>], normal: &Vector3<f64>) -> f64 {
        if jumps.iter().any(|j| j[2] != 0.0) {
            return 0.0;
        }
        let vals: Vec<f64> = jumps
            .iter()
            .map(|j| j[0] * normal[0] + j[1] * normal[1])
            .collect();
        geometry::integrate_abs_affine(points, &vals)
    }
}

/// Bulk density from a closure.
pub struct FnBulk<F> {
    pub name: String,
    pub f: F,
}

impl<F: Fn(&Matrix3<f64>) -> f64 + Send + Sync> BulkDensity for FnBulk<F> {
    fn eval(&self, a: &Matrix3<f64>) -> f64 {
        (self.f)(a)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Surface density from a closure; integrated by quadrature.
pub struct FnSurface<F> {
    pub name: String,
    pub f: F,
}

impl<F: Fn(&Vector3<f64>, &Vector3<f64>) -> f64 + Send + Sync> SurfaceDensity for FnSurface<F> {
    fn eval(&self, jump: &Vector3<f64>, normal: &Vector3<f64>) -> f64 {
        (self.f)(jump, normal)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Composite quadrature of `g(jump(x))` over a segment or polygon.
fn quadrature(
    points: &[Point],
    jumps: &[Vector3<f64>],
    g: impl Fn(&Vector3<f64>) -> f64,
) -> f64 {
    const PIECES: usize = 16;
    match points.len() {
        0 | 1 => 0.0,
        2 => {
            let len = geometry::measure(points);
            let h = 1.0 / PIECES as f64;
            let mut acc = 0.0;
            for k in 0..PIECES {
                for (x, w) in GAUSS5 {
                    let t = (k as f64 + 0.5 * (x + 1.0)) * h;
                    acc += w * 0.5 * h * g(&(jumps[0] * (1.0 - t) + jumps[1] * t));
                }
            }
            acc * len
        }
        _ => {
            let mut acc = 0.0;
            for i in 1..points.len() - 1 {
                let tri = [points[0], points[i], points[i + 1]];
                let area = geometry::measure(&tri);
                let (j0, j1, j2) = (jumps[0], jumps[i], jumps[i + 1]);
                let m = PIECES as f64;
                let mut sum = 0.0;
                // centroid rule on the uniform subdivision into m² triangles
                for a in 0..PIECES {
                    for b in 0..PIECES - a {
                        let (fa, fb) = (a as f64, b as f64);
                        for (da, db) in [(1.0 / 3.0, 1.0 / 3.0)]
                            .into_iter()
                            .chain((a + b + 1 < PIECES).then_some((2.0 / 3.0, 2.0 / 3.0)))
                        {
                            let (s, t) = ((fa + da) / m, (fb + db) / m);
                            sum += g(&(j0 * (1.0 - s - t) + j1 * s + j2 * t));
                        }
                    }
                }
                acc += area * sum / (m * m);
            }
            acc
        }
    }
}

/// Bulk and surface densities with their declared growth constants.
#[derive(Clone)]
pub struct DensityPair {
    pub bulk: Arc<dyn BulkDensity>,
    pub surface: Arc<dyn SurfaceDensity>,
    pub p: f64,
    pub c_w: f64,
    pub c_h: f64,
}

impl fmt::Debug for DensityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityPair")
            .field("bulk", &self.bulk.name())
            .field("surface", &self.surface.name())
            .field("p", &self.p)
            .field("c_w", &self.c_w)
            .field("c_h", &self.c_h)
            .finish()
    }
}

impl DensityPair {
    pub fn new(
        bulk: Arc<dyn BulkDensity>,
        surface: Arc<dyn SurfaceDensity>,
        p: f64,
        c_w: f64,
        c_h: f64,
    ) -> Result<Self> {
        if p.is_nan() || p <= 1.0 {
            return Err(Error::Invalid(format!("growth exponent must exceed 1, got {p}")));
        }
        if !(c_w > 0.0 && c_h > 0.0) {
            return Err(Error::Invalid("declared constants must be positive".into()));
        }
        Ok(Self {
            bulk,
            surface,
            p,
            c_w,
            c_h,
        })
    }

    /// `W = 0`, `h = |λ·ν|`.
    pub fn interfacial_normal() -> Self {
        Self::new(Arc::new(ZeroBulk), Arc::new(NormalJump), 2.0, 1.0, 1.0).expect("valid constants")
    }

    /// `W = 0`, `h = Ψ̄₁`.
    pub fn psi1_bar() -> Self {
        Self::new(Arc::new(ZeroBulk), Arc::new(Psi1Bar), 2.0, 1.0, 1.0).expect("valid constants")
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "interfacial-normal" | "zero-bulk" => Ok(Self::interfacial_normal()),
            "psi1bar" | "psi1-bar" => Ok(Self::psi1_bar()),
            other => Err(Error::Invalid(format!("unknown density `{other}`"))),
        }
    }

    pub fn is_interfacial(&self) -> bool {
        self.bulk.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn m32(rows: [[f64; 2]; 3]) -> Matrix3x2<f64> {
        Matrix3x2::from_fn(|i, j| rows[i][j])
    }

    #[test]
    fn h_pure_examples() {
        assert_eq!(h_pure(&Vector3::new(1.0, 2.0, 3.0), &[0.0, 0.0, 1.0]).unwrap(), 3.0);
        assert_eq!(h_pure(&Vector3::new(1.0, 0.0, 0.0), &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let v = h_pure(&Vector3::new(2.0, 2.0, 0.0), &[S, S, 0.0]).unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(h_pure(&Vector3::x(), &[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn h_3d2d_examples() {
        assert_eq!(h_3d2d_closed(&Vector3::new(1.0, 0.0, 0.0), &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(h_3d2d_closed(&Vector3::new(0.0, 0.0, 7.0), &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(h_3d2d_closed(&Vector3::new(3.0, 4.0, 0.0), &[0.0, 1.0]).unwrap(), 4.0);
    }

    #[test]
    fn bulk_closed_forms() {
        let id = m32([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(w_3d2d_sd_closed(&id, &Matrix3x2::zeros()), 2.0);
        assert_eq!(w_3d2d_sd_closed(&id, &id), 0.0);
        let a = m32([[1.0, 5.0], [7.0, 2.0], [0.0, 0.0]]);
        let b = m32([[2.0, 9.0], [0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(w_3d2d_sd_closed(&a, &b), 0.0);

        let i3 = Matrix3::identity();
        assert_eq!(w_3dsd_closed(&i3, &planar_part(&i3)), 0.0);
        assert_eq!(w_3dsd_closed(&i3, &Matrix3x2::zeros()), 2.0);
        let mut b3 = Matrix3x2::zeros();
        b3[(0, 0)] = 1.0;
        b3[(1, 1)] = 1.0;
        assert_eq!(w_3dsd_closed(&Matrix3::from_diagonal(&Vector3::new(4.0, 5.0, 6.0)), &b3), 7.0);

        assert_eq!(w_3dsd2d_closed(&id, &Matrix3x2::zeros(), &Vector3::repeat(9.0)), 2.0);
        assert_eq!(w_3dsd2d_closed(&a, &a, &Vector3::new(1.0, -3.0, 8.0)), 0.0);
    }

    #[test]
    fn psi1_bar_examples() {
        assert_eq!(psi1_bar(&Vector3::new(1.0, 1.0, 0.0), &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(psi1_bar(&Vector3::new(1.0, 1.0, 0.5), &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(psi1_bar(&Vector3::zeros(), &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_matches_exact_normal_jump() {
        let custom = FnSurface {
            name: "abs-normal".into(),
            f: |j: &Vector3<f64>, n: &Vector3<f64>| j.dot(n).abs(),
        };
        let nrm = Vector3::new(0.0, 0.0, 1.0);
        let tri = [Point::zeros(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)];
        let jumps = [
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(0.0, 0.0, 2.0),
            Vector3::new(0.0, 0.0, 0.5),
        ];
        let exact = NormalJump.integrate(&tri, &jumps, &nrm);
        let approx = custom.integrate(&tri, &jumps, &nrm);
        assert!((exact - approx).abs() < 1e-3, "{exact} {approx}");
        let seg = [Point::zeros(), Point::new(2.0, 0.0, 0.0)];
        let exact = NormalJump.integrate(&seg, &jumps[..2], &nrm);
        let approx = custom.integrate(&seg, &jumps[..2], &nrm);
        assert!((exact - approx).abs() < 1e-3);
    }

    #[test]
    fn pair_validation() {
        let bulk: Arc<dyn BulkDensity> = Arc::new(ZeroBulk);
        let surf: Arc<dyn SurfaceDensity> = Arc::new(NormalJump);
        assert!(DensityPair::new(bulk.clone(), surf.clone(), 1.0, 1.0, 1.0).is_err());
        assert!(DensityPair::new(bulk.clone(), surf.clone(), 2.0, 0.0, 1.0).is_err());
        assert!(DensityPair::new(bulk, surf, 2.0, 1.0, 1.0).is_ok());
        assert!(DensityPair::interfacial_normal().is_interfacial());
    }
}
