//! Explicit competitors whose energies vanish (or stay bounded) as the
//! scale grows, and tables of their decay.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix3x2, Vector3};
use serde::Serialize;

use crate::densities::{self, SurfaceDensity};
use crate::error::{Error, Result};
use crate::field::{Datum, SbvField};
use crate::geometry::Point;
use crate::mesh::{CellShape, Mesh};

/// Jump-mass constant of the frame staircase, as a multiple of `|M|`.
pub const FRAME_MASS_FACTOR: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sequence {
    /// Alternating `±e₃/n²` rectangles inside a frame carrying an anchored
    /// staircase with gradient `M`; boundary datum 0.
    FrameW1 { m: Matrix3x2<f64> },
    /// `γ_{λ,η}` shifted by `∓e₃/n` on the two halves of the shrunken square.
    Gamma1Split { lambda: Vector3<f64>, eta: [f64; 2] },
    /// `u = Bx + (A − B)c_T`: gradient `B` everywhere, trace close to `Ax`.
    StaircaseTrace {
        a: Matrix3x2<f64>,
        b: Matrix3x2<f64>,
        shape: CellShape,
    },
}

impl Sequence {
    pub fn frame_w1(m: Matrix3x2<f64>) -> Self {
        Sequence::FrameW1 { m }
    }

    pub fn gamma1_split(lambda: Vector3<f64>, eta: &[f64]) -> Result<Self> {
        if eta.len() != 2 {
            return Err(Error::Invalid("η must have two components".into()));
        }
        crate::mesh::check_unit(eta)?;
        Ok(Sequence::Gamma1Split {
            lambda,
            eta: [eta[0], eta[1]],
        })
    }

    pub fn staircase_trace(a: Matrix3x2<f64>, b: Matrix3x2<f64>) -> Self {
        Sequence::StaircaseTrace {
            a,
            b,
            shape: CellShape::Triangle,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sequence::FrameW1 { .. } => "FRAME_W1",
            Sequence::Gamma1Split { .. } => "GAMMA1_SPLIT",
            Sequence::StaircaseTrace { .. } => "STAIRCASE_TRACE",
        }
    }

    pub fn min_scale(&self) -> usize {
        match self {
            Sequence::StaircaseTrace { .. } => 1,
            _ => 2,
        }
    }

    /// The boundary datum the competitor is compared against.
    pub fn datum(&self) -> Datum {
        match self {
            Sequence::FrameW1 { .. } => Datum::zero(),
            Sequence::Gamma1Split { lambda, eta } => Datum::Step {
                lambda: *lambda,
                eta: Vector3::new(eta[0], eta[1], 0.0),
            },
            Sequence::StaircaseTrace { a, .. } => Datum::linear(densities::embed(a)),
        }
    }

    /// Bound on the energy at scale `n`, where the construction has one.
    pub fn bound(&self, n: usize) -> Option<f64> {
        match self {
            Sequence::FrameW1 { m } => Some(FRAME_MASS_FACTOR * m.norm() / n as f64),
            Sequence::Gamma1Split { lambda, .. } => Some(lambda.norm() / n as f64),
            Sequence::StaircaseTrace { .. } => None,
        }
    }

    /// The competitor at scale `n`.
    pub fn build(&self, n: usize) -> Result<SbvField> {
        if n < self.min_scale() {
            return Err(Error::Refinement {
                min: self.min_scale(),
                got: n,
            });
        }
        match self {
            Sequence::FrameW1 { m } => Ok(frame_w1(m, n)?.0),
            Sequence::Gamma1Split { lambda, eta } => gamma1_split(lambda, eta, n),
            Sequence::StaircaseTrace { a, b, shape } => staircase(a, b, n, *shape),
        }
    }
}

/// Break list `−1/2, then n + 1 equispaced points over the shrunken interval, 1/2`.
fn framed_breaks(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let half = (nf - 1.0) / (2.0 * nf);
    let mut v = vec![-0.5];
    v.extend((0..=n).map(|k| -half + k as f64 * (nf - 1.0) / (nf * nf)));
    v[n + 1] = half;
    v.push(0.5);
    v
}

/// `±1` for the frame strip a local coordinate lies in, `0` inside.
fn strip(x: f64, half: f64) -> i32 {
    if x > half {
        1
    } else if x < -half {
        -1
    } else {
        0
    }
}

/// Returns the field and the ids of the frame cells.
fn frame_w1(m: &Matrix3x2<f64>, n: usize) -> Result<(SbvField, Vec<bool>)> {
    let breaks = framed_breaks(n);
    let mesh = Arc::new(Mesh::tensor(2, n, vec![breaks.clone(); 2], &[1.0, 0.0], CellShape::Quad)?);
    let nf = n as f64;
    let half = (nf - 1.0) / (2.0 * nf);
    let g = densities::embed(m);
    let mut in_frame = Vec::with_capacity(mesh.num_cells());
    let field = SbvField::from_fn(mesh.clone(), |t| {
        let c = mesh.cells()[t].centroid;
        let (sx, sy) = (strip(c.x, half), strip(c.y, half));
        in_frame.push(sx != 0 || sy != 0);
        if sx != 0 || sy != 0 {
            // Anchor on the outer boundary: edge midpoint, or the corner.
            let p = Point::new(
                if sx != 0 { 0.5 * sx as f64 } else { c.x },
                if sy != 0 { 0.5 * sy as f64 } else { c.y },
                0.0,
            );
            (g, -(g * p))
        } else {
            // Rectangle index along e₁ from the inner break list.
            let k = breaks[1..=n + 1]
                .windows(2)
                .position(|w| c.x > w[0] && c.x < w[1])
                .expect("inner cell lies in some rectangle");
            let ck = Point::new(0.5 * (breaks[k + 1] + breaks[k + 2]), 0.0, 0.0);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (g, -(g * ck) + Vector3::z() * (sign / (nf * nf)))
        }
    });
    Ok((field, in_frame))
}

fn gamma1_split(lambda: &Vector3<f64>, eta: &[f64; 2], n: usize) -> Result<SbvField> {
    let nf = n as f64;
    // Frame width `1/2 − half` rounded down to at most `1/(2n)`, so the
    // charged midline segments never exceed their nominal length.
    let width = 0.5 / nf;
    let mut half = 0.5 - width;
    while 0.5 - half > width {
        half = half.next_up();
    }
    let axis = vec![-0.5, -half, 0.0, half, 0.5];
    let mesh = Arc::new(Mesh::tensor(2, n, vec![axis.clone(), axis], eta, CellShape::Quad)?);
    let datum = Datum::Step {
        lambda: *lambda,
        eta: Vector3::new(eta[0], eta[1], 0.0),
    };
    Ok(SbvField::from_fn(mesh.clone(), |t| {
        let c = mesh.cells()[t].centroid;
        let xi = mesh.to_local(&c);
        let mut b = datum.eval(&c);
        if xi.x.abs() < half && xi.y.abs() < half {
            b.z += if xi.x >= 0.0 { 1.0 / nf } else { -1.0 / nf };
        }
        (Matrix3::zeros(), b)
    }))
}

fn staircase(a: &Matrix3x2<f64>, b: &Matrix3x2<f64>, n: usize, shape: CellShape) -> Result<SbvField> {
    let mesh = Arc::new(Mesh::uniform(2, n, &[1.0, 0.0], shape)?);
    let (ga, gb) = (densities::embed(a), densities::embed(b));
    Ok(SbvField::from_fn(mesh.clone(), |t| {
        let c = mesh.cells()[t].centroid;
        (gb, (ga - gb) * c)
    }))
}

/// Exact surface energy of a competitor, boundary mismatch included.
pub fn energy(field: &SbvField, surface: &dyn SurfaceDensity, datum: &Datum) -> Result<f64> {
    field.interfacial_energy(surface, Some(datum))
}

/// `∫|[u]|` over the frame's internal faces plus the outer boundary trace:
/// the singular variation of the frame function.
pub fn frame_jump_mass(m: &Matrix3x2<f64>, n: usize) -> Result<f64> {
    let (field, in_frame) = frame_w1(m, n)?;
    let mesh = field.mesh();
    let mut total = 0.0;
    for (i, f) in mesh.interior_faces().iter().enumerate() {
        if in_frame[f.minus] && in_frame[f.plus] {
            total += field.jump_on(i).mean().norm() * f.measure;
        }
    }
    for f in mesh.boundary_faces() {
        let p = mesh.face_points(&f.vertices);
        total += integrate_norm_affine(field.eval_in(f.cell, &p[0]), field.eval_in(f.cell, &p[1]))
            * f.measure;
    }
    Ok(total)
}

/// `∫₀¹ |(1−s)u + s v| ds`, split at the minimum and integrated by
/// composite Gauss–Legendre on the two smooth halves.
fn integrate_norm_affine(u: Vector3<f64>, v: Vector3<f64>) -> f64 {
    const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let d = v - u;
    let s0 = if d.norm_squared() > 0.0 {
        (-u.dot(&d) / d.norm_squared()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut total = 0.0;
    for (lo, hi) in [(0.0, s0), (s0, 1.0)] {
        let sub = 16;
        let h = (hi - lo) / sub as f64;
        for j in 0..sub {
            let mid = lo + (j as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(&W) {
                let s = mid + 0.5 * h * x;
                total += 0.5 * h * w * (u + d * s).norm();
            }
        }
    }
    total
}

/// Whether every rectangle interface and inner-square jump has a nonzero
/// third component at this scale (the asymptotic regime of the frame argument).
pub fn frame_threshold_met(m: &Matrix3x2<f64>, n: usize) -> Result<bool> {
    let (field, in_frame) = frame_w1(m, n)?;
    let mesh = field.mesh();
    let ok = mesh.interior_faces().iter().enumerate().all(|(i, f)| {
        if in_frame[f.minus] && in_frame[f.plus] {
            return true;
        }
        let jump = field.jump_on(i);
        // No jump inside a rectangle; elsewhere an affine third component
        // is harmless unless identically zero.
        jump.values.iter().all(|v| *v == Vector3::zeros()) || jump.values.iter().any(|v| v.z != 0.0)
    });
    Ok(ok)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub n: usize,
    pub energy: f64,
    pub bound: Option<f64>,
    /// Frame jump mass, for `FRAME_W1`.
    pub mass: Option<f64>,
    /// Log-log least-squares slope over the rows so far.
    pub slope: Option<f64>,
    pub within_bound: bool,
    /// `false` when the scale is below the regime where the frame
    /// argument applies.
    pub threshold_met: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayTable {
    pub sequence: String,
    pub density: String,
    pub rows: Vec<DecayRow>,
}

impl DecayTable {
    pub fn slope(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.slope)
    }

    pub fn all_within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.within_bound)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        let mut out = String::from("n,energy,bound,slope-so-far,mass,within_bound,threshold_met\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.17e},{},{},{},{},{}",
                r.n,
                r.energy,
                opt(r.bound),
                opt(r.slope),
                opt(r.mass),
                r.within_bound,
                r.threshold_met
            );
        }
        out
    }
}

/// Least-squares slope of `log y` against `log x` over positive entries.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// One row per scale. The slope for `FRAME_W1` is fitted on the jump mass,
/// which decays even when the energy is identically zero.
pub fn decay_table(seq: &Sequence, surface: &dyn SurfaceDensity, n_list: &[usize]) -> Result<DecayTable> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("scales must be strictly increasing".into()));
    }
    let datum = seq.datum();
    let mut rows: Vec<DecayRow> = Vec::with_capacity(n_list.len());
    let mut fit = Vec::new();
    for &n in n_list {
        let field = seq.build(n)?;
        let e = energy(&field, surface, &datum)?;
        let bound = seq.bound(n);
        let (mass, threshold_met) = match seq {
            Sequence::FrameW1 { m } => (Some(frame_jump_mass(m, n)?), frame_threshold_met(m, n)?),
            _ => (None, true),
        };
        fit.push((n as f64, mass.unwrap_or(e)));
        let within_bound = bound.is_none_or(|b| e <= b && mass.is_none_or(|m| m <= b));
        rows.push(DecayRow {
            n,
            energy: e,
            bound,
            mass,
            slope: loglog_slope(&fit),
            within_bound,
            threshold_met,
        });
    }
    Ok(DecayTable {
        sequence: seq.name().into(),
        density: surface.name().into(),
        rows,
    })
}
