//! Verification suites: closed-form identities, solver floors against
//! explicit competitors, and the discrete Gauss–Green identity.

use std::fmt::Write as _;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use nalgebra::{Matrix3, Matrix3x2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use sdrelax::constructions::Sequence;
use sdrelax::densities;
use sdrelax::{solve, CellKind, CellProblem, CellShape, Error, Mesh, SbvField};

use crate::report::Report;

const RANGE: f64 = 10.0;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    ClosedForms,
    Cell,
    GaussGreen,
    All,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Mesh refinement for the cell and Gauss–Green suites.
    #[arg(long, default_value_t = 8)]
    n: usize,
}

#[derive(Serialize)]
struct Row {
    suite: &'static str,
    check: String,
    value: f64,
    floor: f64,
    gap: f64,
    margin: f64,
    passed: bool,
}

fn entry(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-RANGE..RANGE)
}

fn planar(rng: &mut ChaCha8Rng) -> Matrix3x2<f64> {
    Matrix3x2::from_fn(|_, _| entry(rng))
}

fn vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| entry(rng))
}

fn unit2(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    [t.cos(), t.sin()]
}

/// Keeps the worst margin per check.
struct Tally {
    rows: Vec<Row>,
}

impl Tally {
    fn record(&mut self, check: &str, margin: f64) {
        let row = self.rows.iter_mut().find(|r| r.check == check);
        match row {
            Some(r) => {
                r.margin = r.margin.min(margin);
                r.passed &= margin >= 0.0;
            }
            None => self.rows.push(Row {
                suite: "closed-forms",
                check: check.into(),
                value: f64::NAN,
                floor: f64::NAN,
                gap: f64::NAN,
                margin,
                passed: margin >= 0.0,
            }),
        }
    }
}

fn closed_forms(samples: usize, seed: u64) -> Result<Vec<Row>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally { rows: Vec::new() };
    let tol = |x: f64| 1e-12 * (1.0 + x.abs());
    for _ in 0..samples {
        let (a, b, d) = (planar(&mut rng), planar(&mut rng), vector(&mut rng));
        let (l1, l2) = (vector(&mut rng), vector(&mut rng));
        let eta = unit2(&mut rng);
        let s: f64 = rng.random_range(0.1..5.0);
        let tilt: f64 = rng.random_range(-RANGE..RANGE);

        let left = densities::w_3d2d_sd_closed(&a, &b);
        let right = densities::w_3dsd2d_closed(&a, &b, &d);
        t.record("left and right bulk densities coincide", -(left - right).abs());
        let d2 = vector(&mut rng);
        t.record(
            "right bulk density ignores d",
            -(right - densities::w_3dsd2d_closed(&a, &b, &d2)).abs(),
        );
        t.record(
            "3D bulk density vanishes on (A | Ae3)",
            -densities::w_3dsd_closed(&densities::append_column(&a, &d), &a).abs(),
        );

        let h = |l: &Vector3<f64>| densities::h_3d2d_closed(l, &eta);
        let (h1, h2, hs) = (h(&l1)?, h(&l2)?, h(&(l1 + l2))?);
        let scaled = h(&(l1 * s))?;
        t.record("surface density is 1-homogeneous", tol(s * h1) - (scaled - s * h1).abs());
        t.record("surface density is subadditive", h1 + h2 - hs + tol(hs));

        let psi = densities::psi1_bar(&l1, &eta)?;
        let tilted = l1.dot(&Vector3::new(eta[0], eta[1], tilt)).abs();
        t.record("relaxed surface density below every tilt", tilted - psi + 1e-9);
        let planar_l = Vector3::new(l1.x, l1.y, 0.0);
        t.record(
            "relaxed surface density equals |λ·η̃| when λ₃ = 0",
            -(densities::psi1_bar(&planar_l, &eta)? - h(&planar_l)?).abs(),
        );
    }
    Ok(t.rows)
}

fn cell(samples: usize, n: usize, seed: u64) -> Result<Vec<Row>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<(CellProblem, f64)> = (0..samples)
        .map(|k| {
            if k % 2 == 0 {
                let (a, b) = (planar(&mut rng), planar(&mut rng));
                let seq = Sequence::staircase_trace(a, b);
                let competitor = seq
                    .build(n)
                    .and_then(|f| f.trapezoid_energy(Some(&seq.datum())))
                    .unwrap_or(f64::INFINITY);
                (CellProblem::new(CellKind::W3d2dSd, n).with_a(a).with_b(b), competitor)
            } else {
                let lambda = vector(&mut rng);
                let eta = unit2(&mut rng);
                // The step datum itself is feasible on the aligned mesh.
                let competitor = densities::h_3d2d_closed(&lambda, &eta).unwrap_or(f64::INFINITY);
                let p = CellProblem::new(CellKind::H3d2d, n)
                    .with_lambda(lambda)
                    .with_orientation(&eta);
                (p, competitor)
            }
        })
        .collect();
    instances
        .par_iter()
        .enumerate()
        .map(|(i, (p, competitor))| {
            let r = solve(p)?;
            let floor = p.closed_form().expect("interfacial kinds have closed forms");
            let margin = (r.value - (floor - 1e-9)).min(competitor + 1e-9 - r.value);
            Ok(Row {
                suite: "cell",
                check: format!("{} #{i}", p.kind),
                value: r.value,
                floor,
                gap: competitor - floor,
                margin,
                passed: margin >= 0.0 && r.lower_bound_certified,
            })
        })
        .collect()
}

fn gauss_green(samples: usize, n: usize, seed: u64) -> Result<Vec<Row>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let eta = unit2(&mut rng);
        let shape = if i % 2 == 0 { CellShape::Quad } else { CellShape::Triangle };
        let mesh = Arc::new(Mesh::uniform(2, n.max(1), &eta, shape)?);
        let field = SbvField::from_fn(mesh, |_| {
            (Matrix3::from_fn(|_, _| rng.random_range(-RANGE..RANGE)), vector(&mut rng))
        });
        let residual = field.gauss_green_residual().max_norm();
        let allowed = 1e-10 * (1.0 + field.scale());
        rows.push(Row {
            suite: "gauss-green",
            check: format!("{shape:?} #{i}"),
            value: residual,
            floor: 0.0,
            gap: allowed,
            margin: allowed - residual,
            passed: residual <= allowed,
        });
    }
    Ok(rows)
}

pub fn run(args: &VerifyArgs, seed: u64) -> Result<Report, Error> {
    let mut rows = Vec::new();
    if matches!(args.suite, Suite::ClosedForms | Suite::All) {
        rows.extend(closed_forms(args.samples, seed)?);
    }
    if matches!(args.suite, Suite::Cell | Suite::All) {
        rows.extend(cell(args.samples, args.n, seed)?);
    }
    if matches!(args.suite, Suite::GaussGreen | Suite::All) {
        rows.extend(gauss_green(args.samples, args.n, seed)?);
    }
    let ok = rows.iter().all(|r| r.passed);
    let failed = rows.iter().filter(|r| !r.passed).count();
    let mut csv = String::from("suite,check,value,floor,gap,margin,passed\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{:e},{:e},{:e},{:e},{}",
            r.suite, r.check, r.value, r.floor, r.gap, r.margin, r.passed
        );
    }
    Ok(Report {
        json: serde_json::json!({ "seed": seed, "samples": args.samples, "passed": ok, "rows": rows }),
        csv,
        ok,
        summary: format!("{} checks, {failed} failed", rows.len()),
        default_csv: false,
    })
}
