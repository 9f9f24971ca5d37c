use std::sync::Arc;

use nalgebra::{Matrix3, Matrix3x2, Vector3};
use proptest::prelude::*;

use sdrelax::densities::{self, psi1_bar};
use sdrelax::functionals::{eval_left, eval_right, StructuredTriple};
use sdrelax::io;
use sdrelax::lp::L1Problem;
use sdrelax::{CellShape, Mesh, SbvField};

fn entry() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn planar() -> impl Strategy<Value = Matrix3x2<f64>> {
    prop::array::uniform6(entry()).prop_map(|a| Matrix3x2::from_row_slice(&a))
}

fn vector() -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(entry()).prop_map(|a| Vector3::from_row_slice(&a))
}

fn angle() -> impl Strategy<Value = f64> {
    0.0..std::f64::consts::TAU
}

fn shape2() -> impl Strategy<Value = CellShape> {
    prop_oneof![Just(CellShape::Quad), Just(CellShape::Triangle)]
}

fn random_field(mesh: Arc<Mesh>, seed: &[f64]) -> SbvField {
    SbvField::from_fn(mesh, |i| {
        let s = |k: usize| seed[(i * 7 + k) % seed.len()] * (1.0 + (i % 3) as f64);
        (Matrix3::from_fn(|r, c| s(r * 3 + c)), Vector3::new(s(1), s(4), s(6)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_agree_bitwise(a in planar(), b in planar(), d in vector()) {
        prop_assert_eq!(densities::w_3d2d_sd_closed(&a, &b), densities::w_3dsd2d_closed(&a, &b, &d));
        prop_assert_eq!(densities::w_3dsd_closed(&densities::append_column(&a, &d), &a), 0.0);
    }

    #[test]
    fn surface_closed_form_homogeneous_subadditive(l1 in vector(), l2 in vector(), t in 0.1..5.0f64, th in angle()) {
        let eta = [th.cos(), th.sin()];
        let h = |l: &Vector3<f64>| densities::h_3d2d_closed(l, &eta).unwrap();
        prop_assert!((h(&(l1 * t)) - t * h(&l1)).abs() <= 1e-12 * (1.0 + t * h(&l1)));
        prop_assert!(h(&(l1 + l2)) <= h(&l1) + h(&l2) + 1e-12);
    }

    #[test]
    fn relaxed_surface_below_every_tilt(l in vector(), th in angle(), s in -20.0..20.0f64) {
        let eta = [th.cos(), th.sin()];
        let tilted = Vector3::new(eta[0], eta[1], s);
        let value = psi1_bar(&l, &eta).unwrap();
        prop_assert!(value <= l.dot(&tilted).abs() + 1e-9);
    }

    #[test]
    fn meshes_tile_the_cell(n in 1usize..12, th in angle(), shape in shape2()) {
        let mesh = Mesh::uniform(2, n, &[th.cos(), th.sin()], shape).unwrap();
        prop_assert!((mesh.total_measure() - 1.0).abs() < 1e-12);
        let boundary: f64 = mesh.boundary_faces().iter().map(|f| f.measure).sum();
        prop_assert!((boundary - 4.0).abs() < 1e-12);
        for c in mesh.cells() {
            prop_assert_eq!(mesh.locate(&c.centroid), mesh.cells().iter().position(|d| d.centroid == c.centroid));
        }
    }

    #[test]
    fn gauss_green_vanishes(n in 1usize..10, th in angle(), shape in shape2(), seed in prop::collection::vec(entry(), 16)) {
        let mesh = Arc::new(Mesh::uniform(2, n, &[th.cos(), th.sin()], shape).unwrap());
        let f = random_field(mesh, &seed);
        prop_assert!(f.gauss_green_residual().max_norm() <= 1e-10 * (1.0 + f.scale()));
    }

    #[test]
    fn field_file_round_trip(n in 1usize..5, th in angle(), shape in shape2(), seed in prop::collection::vec(entry(), 16)) {
        let mesh = Arc::new(Mesh::uniform(2, n, &[th.cos(), th.sin()], shape).unwrap());
        let f = random_field(mesh, &seed);
        let back = io::parse_field(&io::field_to_json(&f).unwrap()).unwrap();
        for (a, b) in f.offsets().iter().zip(back.offsets()) {
            prop_assert!((a - b).amax() <= 1e-15 * (1.0 + a.amax()));
        }
    }

    #[test]
    fn left_and_right_functionals_coincide(n in 1usize..6, seed in prop::collection::vec(entry(), 16), g in planar(), d in vector()) {
        let mesh = Arc::new(Mesh::uniform(2, n, &[1.0, 0.0], CellShape::Quad).unwrap());
        let f = random_field(mesh, &seed);
        let cells = n * n;
        let t = StructuredTriple::new(f, vec![g; cells], vec![d; cells]).unwrap();
        prop_assert_eq!(eval_left(&t), eval_right(&t));
        let t2 = t.clone().with_d(vec![d * 3.0 + Vector3::x(); cells]).unwrap();
        prop_assert_eq!(eval_left(&t), eval_left(&t2));
    }

    #[test]
    fn l1_matches_weighted_median(points in prop::collection::vec((entry(), 0.1..3.0f64), 1..12)) {
        // min_x Σ w_i |x − p_i| is attained at a weighted median.
        let mut prob = L1Problem::new(1);
        for (p, w) in &points {
            prob.add_term(&[(0, 1.0)], -p, *w);
        }
        let sol = prob.solve().unwrap();
        let cost = |x: f64| points.iter().map(|(p, w)| w * (x - p).abs()).sum::<f64>();
        let best = points.iter().map(|(p, _)| cost(*p)).fold(f64::INFINITY, f64::min);
        prop_assert!((sol.objective - best).abs() <= 1e-9 * (1.0 + best));
        prop_assert!((cost(sol.x[0]) - sol.objective).abs() <= 1e-9 * (1.0 + best));
    }
}
