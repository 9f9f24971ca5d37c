//! Sampled checks of the structural hypotheses on `(W, h)`.
//!
//! Every hypothesis becomes a margin `rhs − lhs` that must be nonnegative;
//! the most negative margin seen is kept together with the sample that
//! produced it, so every failure carries a witness that can be re-evaluated.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::densities::DensityPair;

/// Sampling range for matrix and vector entries.
pub const RANGE: f64 = 10.0;
const T_RANGE: (f64, f64) = (0.1, 2.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    /// `|A|^p / c_W ≤ W(A)`.
    H1Coercivity,
    /// `|W(A) − W(B)| ≤ c_W |A−B| (1 + |A|^{p−1} + |B|^{p−1})`.
    H1Growth,
    /// `h(λ, ν) ≤ c_h |λ|`.
    H2Upper,
    /// `|λ| / c_h ≤ h(λ, ν)`.
    H2Lower,
    /// `h(tλ, ν) = t h(λ, ν)`.
    H3,
    /// `h(λ₁ + λ₂, ν) ≤ h(λ₁, ν) + h(λ₂, ν)`.
    H4,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 6] = [
        Hypothesis::H1Coercivity,
        Hypothesis::H1Growth,
        Hypothesis::H2Upper,
        Hypothesis::H2Lower,
        Hypothesis::H3,
        Hypothesis::H4,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::H1Coercivity => "H1-coercivity",
            Hypothesis::H1Growth => "H1-growth",
            Hypothesis::H2Upper => "H2-upper",
            Hypothesis::H2Lower => "H2-lower",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Witness {
    Bulk { a: Matrix3<f64> },
    BulkPair { a: Matrix3<f64>, b: Matrix3<f64> },
    Surface { lambda: Vector3<f64>, nu: Vector3<f64> },
    Homogeneity { lambda: Vector3<f64>, nu: Vector3<f64>, t: f64 },
    Subadditivity { l1: Vector3<f64>, l2: Vector3<f64>, nu: Vector3<f64> },
}

/// Tolerance-adjusted margin; negative means violated.
pub fn margin(h: Hypothesis, w: &Witness, d: &DensityPair) -> f64 {
    let tol = |x: f64| 1e-12 * (1.0 + x.abs());
    match (h, w) {
        (Hypothesis::H1Coercivity, Witness::Bulk { a }) => {
            let lhs = a.norm().powf(d.p) / d.c_w;
            let rhs = d.bulk.eval(a);
            rhs - lhs + tol(rhs)
        }
        (Hypothesis::H1Growth, Witness::BulkPair { a, b }) => {
            let lhs = (d.bulk.eval(a) - d.bulk.eval(b)).abs();
            let q = d.p - 1.0;
            let rhs = d.c_w * (a - b).norm() * (1.0 + a.norm().powf(q) + b.norm().powf(q));
            rhs - lhs + tol(rhs)
        }
        (Hypothesis::H2Upper, Witness::Surface { lambda, nu }) => {
            let rhs = d.c_h * lambda.norm();
            rhs - d.surface.eval(lambda, nu) + tol(rhs)
        }
        (Hypothesis::H2Lower, Witness::Surface { lambda, nu }) => {
            let h = d.surface.eval(lambda, nu);
            h - lambda.norm() / d.c_h + tol(h)
        }
        (Hypothesis::H3, Witness::Homogeneity { lambda, nu, t }) => {
            let lhs = d.surface.eval(&(lambda * *t), nu);
            let rhs = t * d.surface.eval(lambda, nu);
            tol(rhs) - (lhs - rhs).abs()
        }
        (Hypothesis::H4, Witness::Subadditivity { l1, l2, nu }) => {
            let lhs = d.surface.eval(&(l1 + l2), nu);
            let rhs = d.surface.eval(l1, nu) + d.surface.eval(l2, nu);
            rhs - lhs + tol(rhs)
        }
        _ => f64::NAN,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisEntry {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    pub violations: usize,
    /// Smallest margin over all samples (negative when violated).
    pub worst_margin: f64,
    /// Worst violating sample, present iff the entry failed.
    pub witness: Option<Witness>,
}

impl HypothesisEntry {
    /// Re-evaluates the witness; true iff it still violates the hypothesis.
    pub fn recheck(&self, density: &DensityPair) -> bool {
        self.witness
            .as_ref()
            .is_some_and(|w| margin(self.hypothesis, w, density) < 0.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
    pub samples: usize,
    pub seed: u64,
}

impl HypothesisReport {
    pub fn entry(&self, h: Hypothesis) -> &HypothesisEntry {
        self.entries
            .iter()
            .find(|e| e.hypothesis == h)
            .expect("all hypotheses are checked")
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

fn vec3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-RANGE..RANGE))
}

fn mat3(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    Matrix3::from_fn(|_, _| rng.random_range(-RANGE..RANGE))
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

struct Tracker {
    h: Hypothesis,
    violations: usize,
    worst: f64,
    witness: Option<Witness>,
}

impl Tracker {
    fn new(h: Hypothesis) -> Self {
        Self {
            h,
            violations: 0,
            worst: f64::INFINITY,
            witness: None,
        }
    }

    fn probe(&mut self, w: Witness, d: &DensityPair) {
        let m = margin(self.h, &w, d);
        let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
        if m < 0.0 {
            self.violations += 1;
        }
        if m < self.worst {
            self.worst = m;
            if m < 0.0 {
                self.witness = Some(w);
            }
        }
    }

    fn finish(self) -> HypothesisEntry {
        HypothesisEntry {
            hypothesis: self.h,
            passed: self.violations == 0,
            violations: self.violations,
            worst_margin: self.worst,
            witness: self.witness,
        }
    }
}

/// Checks every hypothesis on `samples` pseudo-random draws.
///
/// The first homogeneity probe uses `t = 2`; the first growth probe for `h`
/// uses `|λ| = 2 c_h`. Output depends only on the density and `seed`.
pub fn check_hypotheses(density: &DensityPair, samples: usize, seed: u64) -> HypothesisReport {
    let samples = samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: Vec<Tracker> = Hypothesis::ALL.iter().map(|&h| Tracker::new(h)).collect();
    for k in 0..samples {
        let a = mat3(&mut rng);
        let b = mat3(&mut rng);
        let mut l1 = vec3(&mut rng);
        let l2 = vec3(&mut rng);
        let nu = unit(&mut rng);
        let s = rng.random_range(T_RANGE.0..T_RANGE.1);
        let tt = if k == 0 { 2.0 } else { s };
        if k == 0 && l1.norm() > 0.0 {
            l1 *= 2.0 * density.c_h / l1.norm();
        }
        t[0].probe(Witness::Bulk { a }, density);
        t[1].probe(Witness::BulkPair { a, b }, density);
        t[2].probe(Witness::Surface { lambda: l1, nu }, density);
        t[3].probe(Witness::Surface { lambda: l1, nu }, density);
        t[4].probe(Witness::Homogeneity { lambda: l1, nu, t: tt }, density);
        t[5].probe(Witness::Subadditivity { l1, l2, nu }, density);
    }
    HypothesisReport {
        entries: t.into_iter().map(Tracker::finish).collect(),
        samples,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{FnSurface, ZeroBulk};
    use std::sync::Arc;

    fn surface_only(f: fn(&Vector3<f64>, &Vector3<f64>) -> f64) -> DensityPair {
        DensityPair::new(
            Arc::new(ZeroBulk),
            Arc::new(FnSurface { name: "fixture".into(), f }),
            2.0,
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let d = DensityPair::interfacial_normal();
        let a = check_hypotheses(&d, 200, 7);
        let b = check_hypotheses(&d, 200, 7);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.worst_margin, y.worst_margin);
            assert_eq!(x.witness, y.witness);
        }
    }

    #[test]
    fn offset_density_breaks_homogeneity_at_t_two() {
        let d = surface_only(|l, n| l.dot(n).abs() + 1.0);
        let r = check_hypotheses(&d, 1000, 0);
        let e = r.entry(Hypothesis::H3);
        assert!(!e.passed);
        assert!(e.recheck(&d));
        assert!(matches!(e.witness, Some(Witness::Homogeneity { t, .. }) if t == 2.0));
    }

    #[test]
    fn quadratic_density_breaks_upper_bound() {
        let d = surface_only(|l, _| l.norm_squared());
        let r = check_hypotheses(&d, 1000, 0);
        let e = r.entry(Hypothesis::H2Upper);
        assert!(!e.passed);
        assert!(e.recheck(&d));
        match &e.witness {
            Some(Witness::Surface { lambda, .. }) => assert!(lambda.norm() > d.c_h),
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn normal_jump_upper_homogeneous_subadditive() {
        let d = DensityPair::interfacial_normal();
        let r = check_hypotheses(&d, 1000, 0);
        for h in [Hypothesis::H2Upper, Hypothesis::H3, Hypothesis::H4] {
            assert!(r.entry(h).passed, "{h:?}");
        }
        // |λ·ν| vanishes for λ ⊥ ν, so no positive c_h gives the lower bound.
        assert!(!r.entry(Hypothesis::H2Lower).passed);
    }
}
