//! Flat pieces of codimension one (segments in the plane, convex polygons in
//! space) and exact integration of affine integrands over them.
//!
//! Every interface of a mesh is such a piece. The integrands that appear in
//! the energies are absolute values of affine functions, which are integrated
//! exactly by cutting the piece along the zero set of the affine function.

use nalgebra::Vector3;

pub type Point = Vector3<f64>;

/// Length of a segment or area of a convex polygon.
pub fn measure(points: &[Point]) -> f64 {
    match points.len() {
        0 | 1 => 0.0,
        2 => (points[1] - points[0]).norm(),
        _ => fan(points).map(|(a, b, c)| triangle_area(a, b, c)).sum(),
    }
}

pub fn centroid(points: &[Point]) -> Point {
    match points.len() {
        0 => Point::zeros(),
        1 | 2 => points.iter().sum::<Point>() / points.len() as f64,
        _ => {
            let mut total = 0.0;
            let mut acc = Point::zeros();
            for (a, b, c) in fan(points) {
                let w = triangle_area(a, b, c);
                acc += (a + b + c) * (w / 3.0);
                total += w;
            }
            if total > 0.0 {
                acc / total
            } else {
                points.iter().sum::<Point>() / points.len() as f64
            }
        }
    }
}

fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn fan(points: &[Point]) -> impl Iterator<Item = (&Point, &Point, &Point)> {
    (1..points.len() - 1).map(move |i| (&points[0], &points[i], &points[i + 1]))
}

/// Exact integral of the affine function with the given vertex values.
pub fn integrate_affine(points: &[Point], values: &[f64]) -> f64 {
    debug_assert_eq!(points.len(), values.len());
    match points.len() {
        0 | 1 => 0.0,
        2 => measure(points) * 0.5 * (values[0] + values[1]),
        _ => (1..points.len() - 1)
            .map(|i| {
                triangle_area(&points[0], &points[i], &points[i + 1])
                    * (values[0] + values[i] + values[i + 1])
                    / 3.0
            })
            .sum(),
    }
}

/// Exact integral of `|f|` for affine `f` given by its vertex values.
pub fn integrate_abs_affine(points: &[Point], values: &[f64]) -> f64 {
    debug_assert_eq!(points.len(), values.len());
    let all_nonneg = values.iter().all(|&v| v >= 0.0);
    let all_nonpos = values.iter().all(|&v| v <= 0.0);
    if all_nonneg || all_nonpos {
        return integrate_affine(points, values).abs();
    }
    if points.len() == 2 {
        let (a, b) = (values[0].abs(), values[1].abs());
        return measure(points) * (a * a + b * b) / (2.0 * (a + b));
    }
    let (pos_pts, pos_vals) = clip(points, values, values, true);
    let (neg_pts, neg_vals) = clip(points, values, values, false);
    integrate_affine(&pos_pts, &pos_vals) - integrate_affine(&neg_pts, &neg_vals)
}

/// Keeps the part of the piece where the affine function `s` is `>= 0`
/// (`keep_positive`) or `<= 0`, interpolating `payload` linearly.
pub fn clip(
    points: &[Point],
    s: &[f64],
    payload: &[f64],
    keep_positive: bool,
) -> (Vec<Point>, Vec<f64>) {
    let sign = if keep_positive { 1.0 } else { -1.0 };
    let inside = |v: f64| sign * v >= 0.0;
    let mut out_pts = Vec::with_capacity(points.len() + 1);
    let mut out_vals = Vec::with_capacity(points.len() + 1);
    let k = points.len();
    if k == 2 {
        let (s0, s1) = (s[0], s[1]);
        match (inside(s0), inside(s1)) {
            (true, true) => return (points.to_vec(), payload.to_vec()),
            (false, false) => return (Vec::new(), Vec::new()),
            _ => {
                let t = s0 / (s0 - s1);
                let p = points[0] + (points[1] - points[0]) * t;
                let v = payload[0] + (payload[1] - payload[0]) * t;
                if inside(s0) {
                    return (vec![points[0], p], vec![payload[0], v]);
                }
                return (vec![p, points[1]], vec![v, payload[1]]);
            }
        }
    }
    for i in 0..k {
        let j = (i + 1) % k;
        let (si, sj) = (s[i], s[j]);
        if inside(si) {
            out_pts.push(points[i]);
            out_vals.push(payload[i]);
        }
        if (si > 0.0 && sj < 0.0) || (si < 0.0 && sj > 0.0) {
            let t = si / (si - sj);
            out_pts.push(points[i] + (points[j] - points[i]) * t);
            out_vals.push(payload[i] + (payload[j] - payload[i]) * t);
        }
    }
    if out_pts.len() < 3 {
        return (Vec::new(), Vec::new());
    }
    (out_pts, out_vals)
}

/// Nonnegative vertex weights `w` with `sum_i w_i f(v_i) = ∫ f` for affine `f`
/// and `∫ |f| <= sum_i w_i |f(v_i)|`: the trapezoid rule on segments, the
/// vertex rule on triangles and rectangles, a triangle fan otherwise.
pub fn overestimate_weights(points: &[Point]) -> Vec<f64> {
    let m = measure(points);
    match points.len() {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => vec![0.5 * m; 2],
        3 => vec![m / 3.0; 3],
        4 if is_parallelogram(points) => vec![0.25 * m; 4],
        k => {
            let mut w = vec![0.0; k];
            for i in 1..k - 1 {
                let t = triangle_area(&points[0], &points[i], &points[i + 1]) / 3.0;
                w[0] += t;
                w[i] += t;
                w[i + 1] += t;
            }
            w
        }
    }
}

fn is_parallelogram(p: &[Point]) -> bool {
    let scale = (p[2] - p[0]).norm().max(1e-300);
    ((p[0] + p[2]) - (p[1] + p[3])).norm() <= 1e-12 * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn segment_abs_split_at_sign_change() {
        let pts = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)];
        // f(t) = 2t - 1 on [0,1]: ∫|f| = 1/2
        assert!((integrate_abs_affine(&pts, &[-1.0, 1.0]) - 0.5).abs() < 1e-15);
        // f(t) = 3t - 1: ∫|f| = (1/6) + (2/3)·... = 1/6 + 4/6 = 5/6
        assert!((integrate_abs_affine(&pts, &[-1.0, 2.0]) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn square_abs_matches_fine_midpoint_sum() {
        let pts = [
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(1.0, 1.0, 0.0),
            p(0.0, 1.0, 0.0),
        ];
        let f = |x: f64, y: f64| 0.7 * x - 1.3 * y + 0.2;
        let vals: Vec<f64> = pts.iter().map(|q| f(q.x, q.y)).collect();
        let exact = integrate_abs_affine(&pts, &vals);
        let k = 2000;
        let h = 1.0 / k as f64;
        let mut brute = 0.0;
        for i in 0..k {
            for j in 0..k {
                brute += f((i as f64 + 0.5) * h, (j as f64 + 0.5) * h).abs() * h * h;
            }
        }
        assert!((exact - brute).abs() < 1e-6, "{exact} vs {brute}");
        let w = overestimate_weights(&pts);
        let over: f64 = w.iter().zip(&vals).map(|(w, v)| w * v.abs()).sum();
        assert!(over >= exact);
    }

    #[test]
    fn clip_keeps_area_partition() {
        let pts = [p(0.0, 0.0, 0.0), p(2.0, 0.0, 0.0), p(0.0, 2.0, 0.0)];
        let s = [-1.0, 1.0, 1.0];
        let (a, _) = clip(&pts, &s, &s, true);
        let (b, _) = clip(&pts, &s, &s, false);
        assert!((measure(&a) + measure(&b) - 2.0).abs() < 1e-14);
    }
}
