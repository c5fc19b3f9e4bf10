//! Convex hull volumes of small point sets.
//!
//! Facets are found by brute force over `d`-subsets of the points; the volume
//! is the cone decomposition `sum_F dist(c, F) vol_{d-1}(F) / d` around an
//! interior point `c`, recursing into each facet. Intended for a few dozen
//! points in dimension at most 4.

use itertools::Itertools;
use nalgebra::DMatrix;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dimension of the affine hull of `points`.
pub fn affine_rank(points: &[Vec<f64>], tol: f64) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let d = points[0].len();
    let m = DMatrix::from_fn(points.len() - 1, d, |r, c| points[r + 1][c] - points[0][c]);
    crate::linalg::svd_rank(&m, tol)
}

/// Unit normal to the hyperplane through `d` points in `R^d`, from cofactors.
fn hyperplane_normal(pts: &[&Vec<f64>]) -> Option<Vec<f64>> {
    let d = pts[0].len();
    let rows: Vec<Vec<f64>> = pts[1..].iter().map(|p| sub(p, pts[0])).collect();
    let scale: f64 = rows.iter().map(|r| norm(r)).product();
    if scale == 0.0 {
        return None;
    }
    let mut n = vec![0.0; d];
    for (i, ni) in n.iter_mut().enumerate() {
        let minor = DMatrix::from_fn(d - 1, d - 1, |r, c| rows[r][if c < i { c } else { c + 1 }]);
        let det = if d == 1 { 1.0 } else { minor.determinant() };
        *ni = if i % 2 == 0 { det } else { -det };
    }
    let len = norm(&n);
    if len <= 1e-10 * scale {
        return None;
    }
    Some(n.iter().map(|x| x / len).collect())
}

/// Orthonormal basis of the complement of the unit vector `u`.
fn complement_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut basis: Vec<Vec<f64>> = vec![u.to_vec()];
    for i in 0..d {
        let mut v: Vec<f64> = (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let l = norm(&v);
        if l > 1e-8 {
            basis.push(v.iter().map(|x| x / l).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

fn dedup(points: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out.iter().any(|q| norm(&sub(p, q)) <= tol) {
            out.push(p.clone());
        }
    }
    out
}

/// `d`-dimensional volume of the convex hull of `points` in `R^d`.
pub fn hull_volume(points: &[Vec<f64>]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    let d = first.len();
    let scale = points.iter().map(|p| norm(p)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-10 * scale;
    let pts = dedup(points, tol);
    if d == 0 {
        return 1.0;
    }
    if d == 1 {
        let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return hi - lo;
    }
    if pts.len() <= d || affine_rank(&pts, 1e-10) < d {
        return 0.0;
    }
    let centroid: Vec<f64> = (0..d).map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64).collect();
    let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
    for subset in pts.iter().combinations(d) {
        let Some(mut u) = hyperplane_normal(&subset) else { continue };
        let mut b = dot(&u, subset[0]);
        if dot(&u, &centroid) > b {
            u.iter_mut().for_each(|x| *x = -*x);
            b = -b;
        }
        if pts.iter().all(|p| dot(&u, p) <= b + tol) {
            let known = facets.iter().any(|(v, c)| norm(&sub(v, &u)) < 1e-8 && (c - b).abs() <= tol);
            if !known {
                facets.push((u, b));
            }
        }
    }
    let mut volume = 0.0;
    for (u, b) in &facets {
        let on_plane: Vec<&Vec<f64>> = pts.iter().filter(|p| (dot(u, p) - b).abs() <= tol).collect();
        let basis = complement_basis(u);
        let projected: Vec<Vec<f64>> = on_plane.iter().map(|p| basis.iter().map(|e| dot(e, p)).collect()).collect();
        let height = b - dot(u, &centroid);
        volume += height * hull_volume(&projected) / d as f64;
    }
    volume
}

/// Euclidean volume of the simplex with the given `d + 1` vertices in `R^d`.
pub fn simplex_volume(vertices: &[Vec<f64>]) -> f64 {
    let d = vertices.len() - 1;
    let m = DMatrix::from_fn(d, d, |r, c| vertices[r + 1][c] - vertices[0][c]);
    let fact: f64 = (1..=d).map(|i| i as f64).product();
    m.determinant().abs() / fact
}

/// Points of a polytope approximating the unit ball: a regular `m`-gon in the
/// plane, a Fibonacci lattice on the sphere in dimension 3, `{-1, 1}` on the line.
/// Dimensions above 3 are not supported.
pub fn ball_polytope(d: usize, m: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => (0..m)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => panic!("ball polytopes are provided for dimensions 1..=3, got {d}"),
    }
}
