use nalgebra::Vector3;

use super::gauss::gauss_legendre_unit;
use super::{Domain, QuadratureRule};

fn points_for(degree: usize) -> usize {
    degree.div_ceil(2).max(1)
}

/// Duffy-collapsed Gauss rule on the reference triangle.
/// The Jacobian adds one degree in the collapsed direction.
pub(crate) fn collapsed_triangle(order: usize) -> QuadratureRule {
    let (xu, wu) = gauss_legendre_unit(points_for(order + 2));
    let (xv, wv) = gauss_legendre_unit(points_for(order + 1));
    let mut points = Vec::with_capacity(xu.len() * xv.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (u, a) in xu.iter().zip(&wu) {
        for (v, b) in xv.iter().zip(&wv) {
            points.push(Vector3::new(*u, v * (1.0 - u), 0.0));
            weights.push(a * b * (1.0 - u));
        }
    }
    QuadratureRule {
        points,
        weights,
        order,
        domain: Domain::Triangle,
    }
}

/// Duffy-collapsed Gauss rule on the reference tetrahedron.
pub(crate) fn collapsed_tetrahedron(order: usize) -> QuadratureRule {
    let (xu, wu) = gauss_legendre_unit(points_for(order + 3));
    let (xv, wv) = gauss_legendre_unit(points_for(order + 2));
    let (xw, ww) = gauss_legendre_unit(points_for(order + 1));
    let mut points = Vec::with_capacity(xu.len() * xv.len() * xw.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (u, a) in xu.iter().zip(&wu) {
        for (v, b) in xv.iter().zip(&wv) {
            for (w, c) in xw.iter().zip(&ww) {
                let y = v * (1.0 - u);
                let z = w * (1.0 - u) * (1.0 - v);
                points.push(Vector3::new(*u, y, z));
                weights.push(a * b * c * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        order,
        domain: Domain::Tetrahedron,
    }
}

// all vectors of `parts` non-negative integers summing to `total`
fn compositions(total: usize, parts: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    rec(total, parts, &mut Vec::new(), out);
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Grundmann–Möller rule on the reference simplex of dimension `dim` (2 or 3).
///
/// Exact for total degree `2s + 1 >= order`. Weights alternate in sign, and the
/// rule loses accuracy to cancellation at high orders, so the collapsed Gauss rules
/// are the default and this one is kept for cross-checking.
pub fn grundmann_moller(dim: usize, order: usize) -> QuadratureRule {
    assert!(dim == 2 || dim == 3, "simplex dimension must be 2 or 3");
    let s = order.saturating_sub(1).div_ceil(2);
    let d = 2 * s + 1;
    let n = dim;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * 2f64.powi(-2 * s as i32) * denom.powi(d as i32)
            / (factorial(i) * factorial(d + n - i));
        let mut betas = Vec::new();
        compositions(s - i, n + 1, &mut betas);
        for beta in betas {
            let c = |j: usize| (2 * beta[j] + 1) as f64 / denom;
            let p = if n == 2 {
                Vector3::new(c(1), c(2), 0.0)
            } else {
                Vector3::new(c(1), c(2), c(3))
            };
            points.push(p);
            weights.push(w);
        }
    }
    QuadratureRule {
        points,
        weights,
        order: d,
        domain: if n == 2 {
            Domain::Triangle
        } else {
            Domain::Tetrahedron
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gm_weights_sum_to_volume() {
        for order in 0..12 {
            let r = grundmann_moller(3, order);
            assert!((r.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-13, "{order}");
            let r = grundmann_moller(2, order);
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn gm_matches_collapsed_on_polynomial() {
        let f = |p: &Vector3<f64>| p.x.powi(3) * p.y * p.z.powi(2) + p.y.powi(4) - 2.0 * p.x * p.z;
        for order in [6, 7, 9] {
            let a = grundmann_moller(3, order).integrate(f);
            let b = collapsed_tetrahedron(order).integrate(f);
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0), "{order}: {a} {b}");
        }
    }

    #[test]
    fn gm_order_rounds_up_to_odd() {
        assert_eq!(grundmann_moller(3, 4).order, 5);
        assert_eq!(grundmann_moller(2, 0).order, 1);
        assert_eq!(grundmann_moller(3, 1).len(), 1);
    }

    #[test]
    fn collapsed_points_inside() {
        let r = collapsed_tetrahedron(12);
        for p in &r.points {
            assert!(p.min() > 0.0 && p.sum() < 1.0);
        }
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }
}
