//! Closed-form transition integral on affine tetrahedra with isotropic σ∞.
//!
//! The volume integral of `∇(χ <M, x - x0> / |x - x0|^3)` is turned into face
//! integrals of `χ (x - x0) / |x - x0|^3`, each evaluated in the local frame of
//! its triangle.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::element::ElementGeometry;
use crate::error::{Error, Result};
use crate::fields::{Dipole, SINGULARITY_GUARD};
use crate::mesh::{ElementKind, TET_FACES};

/// Local-frame quantities of one triangle relative to a source position.
///
/// Edge `i` runs from `p[i+1]` to `p[i+2]` (indices mod 3); `s[i]` is its unit
/// direction, `gamma[i]` its length, `t[i]` the in-plane distance of the projected
/// source to the edge line and `gamma_minus/plus[i]` the signed positions of the
/// edge endpoints along the line, measured from the foot point.
#[derive(Clone, Debug)]
pub struct FaceGeometry {
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
    pub w: Vector3<f64>,
    pub s: [Vector3<f64>; 3],
    pub gamma: [f64; 3],
    pub m: [Vector3<f64>; 3],
    pub u3: f64,
    pub v3: f64,
    pub u0: f64,
    pub v0: f64,
    pub w0: f64,
    pub t: [f64; 3],
    pub gamma_minus: [f64; 3],
    pub gamma_plus: [f64; 3],
    pub r: [f64; 3],
    pub r_minus: [f64; 3],
    pub r_plus: [f64; 3],
    pub f: [f64; 3],
    pub beta_i: [f64; 3],
    pub beta: f64,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub phi0: Vector3<f64>,
}

/// `∫_{γ-}^{γ+} dt / sqrt(R² + t²)`, picking the logarithm form that stays
/// well-conditioned when the source sits on the edge line.
pub fn edge_log(gm: f64, gp: f64, rm: f64, rp: f64) -> f64 {
    if gm >= 0.0 {
        ((rp + gp) / (rm + gm)).ln()
    } else {
        ((rm - gm) / (rp - gp)).ln()
    }
}

/// The same integral using only the first logarithm form.
pub fn edge_log_naive(gm: f64, gp: f64, rm: f64, rp: f64) -> f64 {
    ((rp + gp) / (rm + gm)).ln()
}

fn on_triangle(p: &[Vector3<f64>; 3], x0: &Vector3<f64>) -> bool {
    let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let area2 = n.norm();
    let nh = n / area2;
    if nh.dot(&(x0 - p[0])).abs() > SINGULARITY_GUARD {
        return false;
    }
    let tol = SINGULARITY_GUARD * (p[1] - p[0]).norm().max((p[2] - p[0]).norm());
    (0..3).all(|i| {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        // signed distance of x0 from edge line, positive on the triangle side
        (b - a).cross(&(x0 - a)).dot(&nh) / (b - a).norm() >= -tol
    })
}

impl FaceGeometry {
    pub fn new(p: [Vector3<f64>; 3], x0: &Vector3<f64>) -> Result<Self> {
        if on_triangle(&p, x0) {
            return Err(Error::SourceInDomain);
        }
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        let gamma = e.map(|x| x.norm());
        let s = [e[0] / gamma[0], e[1] / gamma[1], e[2] / gamma[2]];
        let u = s[2];
        let w = s[0].cross(&s[1]).normalize();
        let v = w.cross(&u);
        let m = s.map(|si| si.cross(&w));
        let d3 = p[2] - p[0];
        let d0 = x0 - p[0];
        let (u3, v3) = (u.dot(&d3), v.dot(&d3));
        let (u0, v0) = (u.dot(&d0), v.dot(&d0));
        let w0 = -w.dot(&d0);
        let (g1, g2, g3) = (gamma[0], gamma[1], gamma[2]);
        let t = [
            (v0 * (u3 - g3) + v3 * (g3 - u0)) / g1,
            (u0 * v3 - v0 * u3) / g2,
            v0,
        ];
        let gamma_minus = [
            -((g3 - u0) * (g3 - u3) + v0 * v3) / g1,
            -(u3 * (u3 - u0) + v3 * (v3 - v0)) / g2,
            -u0,
        ];
        let gamma_plus = [
            ((u3 - u0) * (u3 - g3) + v3 * (v3 - v0)) / g1,
            (u0 * u3 + v0 * v3) / g2,
            g3 - u0,
        ];
        let mut r = [0.0; 3];
        let mut r_minus = [0.0; 3];
        let mut r_plus = [0.0; 3];
        let mut f = [0.0; 3];
        let mut beta_i = [0.0; 3];
        for i in 0..3 {
            let r2 = t[i] * t[i] + w0 * w0;
            r[i] = r2.sqrt();
            r_minus[i] = (r2 + gamma_minus[i] * gamma_minus[i]).sqrt();
            r_plus[i] = (r2 + gamma_plus[i] * gamma_plus[i]).sqrt();
            f[i] = edge_log(gamma_minus[i], gamma_plus[i], r_minus[i], r_plus[i]);
            let aw = w0.abs();
            if t[i] == 0.0 {
                // source on the edge line: zero angle, and the formula would read 0/0
                continue;
            }
            beta_i[i] = (t[i] * gamma_plus[i] / (r2 + aw * r_plus[i])).atan()
                - (t[i] * gamma_minus[i] / (r2 + aw * r_minus[i])).atan();
        }
        let beta = beta_i.iter().sum();
        let a = Vector3::new(-1.0 / g3, 1.0 / g3, 0.0);
        let b = Vector3::new((u3 / g3 - 1.0) / v3, -u3 / (g3 * v3), 1.0 / v3);
        let phi0 = Vector3::x() + a * u0 + b * v0;
        Ok(Self {
            u,
            v,
            w,
            s,
            gamma,
            m,
            u3,
            v3,
            u0,
            v0,
            w0,
            t,
            gamma_minus,
            gamma_plus,
            r,
            r_minus,
            r_plus,
            f,
            beta_i,
            beta,
            a,
            b,
            phi0,
        })
    }

    /// Columns: `∫ k`, `∫ z1 k`, `∫ z2 k` over the triangle with `k = (x - x0)/|x - x0|^3`
    /// and `(z1, z2)` the in-plane coordinates relative to the projected source.
    pub fn moments(&self) -> Matrix3<f64> {
        let sign = if self.w0 > 0.0 {
            1.0
        } else if self.w0 < 0.0 {
            -1.0
        } else {
            0.0
        };
        let aw = self.w0.abs();
        let mut m0 = self.w * (sign * self.beta);
        let mut mu = -self.u * (aw * self.beta);
        let mut mv = -self.v * (aw * self.beta);
        let mut su = 0.0;
        let mut sv = 0.0;
        for i in 0..3 {
            let (s, m, f) = (&self.s[i], &self.m[i], self.f[i]);
            m0 -= m * f;
            let edge = s * (f * self.t[i]) - m * (self.r_plus[i] - self.r_minus[i]);
            mu += edge * self.u.dot(s);
            mv += edge * self.v.dot(s);
            su += self.u.dot(m) * f;
            sv += self.v.dot(m) * f;
        }
        mu -= self.w * (su * self.w0);
        mv -= self.w * (sv * self.w0);
        Matrix3::from_columns(&[m0, mu, mv])
    }

    /// `∫_F χ (x - x0)/|x - x0|^3 dS` for affine χ with vertex values `c`.
    pub fn chi_integral(&self, c: &Vector3<f64>) -> Vector3<f64> {
        self.moments() * Vector3::new(self.phi0.dot(c), self.a.dot(c), self.b.dot(c))
    }
}

/// `∫_K <σ ∇(χ u∞), ∇φ_i> dV` for the four basis functions of a tetrahedron.
///
/// `sigma_inf` is the scalar source conductivity; `x0` must lie outside the closed tet.
pub fn transition_integral_analytic_tet(
    pts: &[Vector3<f64>; 4],
    chi: &[f64; 4],
    dipole: &Dipole,
    sigma: &Matrix3<f64>,
    sigma_inf: f64,
) -> Result<[f64; 4]> {
    let geom = ElementGeometry::new(ElementKind::Tet, pts);
    let ElementGeometry::Tet { grads, .. } = &geom else {
        unreachable!()
    };
    let x0 = &dipole.position;
    let centroid = pts.iter().sum::<Vector3<f64>>() / 4.0;
    let mut inside = true;
    let mut total = Vector3::zeros();
    for face in TET_FACES.iter() {
        let p = [pts[face[0]], pts[face[1]], pts[face[2]]];
        let mut eta = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
        if eta.dot(&(p[0] - centroid)) < 0.0 {
            eta = -eta;
        }
        if eta.dot(&(x0 - p[0])) > SINGULARITY_GUARD {
            inside = false;
        }
        if chi.iter().all(|&c| c == 0.0) {
            continue;
        }
        let c = Vector3::new(chi[face[0]], chi[face[1]], chi[face[2]]);
        if c == Vector3::zeros() {
            continue;
        }
        let fg = FaceGeometry::new(p, x0)?;
        total += eta * fg.chi_integral(&c).dot(&dipole.moment);
    }
    if inside {
        return Err(Error::SourceInDomain);
    }
    let flux = sigma * total / (4.0 * PI * sigma_inf);
    Ok([0, 1, 2, 3].map(|i| grads[i].dot(&flux)))
}
