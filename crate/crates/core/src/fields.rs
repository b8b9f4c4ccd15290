//! Dipole potential in an unbounded homogeneous conductor and the primary magnetic field.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// μ0 / 4π in T·m/A.
pub const MU0_OVER_4PI: f64 = 1e-7;

/// Evaluations closer to the dipole than this raise [`Error::AtSingularity`].
pub const SINGULARITY_GUARD: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    pub position: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Dipole {
    pub fn new(position: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self { position, moment }
    }

    pub fn with_moment(&self, moment: Vector3<f64>) -> Self {
        Self {
            position: self.position,
            moment,
        }
    }
}

/// Conductivity of the unbounded medium with cached derived quantities.
#[derive(Clone, Debug)]
pub struct HomogeneousConductivity {
    sigma: Matrix3<f64>,
    inverse: Matrix3<f64>,
    det: f64,
    inv_sqrt: Matrix3<f64>,
    isotropic: Option<f64>,
}

impl HomogeneousConductivity {
    pub fn new(sigma: Matrix3<f64>) -> Result<Self> {
        if (sigma - sigma.transpose()).abs().max() > 1e-12 * sigma.abs().max() {
            return Err(Error::InvalidConductivity("tensor is not symmetric".into()));
        }
        let eig = sigma.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidConductivity(
                "tensor is not positive definite".into(),
            ));
        }
        let q = eig.eigenvectors;
        let inv_sqrt =
            q * Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose();
        let inverse = q * Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l)) * q.transpose();
        let s = sigma[(0, 0)];
        let isotropic = ((sigma - Matrix3::identity() * s).abs().max() <= 1e-12 * s).then_some(s);
        Ok(Self {
            sigma,
            inverse,
            det: eig.eigenvalues.product(),
            inv_sqrt,
            isotropic,
        })
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(Matrix3::identity() * sigma)
    }

    pub fn tensor(&self) -> &Matrix3<f64> {
        &self.sigma
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn inv_sqrt(&self) -> &Matrix3<f64> {
        &self.inv_sqrt
    }

    /// The scalar value when the tensor is a multiple of the identity.
    pub fn scalar(&self) -> Option<f64> {
        self.isotropic
    }
}

fn offset(dipole: &Dipole, x: &Vector3<f64>) -> Result<Vector3<f64>> {
    let r = x - dipole.position;
    let n = r.norm();
    if n < SINGULARITY_GUARD {
        return Err(Error::AtSingularity(n));
    }
    Ok(r)
}

/// Potential of the dipole in the unbounded medium.
pub fn u_infinity(cond: &HomogeneousConductivity, dipole: &Dipole, x: &Vector3<f64>) -> Result<f64> {
    let r = offset(dipole, x)?;
    if let Some(s) = cond.isotropic {
        let n = r.norm();
        return Ok(dipole.moment.dot(&r) / (4.0 * PI * s * n * n * n));
    }
    let sr = cond.inverse * r;
    let q = r.dot(&sr);
    Ok(dipole.moment.dot(&sr) / (4.0 * PI * cond.det.sqrt() * q * q.sqrt()))
}

/// Gradient of [`u_infinity`].
pub fn grad_u_infinity(
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    x: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let r = offset(dipole, x)?;
    let m = &dipole.moment;
    if let Some(s) = cond.isotropic {
        let r2 = r.norm_squared();
        let r3 = r2 * r2.sqrt();
        return Ok((m - r * (3.0 * m.dot(&r) / r2)) / (4.0 * PI * s * r3));
    }
    let sr = cond.inverse * r;
    let q = r.dot(&sr);
    let q3 = q * q.sqrt();
    Ok((cond.inverse * m - sr * (3.0 * m.dot(&sr) / q)) / (4.0 * PI * cond.det.sqrt() * q3))
}

/// Magnetic field of the dipole in free space.
pub fn primary_b(dipole: &Dipole, x: &Vector3<f64>) -> Result<Vector3<f64>> {
    let r = offset(dipole, x)?;
    let n = r.norm();
    Ok(dipole.moment.cross(&r) * (MU0_OVER_4PI / (n * n * n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> (HomogeneousConductivity, Dipole) {
        (
            HomogeneousConductivity::isotropic(1.0).unwrap(),
            Dipole::new(Vector3::zeros(), Vector3::z()),
        )
    }

    #[test]
    fn closed_form_values() {
        let (c, d) = unit();
        let x = Vector3::z();
        assert!((u_infinity(&c, &d, &x).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let g = grad_u_infinity(&c, &d, &x).unwrap();
        assert!((g - Vector3::new(0.0, 0.0, -2.0 / (4.0 * PI))).norm() < 1e-15);
        let zero = d.with_moment(Vector3::zeros());
        assert_eq!(u_infinity(&c, &zero, &Vector3::new(0.3, 1.0, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn singular_point_rejected() {
        let (c, d) = unit();
        assert!(matches!(u_infinity(&c, &d, &Vector3::zeros()), Err(Error::AtSingularity(_))));
        assert!(grad_u_infinity(&c, &d, &Vector3::new(1e-15, 0.0, 0.0)).is_err());
        assert!(primary_b(&d, &Vector3::zeros()).is_err());
    }

    #[test]
    fn anisotropic_change_of_variables() {
        let c = HomogeneousConductivity::new(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 4.0))).unwrap();
        assert!(c.scalar().is_none());
        let d = Dipole::new(Vector3::new(0.1, -0.2, 0.05), Vector3::new(0.3, -1.0, 0.7));
        let x = Vector3::new(0.4, 0.2, -0.6);
        // y = σ^{-1/2}(x-x0), M' = σ^{-1/2}M, u = <M', y>/(4π √det |y|³)
        let y = c.inv_sqrt() * (x - d.position);
        let mp = c.inv_sqrt() * d.moment;
        let expect = mp.dot(&y) / (4.0 * PI * c.det().sqrt() * y.norm().powi(3));
        let got = u_infinity(&c, &d, &x).unwrap();
        assert!(((got - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn cached_quantities_consistent() {
        let s = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5);
        let c = HomogeneousConductivity::new(s).unwrap();
        assert!((c.inverse() * s - Matrix3::identity()).abs().max() < 1e-12);
        assert!((c.inv_sqrt() * c.inv_sqrt() * s - Matrix3::identity()).abs().max() < 1e-12);
        assert!((c.det() - s.determinant()).abs() < 1e-12);
        assert!(HomogeneousConductivity::new(-s).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Matrix3::new(1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 0.33);
        for cond in [HomogeneousConductivity::isotropic(0.33).unwrap(), HomogeneousConductivity::new(s).unwrap()] {
            for _ in 0..100 {
                let d = Dipole::new(
                    Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
                    Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
                );
                let dir = Vector3::<f64>::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
                let x = d.position + dir * rng.gen_range(0.1..2.0);
                let h = 1e-6 * (x - d.position).norm();
                let g = grad_u_infinity(&cond, &d, &x).unwrap();
                let fd = Vector3::from_fn(|i, _| {
                    let e = Vector3::ith(i, h);
                    (u_infinity(&cond, &d, &(x + e)).unwrap() - u_infinity(&cond, &d, &(x - e)).unwrap())
                        / (2.0 * h)
                });
                assert!((g - fd).norm() <= 1e-6 * g.norm(), "{g} {fd}");
            }
        }
    }

    #[test]
    fn harmonic_away_from_source() {
        let s = Matrix3::new(1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 0.33);
        let cond = HomogeneousConductivity::new(s).unwrap();
        let d = Dipole::new(Vector3::zeros(), Vector3::new(0.2, 0.5, -1.0));
        for x in [Vector3::new(0.7, 0.1, 0.2), Vector3::new(-0.3, 0.9, 0.4)] {
            let h = 1e-4 * x.norm();
            // div(σ∇u) by central differences of the flux
            let flux = |y: &Vector3<f64>| s * grad_u_infinity(&cond, &d, y).unwrap();
            let div: f64 = (0..3)
                .map(|i| {
                    let e = Vector3::ith(i, h);
                    (flux(&(x + e))[i] - flux(&(x - e))[i]) / (2.0 * h)
                })
                .sum();
            assert!(div.abs() <= 1e-4 * flux(&x).norm() / x.norm());
        }
    }

    #[test]
    fn flux_through_sphere_decays() {
        let (c, _) = unit();
        let d = Dipole::new(Vector3::new(0.01, 0.0, 0.0), Vector3::new(0.3, 0.4, 1.0));
        // flux of σ∇u∞ through a sphere around the source; exact value is zero
        let flux = |radius: f64| {
            let (t, wt) = crate::quadrature::gauss_legendre(24);
            let mut acc = 0.0;
            for (ct, w1) in t.iter().zip(&wt) {
                let st = (1.0 - ct * ct).sqrt();
                for k in 0..48 {
                    let ph = 2.0 * PI * k as f64 / 48.0;
                    let n = Vector3::new(st * ph.cos(), st * ph.sin(), *ct);
                    let g = grad_u_infinity(&c, &d, &(n * radius)).unwrap();
                    acc += w1 * (2.0 * PI / 48.0) * radius * radius * g.dot(&n);
                }
            }
            acc
        };
        let (a, b) = (flux(1.0).abs(), flux(10.0).abs());
        assert!(a < 1e-10 || b * 8.0 <= a, "{a} {b}");
    }

    #[test]
    fn primary_field() {
        let d = Dipole::new(Vector3::zeros(), Vector3::z());
        let b = primary_b(&d, &Vector3::x()).unwrap();
        assert!((b - Vector3::new(0.0, 1e-7, 0.0)).norm() < 1e-22);
        assert_eq!(primary_b(&d, &Vector3::new(0.0, 0.0, 3.0)).unwrap(), Vector3::zeros());
        let dir = Vector3::new(0.3, -0.4, 0.2);
        let r1 = primary_b(&d, &dir).unwrap().norm();
        let r2 = primary_b(&d, &(dir * 2.0)).unwrap().norm();
        assert!((r1 / r2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn linear_in_moment() {
        let (c, _) = unit();
        let p = Vector3::new(0.1, 0.2, 0.3);
        let (m1, m2) = (Vector3::new(1.0, -2.0, 0.5), Vector3::new(0.3, 0.7, -1.1));
        let x = Vector3::new(1.0, 0.5, -0.25);
        let u = |m| u_infinity(&c, &Dipole::new(p, m), &x).unwrap();
        assert!((u(m1 + m2) - u(m1) - u(m2)).abs() <= 1e-12 * u(m1 + m2).abs());
    }
}
