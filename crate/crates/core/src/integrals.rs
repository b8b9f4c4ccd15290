//! Quadrature of the singular source terms on one element or face.
//!
//! EEG terms return one value per local basis function; MEG fluxes return a vector.
//! All volume terms integrate over the element, surface terms over one face of it.

use nalgebra::{Matrix3, Vector3};

use crate::element::{ElementGeometry, Local};
use crate::error::{Error, Result};
use crate::fields::{grad_u_infinity, u_infinity, Dipole, HomogeneousConductivity};
use crate::quadrature::rule;

/// Biot–Savart kernel `(x - y) / |x - y|^3` for sensor `x`.
#[inline]
pub fn kernel(coil: &Vector3<f64>, y: &Vector3<f64>) -> Vector3<f64> {
    let d = coil - y;
    let n2 = d.norm_squared();
    d / (n2 * n2.sqrt())
}

/// Whether `sigma_c` vanishes relative to the source conductivity.
pub fn negligible(sigma_c: &Matrix3<f64>, cond: &HomogeneousConductivity) -> bool {
    sigma_c.abs().max() <= 1e-12 * cond.tensor().abs().max()
}

/// `∫_K <σ^c ∇u∞, ∇φ_i> dV`. Zero without evaluating u∞ when σ^c vanishes.
pub fn eeg_patch(
    geom: &ElementGeometry,
    sigma_c: &Matrix3<f64>,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    order: usize,
) -> Result<Local> {
    let mut out = [0.0; 8];
    if negligible(sigma_c, cond) {
        return Ok(out);
    }
    let q = rule(geom.domain(), order)?;
    let det = geom.det();
    match geom {
        ElementGeometry::Tet { grads, .. } => {
            let mut acc = Vector3::zeros();
            for (xi, w) in q.iter() {
                acc += grad_u_infinity(cond, dipole, &geom.map(xi))? * w;
            }
            let flux = sigma_c * acc * det;
            for i in 0..4 {
                out[i] = flux.dot(&grads[i]);
            }
        }
        ElementGeometry::Hex { .. } => {
            for (xi, w) in q.iter() {
                let flux = sigma_c * grad_u_infinity(cond, dipole, &geom.map(xi))? * (w * det);
                let g = geom.grads(xi);
                for i in 0..8 {
                    out[i] += flux.dot(&g[i]);
                }
            }
        }
    }
    Ok(out)
}

/// `σ ∇(χ u∞)` at reference point `xi`, with χ given by its vertex values.
fn chi_flux(
    geom: &ElementGeometry,
    xi: &Vector3<f64>,
    sigma: &Matrix3<f64>,
    chi: &Local,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
) -> Result<Vector3<f64>> {
    let x = geom.map(xi);
    let n = geom.n();
    let phi = geom.shape(xi);
    let g = geom.grads(xi);
    let mut c = 0.0;
    let mut gc = Vector3::zeros();
    for i in 0..n {
        c += chi[i] * phi[i];
        gc += g[i] * chi[i];
    }
    if c == 0.0 && gc == Vector3::zeros() {
        return Ok(Vector3::zeros());
    }
    let u = u_infinity(cond, dipole, &x)?;
    let gu = grad_u_infinity(cond, dipole, &x)?;
    Ok(sigma * (gu * c + gc * u))
}

/// `∫_K <σ ∇(χ u∞), ∇φ_i> dV` by quadrature.
pub fn eeg_transition(
    geom: &ElementGeometry,
    sigma: &Matrix3<f64>,
    chi: &Local,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    order: usize,
) -> Result<Local> {
    let mut out = [0.0; 8];
    let q = rule(geom.domain(), order)?;
    let det = geom.det();
    for (xi, w) in q.iter() {
        let flux = chi_flux(geom, xi, sigma, chi, cond, dipole)? * (w * det);
        let g = geom.grads(xi);
        for i in 0..geom.n() {
            out[i] += flux.dot(&g[i]);
        }
    }
    Ok(out)
}

/// `∫_F <σ∞ ∇u∞, η> φ_i dS` over local face `face`, for every basis function of the element.
pub fn eeg_surface(
    geom: &ElementGeometry,
    face: usize,
    normal: &Vector3<f64>,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    order: usize,
) -> Result<Local> {
    let mut out = [0.0; 8];
    let fm = geom.face(face);
    let q = rule(fm.domain, order)?;
    let sn = cond.tensor() * normal;
    for (st, w) in q.iter() {
        let x = fm.point(st);
        let phi = geom.shape(&fm.element_xi(st));
        let val = grad_u_infinity(cond, dipole, &x)?.dot(&sn) * w * fm.area_jacobian;
        for i in 0..geom.n() {
            out[i] += val * phi[i];
        }
    }
    Ok(out)
}

/// `∫_K σ^c ∇u∞ × k dV`.
pub fn meg_patch(
    geom: &ElementGeometry,
    sigma_c: &Matrix3<f64>,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    coil: &Vector3<f64>,
    order: usize,
) -> Result<Vector3<f64>> {
    if negligible(sigma_c, cond) {
        return Ok(Vector3::zeros());
    }
    let q = rule(geom.domain(), order)?;
    let mut acc = Vector3::zeros();
    for (xi, w) in q.iter() {
        let y = geom.map(xi);
        acc += (sigma_c * grad_u_infinity(cond, dipole, &y)?).cross(&kernel(coil, &y)) * w;
    }
    Ok(acc * geom.det())
}

/// `∫_F σ∞ u∞ η × k dS` over local face `face`. Requires isotropic σ∞.
pub fn meg_surface(
    geom: &ElementGeometry,
    face: usize,
    normal: &Vector3<f64>,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    coil: &Vector3<f64>,
    order: usize,
) -> Result<Vector3<f64>> {
    let s = cond.scalar().ok_or(Error::AnisotropicSource)?;
    let fm = geom.face(face);
    let q = rule(fm.domain, order)?;
    let mut acc = Vector3::zeros();
    for (st, w) in q.iter() {
        let y = fm.point(st);
        acc += normal.cross(&kernel(coil, &y)) * (u_infinity(cond, dipole, &y)? * w);
    }
    Ok(acc * (s * fm.area_jacobian))
}

/// `∫_K σ ∇(χ u∞) × k dV`.
pub fn meg_transition(
    geom: &ElementGeometry,
    sigma: &Matrix3<f64>,
    chi: &Local,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    coil: &Vector3<f64>,
    order: usize,
) -> Result<Vector3<f64>> {
    let q = rule(geom.domain(), order)?;
    let mut acc = Vector3::zeros();
    for (xi, w) in q.iter() {
        let y = geom.map(xi);
        acc += chi_flux(geom, xi, sigma, chi, cond, dipole)?.cross(&kernel(coil, &y)) * w;
    }
    Ok(acc * geom.det())
}
