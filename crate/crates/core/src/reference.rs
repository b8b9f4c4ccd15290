//! Closed-form sphere solutions used as ground truth.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Dipole, MU0_OVER_4PI};
use crate::meg::Coil;
use crate::mesh::SphereModel;
use crate::quadrature::gauss_legendre;

/// Stop once a term's envelope falls below this fraction of the partial sum.
pub const SERIES_TOL: f64 = 1e-10;
pub const SERIES_MAX_TERMS: usize = 1000;
/// Fail when the last envelope ratio at `SERIES_MAX_TERMS` is above this.
pub const SERIES_FAIL: f64 = 1e-6;

/// Per-degree radial factors of a concentric-shell conductor with a source in the
/// innermost shell.
///
/// In shell `j` the degree-`n` potential is `β_j r^{-(n+1)} (P_j (r/r_j)^{2n+1} + 1)`;
/// `gain[j] = β_j / β_0` and `refl[j] = P_j`. Radii in meters.
#[derive(Clone, Debug)]
struct Degree {
    gain: Vec<f64>,
    refl: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MultilayerSphere {
    radii: Vec<f64>,
    sigma: Vec<f64>,
    center: Vector3<f64>,
    degrees: Vec<Degree>,
}

impl MultilayerSphere {
    pub fn new(model: &SphereModel) -> Result<Self> {
        model.validate()?;
        let radii: Vec<f64> = model.layer_radii.iter().map(|r| r * 1e-3).collect();
        let sigma = model.layer_conductivities.to_vec();
        let degrees = (0..=SERIES_MAX_TERMS).map(|n| degree(&radii, &sigma, n)).collect();
        Ok(Self {
            radii,
            sigma,
            center: model.center_m(),
            degrees,
        })
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn conductivities(&self) -> &[f64] {
        &self.sigma
    }

    pub fn center(&self) -> &Vector3<f64> {
        &self.center
    }

    /// Potential at `x` (meters), which must lie outside the innermost-shell radius
    /// of the source or on any interface beyond it.
    pub fn potential(&self, dipole: &Dipole, x: &Vector3<f64>) -> Result<f64> {
        let r0v = dipole.position - self.center;
        let rv = x - self.center;
        let r0 = r0v.norm();
        let r = rv.norm();
        if r0 >= self.radii[0] - 1e-9 {
            return Err(Error::Config(format!("dipole radius {r0} m is not inside the innermost shell")));
        }
        if r <= r0 {
            return Err(Error::Config("evaluation point is not outside the source radius".into()));
        }
        let shell = self
            .radii
            .iter()
            .position(|&ri| r <= ri * (1.0 + 1e-12))
            .ok_or_else(|| Error::Config(format!("radius {r} m is outside the model")))?;
        let e = rv / r;
        let r0hat = if r0 > 0.0 { r0v / r0 } else { Vector3::z() };
        let cos = r0hat.dot(&e).clamp(-1.0, 1.0);
        let m_r0 = dipole.moment.dot(&r0hat);
        let m_e = dipole.moment.dot(&e);
        let t = r0 / r;
        let rj = self.radii[shell];

        let (mut p_prev, mut p) = (1.0, cos);
        let (mut dp_prev, mut dp) = (0.0, 1.0);
        let mut tpow = 1.0;
        let mut sum = 0.0;
        let mut ratio = f64::INFINITY;
        for n in 1..=SERIES_MAX_TERMS {
            let nf = n as f64;
            let d = &self.degrees[n];
            let h = d.gain[shell] * (d.refl[shell] * (r / rj).powi(2 * n as i32 + 1) + 1.0);
            let angular = nf * p * m_r0 + dp * (m_e - cos * m_r0);
            sum += h * tpow * angular;
            // |P_n| ≤ 1 and |P_n'| ≤ n(n+1)/2 bound the angular part
            let envelope = h.abs() * tpow * dipole.moment.norm() * (nf + nf * (nf + 1.0));
            ratio = envelope / sum.abs().max(f64::MIN_POSITIVE);
            if ratio < SERIES_TOL {
                break;
            }
            let p_next = ((2.0 * nf + 1.0) * cos * p - nf * p_prev) / (nf + 1.0);
            let dp_next = dp_prev + (2.0 * nf + 1.0) * p;
            p_prev = p;
            p = p_next;
            dp_prev = dp;
            dp = dp_next;
            tpow *= t;
        }
        if ratio > SERIES_FAIL {
            return Err(Error::SeriesNoConvergence(ratio));
        }
        Ok(sum / (4.0 * PI * self.sigma[0] * r * r))
    }
}

fn degree(radii: &[f64], sigma: &[f64], n: usize) -> Degree {
    let k = radii.len();
    let mut gain = vec![1.0; k];
    let mut refl = vec![0.0; k];
    if n == 0 {
        return Degree { gain, refl };
    }
    let nf = n as f64;
    let e = 2 * n as i32 + 1;
    refl[k - 1] = (nf + 1.0) / nf;
    // walk inward: interface j separates shell j and j+1
    let mut ratio = vec![1.0; k];
    for j in (0..k - 1).rev() {
        let x = refl[j + 1] * (radii[j] / radii[j + 1]).powi(e);
        let f = x + 1.0;
        let g = sigma[j + 1] / sigma[j] * (nf * x - (nf + 1.0));
        let den = nf * f - g;
        refl[j] = ((nf + 1.0) * f + g) / den;
        ratio[j + 1] = (2.0 * nf + 1.0) / den;
    }
    for j in 1..k {
        gain[j] = gain[j - 1] * ratio[j];
    }
    Degree { gain, refl }
}

/// Potentials at the given points of the outer surface.
pub fn sphere_eeg_analytic(model: &SphereModel, dipole: &Dipole, electrodes: &[Vector3<f64>]) -> Result<Vec<f64>> {
    let s = MultilayerSphere::new(model)?;
    electrodes.iter().map(|x| s.potential(dipole, x)).collect()
}

/// Potential of a dipole at the surface of a homogeneous sphere, in closed form.
pub fn homogeneous_sphere_potential(radius: f64, sigma: f64, center: &Vector3<f64>, dipole: &Dipole, x: &Vector3<f64>) -> f64 {
    let r = x - center;
    let r0 = dipole.position - center;
    let d = r - r0;
    let dn = d.norm();
    let f = d * (2.0 / (dn * dn * dn))
        + (r * dn + d * radius) / (radius * dn * (radius * dn + radius * radius - r0.dot(&r)));
    dipole.moment.dot(&f) / (4.0 * PI * sigma)
}

/// Field of a dipole in a spherically symmetric conductor.
pub fn sphere_meg_analytic(dipole: &Dipole, center: &Vector3<f64>, coils: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
    let r0 = dipole.position - center;
    let qr0 = dipole.moment.cross(&r0);
    coils
        .iter()
        .map(|c| {
            let r = c - center;
            let rn = r.norm();
            if rn == 0.0 {
                return Err(Error::Config("coil at the sphere center".into()));
            }
            let a = r - r0;
            let an = a.norm();
            let f = an * (rn * an + rn * rn - r0.dot(&r));
            let grad_f = r * (an * an / rn + a.dot(&r) / an + 2.0 * an + 2.0 * rn) - r0 * (an + 2.0 * rn + a.dot(&r) / an);
            Ok((qr0 * f - grad_f * qr0.dot(&r)) * (MU0_OVER_4PI / (f * f)))
        })
        .collect()
}

/// Field at `x` by the surface-integral form for piecewise-constant conductors:
/// `B = B0 - μ0/4π Σ_j (σ_j - σ_{j+1}) ∮_{S_j} V n × (x - y)/|x - y|^3 dS`, with `V`
/// from the multilayer series and the spheres integrated by Gauss-Legendre in
/// `cos θ` times the trapezoidal rule in `φ`.
pub fn geselowitz_field(sphere: &MultilayerSphere, dipole: &Dipole, x: &Vector3<f64>, n_theta: usize) -> Result<Vector3<f64>> {
    let (nodes, weights) = gauss_legendre(n_theta);
    let n_phi = 2 * n_theta;
    let c = sphere.center();
    let mut b = crate::fields::primary_b(dipole, x)?;
    let k = sphere.radii().len();
    for j in 0..k {
        let jump = sphere.conductivities()[j] - if j + 1 < k { sphere.conductivities()[j + 1] } else { 0.0 };
        let rad = sphere.radii()[j];
        let mut acc = Vector3::zeros();
        for (ct, wt) in nodes.iter().zip(&weights) {
            let st = (1.0 - ct * ct).sqrt();
            for ip in 0..n_phi {
                let phi = 2.0 * PI * ip as f64 / n_phi as f64;
                let n = Vector3::new(st * phi.cos(), st * phi.sin(), *ct);
                let y = c + n * rad;
                let v = sphere.potential(dipole, &y)?;
                let d = x - y;
                let dn = d.norm();
                acc += n.cross(&d) * (v * wt / (dn * dn * dn));
            }
        }
        b -= acc * (jump * rad * rad * 2.0 * PI / n_phi as f64 * MU0_OVER_4PI);
    }
    Ok(b)
}

/// Deterministic, nearly uniform points on a sphere.
pub fn fibonacci_points(n: usize, radius: f64, center: &Vector3<f64>) -> Vec<Vector3<f64>> {
    if n == 1 {
        return vec![center + Vector3::z() * radius];
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            center + Vector3::new(rho * phi.cos(), rho * phi.sin(), z) * radius
        })
        .collect()
}

/// Electrodes on the outer surface and radial coils, in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub electrodes: Vec<[f64; 3]>,
    pub coils: Vec<[f64; 3]>,
    #[serde(default)]
    pub center: [f64; 3],
}

impl SensorLayout {
    /// Fibonacci electrodes on the outer sphere and coils at `coil_radius` meters.
    pub fn for_sphere(model: &SphereModel, n_electrodes: usize, n_coils: usize, coil_radius: f64) -> Result<Self> {
        let c = model.center_m();
        if coil_radius <= model.outer_radius_m() {
            return Err(Error::Config("coil radius must exceed the outer radius".into()));
        }
        Ok(Self {
            electrodes: fibonacci_points(n_electrodes, model.outer_radius_m(), &c).iter().map(|p| [p.x, p.y, p.z]).collect(),
            coils: fibonacci_points(n_coils, coil_radius, &c).iter().map(|p| [p.x, p.y, p.z]).collect(),
            center: [c.x, c.y, c.z],
        })
    }

    pub fn electrode_points(&self) -> Vec<Vector3<f64>> {
        self.electrodes.iter().map(|p| Vector3::from(*p)).collect()
    }

    /// Coils oriented radially about the layout center.
    pub fn coil_set(&self) -> Vec<Coil> {
        let c = Vector3::from(self.center);
        self.coils.iter().map(|p| Coil::radial(Vector3::from(*p), &c)).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
