//! Magnetic fields through the boundary subtraction of the patch flux.
//!
//! `-(4π/μ0) B^S = ∫_Ω σ∇u^c × k + ∫_Ω∞ σ^c∇u∞ × k + ∫_∂Ω∞ σ∞ u∞ η × k + ∫_Ω̃ σ∇(χu∞) × k`
//! with `k = (x - y)/|x - y|^3`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::element::ElementGeometry;
use crate::error::{Error, Result};
use crate::fields::{primary_b, Dipole, HomogeneousConductivity, MU0_OVER_4PI};
use crate::integrals::{kernel, meg_patch, meg_surface, meg_transition, negligible};
use crate::mesh::{distance_edge_ratio, ElementKind, Mesh, Patch};
use crate::parallel::{map_range, map_slice, Execution};
use crate::quadrature::{rule, Domain, OrderPolicy, Problem, Term};
use crate::solver::{cg_solve, CgOptions};
use crate::sparse::{CsrMatrix, SparseVector};

/// Order of the element quadrature in the correction term.
pub const CORRECTION_ORDER: usize = 2;

/// Point magnetometer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coil {
    pub position: Vector3<f64>,
    pub orientation: Option<Vector3<f64>>,
}

impl Coil {
    pub fn new(position: Vector3<f64>, orientation: Option<Vector3<f64>>) -> Result<Self> {
        if let Some(o) = orientation {
            if (o.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("coil orientation has norm {}", o.norm())));
            }
        }
        Ok(Self { position, orientation })
    }

    /// Coil oriented along the direction from `center` to `position`.
    pub fn radial(position: Vector3<f64>, center: &Vector3<f64>) -> Self {
        Self {
            position,
            orientation: Some((position - center).normalize()),
        }
    }
}

/// For each coil, one vector per vertex such that `Σ_j u_j L_j = ∫_Ω σ∇u_h × k dV`.
#[derive(Clone, Debug)]
pub struct LeadVectors {
    pub coils: Vec<Coil>,
    /// `rows[c][j]`: contribution of vertex `j` for coil `c`.
    pub rows: Vec<Vec<Vector3<f64>>>,
}

impl LeadVectors {
    /// `∫_Ω σ∇u × k` for the FEM function with vertex coefficients `u`.
    pub fn apply(&self, coil: usize, u: &[f64]) -> Vector3<f64> {
        self.rows[coil].iter().zip(u).map(|(l, &x)| l * x).sum()
    }

    /// Component `comp` of coil `coil` as a dense vector over vertices.
    pub fn component(&self, coil: usize, comp: usize) -> Vec<f64> {
        self.rows[coil].iter().map(|l| l[comp]).collect()
    }
}

fn check_coils(mesh: &Mesh, coils: &[Coil]) -> Result<()> {
    for (i, c) in coils.iter().enumerate() {
        if mesh.locate_element(&c.position).is_some() {
            return Err(Error::CoilInsideMesh(i));
        }
    }
    Ok(())
}

fn lead_row(mesh: &Mesh, coil: &Vector3<f64>) -> Result<Vec<Vector3<f64>>> {
    let mut row = vec![Vector3::zeros(); mesh.num_vertices()];
    let domain = match mesh.kind() {
        ElementKind::Tet => Domain::Tetrahedron,
        ElementKind::Hex => Domain::Hexahedron,
    };
    let q = rule(domain, CORRECTION_ORDER)?;
    for e in 0..mesh.num_elements() {
        let geom = ElementGeometry::of(mesh, e);
        let sigma = mesh.conductivity(e);
        let el = mesh.element(e);
        match &geom {
            ElementGeometry::Tet { grads, det, .. } => {
                // basis gradients are constant: integrate the kernel once
                let mut kint = Vector3::zeros();
                for (xi, w) in q.iter() {
                    kint += kernel(coil, &geom.map(xi)) * w;
                }
                kint *= *det;
                for (l, &v) in el.iter().enumerate() {
                    row[v] += (sigma * grads[l]).cross(&kint);
                }
            }
            ElementGeometry::Hex { .. } => {
                let det = geom.det();
                for (xi, w) in q.iter() {
                    let k = kernel(coil, &geom.map(xi)) * (w * det);
                    let g = geom.grads(xi);
                    for (l, &v) in el.iter().enumerate() {
                        row[v] += (sigma * g[l]).cross(&k);
                    }
                }
            }
        }
    }
    Ok(row)
}

/// Correction-term lead vectors for a coil set; computed once and reused across dipoles.
pub fn correction_lead_vectors(mesh: &Mesh, coils: &[Coil], exec: Execution) -> Result<LeadVectors> {
    check_coils(mesh, coils)?;
    let rows = map_range(exec, coils.len(), |c| lead_row(mesh, &coils[c].position));
    Ok(LeadVectors {
        coils: coils.to_vec(),
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Patch, surface and transition fluxes `∫σ^c∇u∞×k + ∫σ∞u∞η×k + ∫σ∇(χu∞)×k` for one coil.
pub fn singular_flux(
    mesh: &Mesh,
    patch: &Patch,
    dipole: &Dipole,
    coil: &Vector3<f64>,
    policy: &OrderPolicy,
) -> Result<Vector3<f64>> {
    let cond = HomogeneousConductivity::new(patch.sigma_inf)?;
    if cond.scalar().is_none() {
        return Err(Error::AnisotropicSource);
    }
    let kind = mesh.kind();
    let x0 = &dipole.position;
    let mut total = Vector3::zeros();
    for &e in &patch.patch_elements {
        let sigma_c = mesh.conductivity(e) - cond.tensor();
        if negligible(&sigma_c, &cond) {
            continue;
        }
        let order = policy.order(kind, Problem::Meg, Term::Patch, distance_edge_ratio(mesh, e, x0));
        total += meg_patch(&ElementGeometry::of(mesh, e), &sigma_c, &cond, dipole, coil, order)?;
    }
    let surface_order = policy.order(kind, Problem::Meg, Term::Surface, 1.0);
    for f in &patch.boundary_faces {
        let g = ElementGeometry::of(mesh, f.element);
        total += meg_surface(&g, f.local_face, &f.normal, &cond, dipole, coil, surface_order)?;
    }
    let transition_order = policy.order(kind, Problem::Meg, Term::Transition, 1.0);
    for &e in &patch.transition_elements {
        let mut chi = [0.0; 8];
        for (l, &v) in mesh.element(e).iter().enumerate() {
            chi[l] = patch.chi(v);
        }
        let g = ElementGeometry::of(mesh, e);
        total += meg_transition(&g, mesh.conductivity(e), &chi, &cond, dipole, coil, transition_order)?;
    }
    Ok(total)
}

/// `B^S` at coil `coil` from the correction coefficients `u_c` of one forward solve.
pub fn secondary_field(
    mesh: &Mesh,
    patch: &Patch,
    dipole: &Dipole,
    leads: &LeadVectors,
    coil: usize,
    u_c: &[f64],
    policy: &OrderPolicy,
) -> Result<Vector3<f64>> {
    let flux = leads.apply(coil, u_c) + singular_flux(mesh, patch, dipole, &leads.coils[coil].position, policy)?;
    Ok(-flux * MU0_OVER_4PI)
}

/// `B^P + B^S` and its projection on the coil orientation.
pub fn total_field(primary: &Vector3<f64>, secondary: &Vector3<f64>, coil: &Coil) -> (Vector3<f64>, Option<f64>) {
    let b = primary + secondary;
    (b, coil.orientation.map(|o| o.dot(&b)))
}

/// Solves `K t = L` for every lead component so that the correction term becomes
/// `t · rhs` without a per-dipole solve.
#[derive(Clone, Debug)]
pub struct MegTransfer {
    /// `rows[c][comp]`.
    pub rows: Vec<[Vec<f64>; 3]>,
}

impl MegTransfer {
    pub fn compute(k: &CsrMatrix, leads: &LeadVectors, opts: &CgOptions) -> Result<Self> {
        let inner = CgOptions {
            exec: Execution::Sequential,
            ..*opts
        };
        let jobs: Vec<(usize, usize)> = (0..leads.coils.len()).flat_map(|c| (0..3).map(move |i| (c, i))).collect();
        let solved = map_slice(opts.exec, &jobs, |&(c, i)| {
            let mut b = leads.component(c, i);
            // the lead vectors sum to zero up to rounding; remove that residue
            let m = b.iter().sum::<f64>() / b.len() as f64;
            b.iter_mut().for_each(|v| *v -= m);
            cg_solve(k, &b, &inner).map(|s| s.x)
        });
        let mut it = solved.into_iter();
        let mut rows = Vec::with_capacity(leads.coils.len());
        for _ in 0..leads.coils.len() {
            rows.push([it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?]);
        }
        Ok(Self { rows })
    }

    /// `∫_Ω σ∇u^c × k` for the solution of `K u^c = rhs`.
    pub fn correction(&self, coil: usize, rhs: &SparseVector) -> Vector3<f64> {
        let r = &self.rows[coil];
        Vector3::new(rhs.dot_dense(&r[0]), rhs.dot_dense(&r[1]), rhs.dot_dense(&r[2]))
    }
}

/// Total fields at all coils for one dipole from a precomputed MEG transfer.
pub fn fields_with_transfer(
    mesh: &Mesh,
    patch: &Patch,
    dipole: &Dipole,
    leads: &LeadVectors,
    transfer: &MegTransfer,
    rhs: &SparseVector,
    policy: &OrderPolicy,
) -> Result<Vec<Vector3<f64>>> {
    leads
        .coils
        .iter()
        .enumerate()
        .map(|(c, coil)| {
            let flux = transfer.correction(c, rhs) + singular_flux(mesh, patch, dipole, &coil.position, policy)?;
            Ok(primary_b(dipole, &coil.position)? - flux * MU0_OVER_4PI)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::{cube_grid, unit_tet};

    #[test]
    fn constant_potential_has_no_correction() {
        let mesh = cube_grid(3);
        let coils = [Coil::new(Vector3::new(10.0, 1.0, 2.0), None).unwrap()];
        let leads = correction_lead_vectors(&mesh, &coils, Execution::Sequential).unwrap();
        let u = vec![2.5; mesh.num_vertices()];
        assert!(leads.apply(0, &u).norm() < 1e-14);
    }

    #[test]
    fn linear_potential_on_one_tet() {
        let mesh = unit_tet();
        let coil = Vector3::new(4.0, -3.0, 2.0);
        let leads = correction_lead_vectors(&mesh, &[Coil::new(coil, None).unwrap()], Execution::Sequential).unwrap();
        let g = Vector3::new(0.3, -1.1, 0.7);
        let u: Vec<f64> = mesh.vertices().iter().map(|p| g.dot(p)).collect();
        // σ∇u is constant, so the integral is (σ g) × ∫ k; ∫ k by high-order quadrature
        let geom = ElementGeometry::of(&mesh, 0);
        let q = rule(Domain::Tetrahedron, 30).unwrap();
        let kint: Vector3<f64> = q.iter().map(|(xi, w)| kernel(&coil, &geom.map(xi)) * w).sum::<Vector3<f64>>() * geom.det();
        let exact = (mesh.conductivity(0) * g).cross(&kint);
        assert!((leads.apply(0, &u) - exact).norm() < 1e-4 * exact.norm());
    }

    #[test]
    fn decays_with_coil_distance() {
        let mesh = cube_grid(3);
        let u: Vec<f64> = mesh.vertices().iter().map(|p| p.x * p.x - p.y + 0.5 * p.z).collect();
        let dir = Vector3::new(1.0, 0.4, 0.2).normalize();
        let mut last = f64::INFINITY;
        for dist in [5.0, 10.0, 20.0, 40.0] {
            let leads = correction_lead_vectors(&mesh, &[Coil::new(dir * dist, None).unwrap()], Execution::Sequential).unwrap();
            let b = leads.apply(0, &u).norm();
            assert!(b < last);
            last = b;
        }
    }

    #[test]
    fn coil_inside_is_rejected() {
        let mesh = cube_grid(2);
        let r = correction_lead_vectors(&mesh, &[Coil::new(Vector3::repeat(0.3), None).unwrap()], Execution::Sequential);
        assert!(matches!(r, Err(Error::CoilInsideMesh(0))));
        assert!(Coil::new(Vector3::x() * 5.0, Some(Vector3::new(1.0, 1.0, 0.0))).is_err());
    }

    #[test]
    fn total_field_cases() {
        let coil = Coil::radial(Vector3::new(0.0, 0.0, 2.0), &Vector3::zeros());
        let p = Vector3::new(1.0, 2.0, 3.0);
        let (b, s) = total_field(&p, &-p, &coil);
        assert_eq!(b, Vector3::zeros());
        assert_eq!(s, Some(0.0));
        let (_, s) = total_field(&Vector3::new(1.0, 0.0, 0.0), &Vector3::zeros(), &coil);
        assert_eq!(s, Some(0.0));
    }

    #[test]
    fn secondary_field_is_odd_in_moment() {
        let mesh = cube_grid(4);
        let d = Dipole::new(Vector3::new(0.52, 0.47, 0.55), Vector3::new(0.3, 0.5, 0.8));
        let patch = crate::mesh::build_patch(&mesh, &d.position, 1).unwrap();
        let coils = [Coil::new(Vector3::new(7.0, 0.5, 0.5), None).unwrap()];
        let leads = correction_lead_vectors(&mesh, &coils, Execution::Sequential).unwrap();
        let u: Vec<f64> = mesh.vertices().iter().map(|p| p.y - p.z).collect();
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let pol = OrderPolicy::default();
        let a = secondary_field(&mesh, &patch, &d, &leads, 0, &u, &pol).unwrap();
        let b = secondary_field(&mesh, &patch, &d.with_moment(-d.moment), &leads, 0, &neg, &pol).unwrap();
        assert_eq!(a, -b);
        let zero = secondary_field(&mesh, &patch, &d.with_moment(Vector3::zeros()), &leads, 0, &vec![0.0; u.len()], &pol).unwrap();
        assert_eq!(zero, Vector3::zeros());
    }
}
