use std::collections::HashMap;

use nalgebra::Matrix3;

use super::analytic::transition_integral_analytic_tet;
use crate::element::{ElementGeometry, Local};
use crate::error::{Error, Result};
use crate::fields::{Dipole, HomogeneousConductivity};
use crate::integrals::{eeg_patch, eeg_surface, eeg_transition};
use crate::mesh::{distance_edge_ratio, BoundaryFace, ElementKind, Mesh, Patch};
use crate::parallel::{map_slice, Execution};
use crate::quadrature::{OrderPolicy, Problem, Term};
use crate::sparse::SparseVector;

#[derive(Clone, Copy, Debug)]
pub struct RhsOptions {
    pub policy: OrderPolicy,
    /// Closed-form transition integral on tets with isotropic σ∞.
    pub analytic_tet: bool,
    pub exec: Execution,
}

impl Default for RhsOptions {
    fn default() -> Self {
        Self {
            policy: OrderPolicy::default(),
            analytic_tet: true,
            exec: Execution::default(),
        }
    }
}

/// Contribution of one transition element, patch element or boundary face.
enum Piece {
    Transition(usize),
    Patch(usize),
    Surface(BoundaryFace),
}

/// Source conductivity of a patch.
///
/// `x0` lies strictly inside the source element, so σ is constant on a neighborhood
/// of it by construction; the only remaining check is that the tensor is usable.
pub fn source_conductivity(patch: &Patch) -> Result<HomogeneousConductivity> {
    HomogeneousConductivity::new(patch.sigma_inf)
}

fn piece(
    mesh: &Mesh,
    patch: &Patch,
    cond: &HomogeneousConductivity,
    dipole: &Dipole,
    opts: &RhsOptions,
    p: &Piece,
) -> Result<(usize, Local)> {
    let kind = mesh.kind();
    let x0 = &dipole.position;
    match *p {
        Piece::Transition(e) => {
            let el = mesh.element(e);
            let mut chi = [0.0; 8];
            for (l, &v) in el.iter().enumerate() {
                chi[l] = patch.chi(v);
            }
            let sigma = mesh.conductivity(e);
            if let (ElementKind::Tet, Some(s), true) = (kind, cond.scalar(), opts.analytic_tet) {
                let pts: Vec<_> = mesh.element_points(e).copied().collect();
                let pts = [pts[0], pts[1], pts[2], pts[3]];
                let c = [chi[0], chi[1], chi[2], chi[3]];
                let v = transition_integral_analytic_tet(&pts, &c, dipole, sigma, s)?;
                let mut out = [0.0; 8];
                out[..4].copy_from_slice(&v);
                return Ok((e, out));
            }
            let order = opts
                .policy
                .order(kind, Problem::Eeg, Term::Transition, distance_edge_ratio(mesh, e, x0));
            let g = ElementGeometry::of(mesh, e);
            Ok((e, eeg_transition(&g, sigma, &chi, cond, dipole, order)?))
        }
        Piece::Patch(e) => {
            let sigma_c: Matrix3<f64> = mesh.conductivity(e) - cond.tensor();
            let g = ElementGeometry::of(mesh, e);
            if crate::integrals::negligible(&sigma_c, cond) {
                return Ok((e, [0.0; 8]));
            }
            let order = opts
                .policy
                .order(kind, Problem::Eeg, Term::Patch, distance_edge_ratio(mesh, e, x0));
            Ok((e, eeg_patch(&g, &sigma_c, cond, dipole, order)?))
        }
        Piece::Surface(f) => {
            let order = opts.policy.order(kind, Problem::Eeg, Term::Surface, 1.0);
            let g = ElementGeometry::of(mesh, f.element);
            Ok((f.element, eeg_surface(&g, f.local_face, &f.normal, cond, dipole, order)?))
        }
    }
}

/// Localized subtraction right-hand side
/// `l(v) = -∫_Ω̃ <σ∇(χu∞),∇v> - ∫_∂Ω∞ <σ∞∇u∞,η> v - ∫_Ω∞ <σ^c∇u∞,∇v>`.
pub fn assemble_rhs_localized(
    mesh: &Mesh,
    patch: &Patch,
    dipole: &Dipole,
    opts: &RhsOptions,
) -> Result<SparseVector> {
    let cond = source_conductivity(patch)?;
    let pieces: Vec<Piece> = patch
        .transition_elements
        .iter()
        .map(|&e| Piece::Transition(e))
        .chain(patch.boundary_faces.iter().map(|&f| Piece::Surface(f)))
        .chain(patch.patch_elements.iter().map(|&e| Piece::Patch(e)))
        .collect();
    let parts = map_slice(opts.exec, &pieces, |p| piece(mesh, patch, &cond, dipole, opts, p));
    let mut acc: HashMap<usize, f64> = HashMap::new();
    for part in parts {
        let (e, vals) = part?;
        for (l, &v) in mesh.element(e).iter().enumerate() {
            if vals[l] != 0.0 {
                *acc.entry(v).or_insert(0.0) -= vals[l];
            }
        }
    }
    Ok(SparseVector::from_map(acc))
}

/// The patch that covers the whole mesh: χ ≡ 1, no transition region, surface over ∂Ω.
pub fn full_patch(mesh: &Mesh, dipole: &Dipole) -> Result<Patch> {
    let x0 = &dipole.position;
    let src = mesh
        .locate_element(x0)
        .ok_or(Error::OutsideMesh(x0.x, x0.y, x0.z))?;
    if mesh.inside_distance(src, x0) <= crate::mesh::CONTAINMENT_TOL {
        return Err(Error::AmbiguousContainment(src));
    }
    let boundary_faces = mesh
        .boundary_faces()
        .into_iter()
        .map(|(element, local_face)| BoundaryFace {
            element,
            local_face,
            normal: mesh.face_normal(element, local_face),
        })
        .collect();
    Ok(Patch {
        patch_elements: (0..mesh.num_elements()).collect(),
        transition_elements: Vec::new(),
        boundary_faces,
        chi_vertex_values: (0..mesh.num_vertices()).map(|v| (v, 1.0)).collect(),
        source_element: src,
        sigma_inf: *mesh.conductivity(src),
    })
}

/// Classical subtraction right-hand side.
pub fn assemble_rhs_full(mesh: &Mesh, dipole: &Dipole, opts: &RhsOptions) -> Result<SparseVector> {
    assemble_rhs_localized(mesh, &full_patch(mesh, dipole)?, dipole, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_patch, split_hex_to_tet};
    use nalgebra::Vector3;

    /// 8³ cube grid with edge 1, two conductivities split at z = 4.
    fn layered(tet: bool) -> Mesh {
        let n = 8;
        let m = n + 1;
        let id = |i: usize, j: usize, k: usize| i + m * (j + m * k);
        let mut vertices = Vec::new();
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    vertices.push(Vector3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let mut conn = Vec::new();
        let mut sigma = Vec::new();
        let mut labels = Vec::new();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for l in 0..8 {
                        conn.push(id(i + (l & 1), j + ((l >> 1) & 1), k + ((l >> 2) & 1)));
                    }
                    let s = if k < 4 { 0.33 } else { 0.0042 };
                    sigma.push(Matrix3::identity() * s);
                    labels.push(if k < 4 { 1 } else { 2 });
                }
            }
        }
        let hex = Mesh::new(vertices, conn, ElementKind::Hex, sigma, labels).unwrap();
        if tet {
            split_hex_to_tet(&hex).unwrap()
        } else {
            hex
        }
    }

    fn dipole() -> Dipole {
        Dipole::new(Vector3::new(4.31, 3.77, 3.52), Vector3::new(0.3, 0.5, 0.8).normalize())
    }

    #[test]
    fn zero_sum_and_support() {
        for tet in [false, true] {
            let mesh = layered(tet);
            let d = dipole();
            let patch = build_patch(&mesh, &d.position, 1).unwrap();
            let rhs = assemble_rhs_localized(&mesh, &patch, &d, &RhsOptions::default()).unwrap();
            assert!(rhs.sum().abs() <= 1e-6 * rhs.norm_l1(), "{} {}", rhs.sum(), rhs.norm_l1());
            assert!(rhs.nnz() <= patch.support_vertices().len());
            for (v, _) in rhs.entries() {
                assert!(patch.chi_vertex_values.contains_key(v));
            }
        }
    }

    #[test]
    fn exhausted_patch_equals_full_subtraction() {
        for tet in [false, true] {
            let mesh = layered(tet);
            let d = dipole();
            let patch = build_patch(&mesh, &d.position, 100).unwrap();
            assert!(patch.transition_elements.is_empty());
            let opts = RhsOptions::default();
            let a = assemble_rhs_localized(&mesh, &patch, &d, &opts).unwrap();
            let b = assemble_rhs_full(&mesh, &d, &opts).unwrap();
            assert!(a.max_diff(&b) <= 1e-12 * b.norm_max());
        }
    }

    #[test]
    fn linear_in_moment() {
        let mesh = layered(true);
        let d = dipole();
        let patch = build_patch(&mesh, &d.position, 2).unwrap();
        let opts = RhsOptions::default();
        let a = assemble_rhs_localized(&mesh, &patch, &d, &opts).unwrap();
        let b = assemble_rhs_localized(&mesh, &patch, &d.with_moment(d.moment * 2.0), &opts).unwrap();
        assert_eq!(a.scaled(2.0), b);
        let z = assemble_rhs_localized(&mesh, &patch, &d.with_moment(Vector3::zeros()), &opts).unwrap();
        assert!(z.norm_max() == 0.0);
    }

    #[test]
    fn analytic_and_numeric_paths_agree() {
        let mesh = layered(true);
        let d = dipole();
        let patch = build_patch(&mesh, &d.position, 1).unwrap();
        let exact = RhsOptions {
            policy: OrderPolicy::uniform(30),
            analytic_tet: false,
            ..Default::default()
        };
        let a = assemble_rhs_localized(&mesh, &patch, &d, &RhsOptions { policy: OrderPolicy::uniform(30), ..Default::default() }).unwrap();
        let b = assemble_rhs_localized(&mesh, &patch, &d, &exact).unwrap();
        assert!(a.max_diff(&b) <= 1e-8 * b.norm_max());
    }

    #[test]
    fn sequential_matches_parallel() {
        let mesh = layered(false);
        let d = dipole();
        let patch = build_patch(&mesh, &d.position, 2).unwrap();
        let s = RhsOptions { exec: Execution::Sequential, ..Default::default() };
        let p = RhsOptions { exec: Execution::Parallel, ..Default::default() };
        let a = assemble_rhs_localized(&mesh, &patch, &d, &s).unwrap();
        let b = assemble_rhs_localized(&mesh, &patch, &d, &p).unwrap();
        assert_eq!(a, b);
    }
}
