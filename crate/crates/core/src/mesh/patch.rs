use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};

use super::{ElementKind, Mesh, CONTAINMENT_TOL};
use crate::error::{Error, Result};

/// Face of a patch element on the patch boundary, with the normal pointing out of the patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFace {
    pub element: usize,
    pub local_face: usize,
    pub normal: Vector3<f64>,
}

/// Element sets around one source position.
#[derive(Clone, Debug)]
pub struct Patch {
    /// Sorted.
    pub patch_elements: Vec<usize>,
    /// Sorted, disjoint from `patch_elements`.
    pub transition_elements: Vec<usize>,
    pub boundary_faces: Vec<BoundaryFace>,
    /// χ on every vertex of patch and transition elements; all other vertices are 0.
    pub chi_vertex_values: HashMap<usize, f64>,
    pub source_element: usize,
    /// Conductivity of the source element.
    pub sigma_inf: Matrix3<f64>,
}

impl Patch {
    pub fn in_patch(&self, e: usize) -> bool {
        self.patch_elements.binary_search(&e).is_ok()
    }

    pub fn chi(&self, v: usize) -> f64 {
        self.chi_vertex_values.get(&v).copied().unwrap_or(0.0)
    }

    /// Vertices of patch and transition elements, sorted.
    pub fn support_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.chi_vertex_values.keys().copied().collect();
        v.sort_unstable();
        v
    }
}

/// All elements sharing at least one vertex with `set`, sorted.
pub fn vertex_extension(mesh: &Mesh, set: &[usize]) -> Vec<usize> {
    let mut verts: Vec<usize> = set.iter().flat_map(|&e| mesh.element(e).iter().copied()).collect();
    verts.sort_unstable();
    verts.dedup();
    let mut out: Vec<usize> = verts
        .iter()
        .flat_map(|&v| mesh.vertex_elements(v).iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Patch of `n_extensions` vertex extensions around the element containing `x0`,
/// plus one further extension as transition region.
pub fn build_patch(mesh: &Mesh, x0: &Vector3<f64>, n_extensions: usize) -> Result<Patch> {
    let src = mesh
        .locate_element(x0)
        .ok_or(Error::OutsideMesh(x0.x, x0.y, x0.z))?;
    if mesh.inside_distance(src, x0) <= CONTAINMENT_TOL {
        return Err(Error::AmbiguousContainment(src));
    }
    let sigma_inf = *mesh.conductivity(src);
    let mut patch = vec![src];
    for _ in 0..n_extensions {
        let next = vertex_extension(mesh, &patch);
        if next.len() == patch.len() {
            break;
        }
        patch = next;
    }
    let outer = vertex_extension(mesh, &patch);
    let transition: Vec<usize> = outer
        .into_iter()
        .filter(|e| patch.binary_search(e).is_err())
        .collect();

    let mut boundary_faces = Vec::new();
    for &e in &patch {
        for f in 0..mesh.kind().faces().len() {
            let interior = mesh
                .face_neighbor(e, f)
                .is_some_and(|nb| patch.binary_search(&nb).is_ok());
            if !interior {
                boundary_faces.push(BoundaryFace {
                    element: e,
                    local_face: f,
                    normal: mesh.face_normal(e, f),
                });
            }
        }
    }

    let mut chi = HashMap::new();
    for &e in &transition {
        for &v in mesh.element(e) {
            chi.insert(v, 0.0);
        }
    }
    for &e in &patch {
        for &v in mesh.element(e) {
            chi.insert(v, 1.0);
        }
    }
    Ok(Patch {
        patch_elements: patch,
        transition_elements: transition,
        boundary_faces,
        chi_vertex_values: chi,
        source_element: src,
        sigma_inf,
    })
}

/// d/a for an element given by its corner points: a is the longest edge, d the
/// smallest distance from `x0` to a corner or a face center.
pub fn ratio_for_points(kind: ElementKind, pts: &[Vector3<f64>], x0: &Vector3<f64>) -> f64 {
    let a = kind
        .edges()
        .iter()
        .map(|[i, j]| (pts[*i] - pts[*j]).norm())
        .fold(0.0, f64::max);
    let corners = pts.iter().map(|p| (p - x0).norm());
    let centers = kind.faces().iter().map(|f| {
        let c = f.iter().map(|&l| pts[l]).sum::<Vector3<f64>>() / f.len() as f64;
        (c - x0).norm()
    });
    corners.chain(centers).fold(f64::INFINITY, f64::min) / a
}

pub fn distance_edge_ratio(mesh: &Mesh, e: usize, x0: &Vector3<f64>) -> f64 {
    let pts: Vec<Vector3<f64>> = mesh.element_points(e).copied().collect();
    ratio_for_points(mesh.kind(), &pts, x0)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{cube_grid, unit_tet};
    use super::super::split_hex_to_tet;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extension_of_interior_cube() {
        let m = cube_grid(5);
        assert!(vertex_extension(&m, &[]).is_empty());
        let c = m.locate_element(&Vector3::new(2.5, 2.5, 2.5)).unwrap();
        assert_eq!(vertex_extension(&m, &[c]).len(), 27);
        let all: Vec<usize> = (0..m.num_elements()).collect();
        assert_eq!(vertex_extension(&m, &all), all);
    }

    #[test]
    fn extension_is_monotone() {
        let m = split_hex_to_tet(&cube_grid(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mut a: Vec<usize> = (0..m.num_elements()).filter(|_| rng.gen_bool(0.05)).collect();
            let mut b = a.clone();
            b.extend((0..m.num_elements()).filter(|_| rng.gen_bool(0.05)));
            b.sort_unstable();
            b.dedup();
            a.dedup();
            let ea = vertex_extension(&m, &a);
            let eb = vertex_extension(&m, &b);
            assert!(ea.iter().all(|e| eb.binary_search(e).is_ok()));
            assert!(a.iter().all(|e| ea.binary_search(e).is_ok()));
        }
    }

    #[test]
    fn zero_extensions() {
        let m = cube_grid(5);
        let p = build_patch(&m, &Vector3::new(2.3, 2.6, 2.4), 0).unwrap();
        assert_eq!(p.patch_elements, vec![p.source_element]);
        assert_eq!(p.transition_elements.len(), 26);
        assert_eq!(p.boundary_faces.len(), 6);
    }

    #[test]
    fn exhaustive_patch() {
        let m = cube_grid(3);
        let p = build_patch(&m, &Vector3::new(0.3, 0.6, 0.4), 10).unwrap();
        assert!(p.transition_elements.is_empty());
        assert_eq!(p.patch_elements.len(), 27);
        assert_eq!(p.boundary_faces.len(), 6 * 9);
        assert!((0..m.num_vertices()).all(|v| p.chi(v) == 1.0));
    }

    #[test]
    fn boundary_normals_face_away() {
        let m = cube_grid(7);
        let x0 = Vector3::new(3.3, 3.6, 3.4);
        let p = build_patch(&m, &x0, 2).unwrap();
        let centroid = p.patch_elements.iter().map(|&e| m.centroid(e)).sum::<Vector3<f64>>()
            / p.patch_elements.len() as f64;
        let mut closure = Vector3::zeros();
        for f in &p.boundary_faces {
            let c = m.face_center(f.element, f.local_face);
            assert!(f.normal.dot(&(c - centroid)) > 0.0);
            closure += f.normal * m.face_area(f.element, f.local_face);
        }
        assert!(closure.norm() < 1e-10);
    }

    #[test]
    fn containment_errors() {
        let m = cube_grid(3);
        assert!(matches!(
            build_patch(&m, &Vector3::new(9.0, 0.5, 0.5), 1),
            Err(Error::OutsideMesh(..))
        ));
        assert!(matches!(
            build_patch(&m, &Vector3::new(1.0, 0.5, 0.5), 1),
            Err(Error::AmbiguousContainment(0))
        ));
    }

    #[test]
    fn ratio_definition() {
        let m = unit_tet();
        assert_eq!(distance_edge_ratio(&m, 0, &Vector3::zeros()), 0.0);
        let x0 = Vector3::new(2.0, 0.2, 0.2);
        let pts: Vec<_> = m.element_points(0).copied().collect();
        let r = ratio_for_points(ElementKind::Tet, &pts, &x0);
        let scaled: Vec<_> = pts.iter().map(|p| p * 3.0).collect();
        assert!((ratio_for_points(ElementKind::Tet, &scaled, &(x0 * 3.0)) - r).abs() < 1e-15);
        // corner (1,0,0) is nearest at distance sqrt(1.08); longest edge sqrt(2)
        assert!((r - (1.08f64 / 2.0).sqrt()).abs() < 1e-15);
    }
}
