use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{signed_tet_volume, ElementKind, Mesh};
use crate::error::{Error, Result};

/// Concentric-shell conductor. Radii and center in millimeters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereModel {
    pub layer_radii: [f64; 4],
    pub layer_conductivities: [f64; 4],
    #[serde(default)]
    pub center: [f64; 3],
}

impl Default for SphereModel {
    /// Brain, CSF, skull, skin.
    fn default() -> Self {
        Self {
            layer_radii: [78.0, 80.0, 86.0, 92.0],
            layer_conductivities: [0.33, 1.79, 0.01, 0.43],
            center: [0.0; 3],
        }
    }
}

impl SphereModel {
    pub fn validate(&self) -> Result<()> {
        let r = &self.layer_radii;
        if !(r[0] > 0.0 && r.windows(2).all(|w| w[1] > w[0])) {
            return Err(Error::InvalidModel(format!("radii must increase: {r:?}")));
        }
        if self.layer_conductivities.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidModel("conductivities must be positive".into()));
        }
        Ok(())
    }

    pub fn center_m(&self) -> Vector3<f64> {
        Vector3::from(self.center) * 1e-3
    }

    pub fn outer_radius_m(&self) -> f64 {
        self.layer_radii[3] * 1e-3
    }

    pub fn brain_radius_m(&self) -> f64 {
        self.layer_radii[0] * 1e-3
    }

    /// Layer index (0-based) of a radius in mm, or `None` outside the model.
    pub fn layer_of(&self, r_mm: f64) -> Option<usize> {
        self.layer_radii.iter().position(|&ri| r_mm < ri)
    }
}

/// Cubes of side `h` (mm) whose centers lie strictly inside the outer sphere.
///
/// The grid has a vertex at the sphere center. Labels are 1..=4 from the inside out.
pub fn generate_voxel_sphere(model: &SphereModel, h: f64) -> Result<Mesh> {
    model.validate()?;
    if !(h > 0.0 && h < model.layer_radii[0]) {
        return Err(Error::InvalidModel(format!(
            "voxel size {h} mm must be positive and below the innermost radius"
        )));
    }
    let rmax = model.layer_radii[3];
    let n = (rmax / h).ceil() as i64;
    let side = (2 * n) as usize;
    let m = side + 1;
    let c = Vector3::from(model.center);
    let mut cells = Vec::new();
    for k in 0..side {
        for j in 0..side {
            for i in 0..side {
                let center = Vector3::new(
                    (i as f64 - n as f64 + 0.5) * h,
                    (j as f64 - n as f64 + 0.5) * h,
                    (k as f64 - n as f64 + 0.5) * h,
                );
                if let Some(layer) = model.layer_of(center.norm()) {
                    cells.push(([i, j, k], layer));
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyVoxelMesh(h));
    }
    let mut ids = vec![usize::MAX; m * m * m];
    let mut vertices = Vec::new();
    let mut conn = Vec::with_capacity(cells.len() * 8);
    // number vertices in grid order so ids grow with x, then y, then z
    for ([i, j, k], _) in &cells {
        for l in 0..8 {
            let g = (i + (l & 1)) + m * ((j + ((l >> 1) & 1)) + m * (k + ((l >> 2) & 1)));
            ids[g] = 0;
        }
    }
    for g in 0..ids.len() {
        if ids[g] == 0 {
            ids[g] = vertices.len();
            let (i, j, k) = (g % m, (g / m) % m, g / (m * m));
            let p = Vector3::new(
                (i as f64 - n as f64) * h,
                (j as f64 - n as f64) * h,
                (k as f64 - n as f64) * h,
            );
            vertices.push((p + c) * 1e-3);
        }
    }
    let mut conductivity = Vec::with_capacity(cells.len());
    let mut labels = Vec::with_capacity(cells.len());
    for ([i, j, k], layer) in &cells {
        for l in 0..8 {
            conn.push(ids[(i + (l & 1)) + m * ((j + ((l >> 1) & 1)) + m * (k + ((l >> 2) & 1)))]);
        }
        conductivity.push(Matrix3::identity() * model.layer_conductivities[*layer]);
        labels.push(*layer as i32 + 1);
    }
    Mesh::new(vertices, conn, ElementKind::Hex, conductivity, labels)
}

// Kuhn triangulation of the unit cube: one tet per axis permutation, all sharing
// the 0-7 diagonal. Every cube face is cut along the diagonal through its
// lowest corner, so face-adjacent boxes agree on the shared triangulation.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Split every box into six tetrahedra.
pub fn split_hex_to_tet(mesh: &Mesh) -> Result<Mesh> {
    if mesh.kind() != ElementKind::Hex {
        return Err(Error::WrongElementKind { expected: "hexahedral" });
    }
    let ne = mesh.num_elements();
    let mut conn = Vec::with_capacity(ne * 24);
    let mut conductivity = Vec::with_capacity(ne * 6);
    let mut labels = Vec::with_capacity(ne * 6);
    let verts = mesh.vertices();
    for e in 0..ne {
        let el = mesh.element(e);
        for t in KUHN {
            let mut tet = t.map(|l| el[l]);
            if signed_tet_volume(tet.map(|v| &verts[v])) < 0.0 {
                tet.swap(2, 3);
            }
            conn.extend_from_slice(&tet);
            conductivity.push(*mesh.conductivity(e));
            labels.push(mesh.label(e));
        }
    }
    Mesh::new(verts.to_vec(), conn, ElementKind::Tet, conductivity, labels)
}

#[cfg(test)]
mod tests {
    use super::super::tests::cube_grid;
    use super::*;
    use std::collections::HashMap;
    use std::f64::consts::PI;

    #[test]
    fn ball_volume_and_labels() {
        let model = SphereModel::default();
        let m = generate_voxel_sphere(&model, 4.0).unwrap();
        let exact = 4.0 / 3.0 * PI * (0.092f64).powi(3);
        assert!((m.total_volume() / exact - 1.0).abs() < 0.05);
        for e in 0..m.num_elements() {
            if m.centroid(e).norm() < 0.078 {
                assert_eq!(m.conductivity(e)[(0, 0)], 0.33);
                assert_eq!(m.label(e), 1);
            }
        }
    }

    #[test]
    fn too_coarse_is_rejected() {
        let model = SphereModel {
            layer_radii: [78.0, 80.0, 86.0, 92.0],
            ..Default::default()
        };
        assert!(generate_voxel_sphere(&model, 200.0).is_err());
        let tiny = SphereModel {
            layer_radii: [1.0, 2.0, 3.0, 4.0],
            ..Default::default()
        };
        assert!(generate_voxel_sphere(&tiny, 0.9).is_ok());
        assert!(generate_voxel_sphere(&tiny, 1.0).is_err());
    }

    #[test]
    fn unit_cube_split() {
        let m = split_hex_to_tet(&cube_grid(1)).unwrap();
        assert_eq!(m.num_elements(), 6);
        assert!((m.total_volume() - 1.0).abs() < 1e-15);
        assert!(split_hex_to_tet(&m).is_err());
    }

    fn face_counts(m: &Mesh) -> HashMap<Vec<usize>, usize> {
        let mut faces = HashMap::new();
        for e in 0..m.num_elements() {
            for f in 0..4 {
                let mut k = m.face_vertices(e, f);
                k.sort_unstable();
                *faces.entry(k).or_insert(0) += 1;
            }
        }
        faces
    }

    #[test]
    fn split_is_conforming() {
        let m = split_hex_to_tet(&cube_grid(3)).unwrap();
        let faces = face_counts(&m);
        assert!(faces.values().all(|&c| c <= 2));
        // boundary triangles: 6 sides * 9 squares * 2
        assert_eq!(faces.values().filter(|&&c| c == 1).count(), 6 * 9 * 2);
    }

    #[test]
    fn split_sphere_volumes() {
        let hex = generate_voxel_sphere(&SphereModel::default(), 8.0).unwrap();
        let tet = split_hex_to_tet(&hex).unwrap();
        let a = hex.volume_by_label();
        let b = tet.volume_by_label();
        for (l, v) in &a {
            assert!(((b[l] - v) / v).abs() < 1e-12);
        }
    }
}
