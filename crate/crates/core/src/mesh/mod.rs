//! Conforming tetrahedral and hexahedral volume meshes.
//!
//! Geometry is stored in meters. Hexahedra are axis-aligned boxes with local vertex
//! `bx + 2 by + 4 bz` at the corner selected by the bits `(bx, by, bz)`.

mod gmsh;
mod locate;
mod patch;
mod voxel;

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gmsh::{load_gmsh_ascii, parse_conductivity_map, read_gmsh_ascii, write_gmsh_ascii};
pub use locate::Locator;
pub use patch::{build_patch, distance_edge_ratio, ratio_for_points, vertex_extension, BoundaryFace, Patch};
pub use voxel::{generate_voxel_sphere, split_hex_to_tet, SphereModel};

/// Containment tolerance for point location.
pub const CONTAINMENT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Tet,
    Hex,
}

impl ElementKind {
    pub fn vertices(self) -> usize {
        match self {
            ElementKind::Tet => 4,
            ElementKind::Hex => 8,
        }
    }

    pub fn faces(self) -> &'static [&'static [usize]] {
        match self {
            ElementKind::Tet => &TET_FACES,
            ElementKind::Hex => &HEX_FACES,
        }
    }

    pub fn edges(self) -> &'static [[usize; 2]] {
        match self {
            ElementKind::Tet => &TET_EDGES,
            ElementKind::Hex => &HEX_EDGES,
        }
    }
}

/// Face `i` of a tetrahedron is opposite vertex `i`.
pub const TET_FACES: [&[usize]; 4] = [&[1, 2, 3], &[0, 2, 3], &[0, 1, 3], &[0, 1, 2]];

/// Hexahedron faces x-, x+, y-, y+, z-, z+; vertices in tensor order of the two
/// in-face axes.
pub const HEX_FACES: [&[usize]; 6] = [
    &[0, 2, 4, 6],
    &[1, 3, 5, 7],
    &[0, 1, 4, 5],
    &[2, 3, 6, 7],
    &[0, 1, 2, 3],
    &[4, 5, 6, 7],
];

const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
const HEX_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [2, 3],
    [4, 5],
    [6, 7],
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

#[derive(Debug)]
pub struct Mesh {
    vertices: Vec<Vector3<f64>>,
    connectivity: Vec<usize>,
    kind: ElementKind,
    conductivity: Vec<Matrix3<f64>>,
    labels: Vec<i32>,
    adj_offsets: Vec<usize>,
    adj_elements: Vec<usize>,
    locator: OnceLock<Locator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            connectivity: self.connectivity.clone(),
            kind: self.kind,
            conductivity: self.conductivity.clone(),
            labels: self.labels.clone(),
            adj_offsets: self.adj_offsets.clone(),
            adj_elements: self.adj_elements.clone(),
            locator: OnceLock::new(),
        }
    }
}

pub(crate) fn check_conductivity(s: &Matrix3<f64>) -> Result<()> {
    let scale = s.abs().max();
    if !scale.is_finite() || (s - s.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::InvalidConductivity(format!("not symmetric: {s}")));
    }
    if s.symmetric_eigen().eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidConductivity(format!("not positive definite: {s}")));
    }
    Ok(())
}

fn signed_tet_volume(p: [&Vector3<f64>; 4]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
}

impl Mesh {
    /// Build a mesh and its adjacency index.
    ///
    /// `connectivity` is flat with 4 or 8 entries per element. Tetrahedra with
    /// negative orientation are rejected, as are hexahedra that are not
    /// axis-aligned boxes in the local numbering.
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        connectivity: Vec<usize>,
        kind: ElementKind,
        conductivity: Vec<Matrix3<f64>>,
        labels: Vec<i32>,
    ) -> Result<Self> {
        let nv = kind.vertices();
        if connectivity.len() % nv != 0 {
            return Err(Error::Dimension(format!(
                "connectivity length {} is not a multiple of {nv}",
                connectivity.len()
            )));
        }
        let ne = connectivity.len() / nv;
        if conductivity.len() != ne || labels.len() != ne {
            return Err(Error::Dimension(format!(
                "{ne} elements but {} conductivities and {} labels",
                conductivity.len(),
                labels.len()
            )));
        }
        for (e, el) in connectivity.chunks(nv).enumerate() {
            if let Some(&v) = el.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::VertexIndexOutOfRange {
                    element: e,
                    vertex: v,
                    count: vertices.len(),
                });
            }
        }
        for s in &conductivity {
            check_conductivity(s)?;
        }
        let mut mesh = Self {
            vertices,
            connectivity,
            kind,
            conductivity,
            labels,
            adj_offsets: Vec::new(),
            adj_elements: Vec::new(),
            locator: OnceLock::new(),
        };
        for e in 0..ne {
            match kind {
                ElementKind::Tet => {
                    if !(mesh.signed_volume(e) > 0.0) {
                        return Err(Error::DegenerateElement(e));
                    }
                }
                ElementKind::Hex => mesh.check_box(e)?,
            }
        }
        mesh.build_adjacency();
        Ok(mesh)
    }

    fn check_box(&self, e: usize) -> Result<()> {
        let v = self.element(e);
        let lo = self.vertices[v[0]];
        let hi = self.vertices[v[7]];
        let size = hi - lo;
        if size.min() <= 0.0 {
            return Err(Error::DegenerateElement(e));
        }
        let tol = 1e-9 * size.max();
        for (l, &g) in v.iter().enumerate() {
            let expect = Vector3::new(
                if l & 1 != 0 { hi.x } else { lo.x },
                if l & 2 != 0 { hi.y } else { lo.y },
                if l & 4 != 0 { hi.z } else { lo.z },
            );
            if (self.vertices[g] - expect).abs().max() > tol {
                return Err(Error::DegenerateElement(e));
            }
        }
        Ok(())
    }

    fn build_adjacency(&mut self) {
        let nv = self.kind.vertices();
        let mut counts = vec![0usize; self.vertices.len() + 1];
        for &v in &self.connectivity {
            counts[v + 1] += 1;
        }
        for i in 0..self.vertices.len() {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut adj = vec![0usize; self.connectivity.len()];
        for (e, el) in self.connectivity.chunks(nv).enumerate() {
            for &v in el {
                adj[fill[v]] = e;
                fill[v] += 1;
            }
        }
        self.adj_offsets = counts;
        self.adj_elements = adj;
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.labels.len()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let nv = self.kind.vertices();
        &self.connectivity[e * nv..(e + 1) * nv]
    }

    pub fn conductivity(&self, e: usize) -> &Matrix3<f64> {
        &self.conductivity[e]
    }

    pub fn label(&self, e: usize) -> i32 {
        self.labels[e]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Elements containing vertex `v`, in increasing order.
    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.adj_elements[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    pub fn element_points(&self, e: usize) -> impl Iterator<Item = &Vector3<f64>> + '_ {
        self.element(e).iter().map(move |&v| &self.vertices[v])
    }

    fn signed_volume(&self, e: usize) -> f64 {
        match self.kind {
            ElementKind::Tet => {
                let v = self.element(e);
                signed_tet_volume([
                    &self.vertices[v[0]],
                    &self.vertices[v[1]],
                    &self.vertices[v[2]],
                    &self.vertices[v[3]],
                ])
            }
            ElementKind::Hex => {
                let v = self.element(e);
                (self.vertices[v[7]] - self.vertices[v[0]]).product()
            }
        }
    }

    pub fn volume(&self, e: usize) -> f64 {
        self.signed_volume(e)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.volume(e)).sum()
    }

    /// Summed element volume per label.
    pub fn volume_by_label(&self) -> HashMap<i32, f64> {
        let mut out = HashMap::new();
        for e in 0..self.num_elements() {
            *out.entry(self.labels[e]).or_insert(0.0) += self.volume(e);
        }
        out
    }

    pub fn centroid(&self, e: usize) -> Vector3<f64> {
        let n = self.kind.vertices() as f64;
        self.element_points(e).sum::<Vector3<f64>>() / n
    }

    /// Global vertex ids of local face `f` of element `e`.
    pub fn face_vertices(&self, e: usize, f: usize) -> Vec<usize> {
        let el = self.element(e);
        self.kind.faces()[f].iter().map(|&l| el[l]).collect()
    }

    pub fn face_center(&self, e: usize, f: usize) -> Vector3<f64> {
        let vs = self.face_vertices(e, f);
        vs.iter().map(|&v| self.vertices[v]).sum::<Vector3<f64>>() / vs.len() as f64
    }

    /// Area of local face `f` of element `e`.
    pub fn face_area(&self, e: usize, f: usize) -> f64 {
        let vs = self.face_vertices(e, f);
        let p = |i: usize| self.vertices[vs[i]];
        match self.kind {
            ElementKind::Tet => 0.5 * (p(1) - p(0)).cross(&(p(2) - p(0))).norm(),
            ElementKind::Hex => (p(1) - p(0)).cross(&(p(2) - p(0))).norm(),
        }
    }

    /// Unit normal of local face `f` pointing out of element `e`.
    pub fn face_normal(&self, e: usize, f: usize) -> Vector3<f64> {
        let vs = self.face_vertices(e, f);
        let p = |i: usize| self.vertices[vs[i]];
        let n = (p(1) - p(0)).cross(&(p(2) - p(0))).normalize();
        if n.dot(&(self.face_center(e, f) - self.centroid(e))) < 0.0 {
            -n
        } else {
            n
        }
    }

    /// The element other than `e` sharing local face `f`, if any.
    pub fn face_neighbor(&self, e: usize, f: usize) -> Option<usize> {
        let vs = self.face_vertices(e, f);
        self.vertex_elements(vs[0])
            .iter()
            .copied()
            .find(|&o| o != e && vs[1..].iter().all(|v| self.element(o).contains(v)))
    }

    /// All faces not shared with another element, as (element, local face).
    pub fn boundary_faces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for e in 0..self.num_elements() {
            for f in 0..self.kind.faces().len() {
                if self.face_neighbor(e, f).is_none() {
                    out.push((e, f));
                }
            }
        }
        out
    }

    /// Vertices on the outer boundary, sorted.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = self
            .boundary_faces()
            .into_iter()
            .flat_map(|(e, f)| self.face_vertices(e, f))
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    pub fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::new(self))
    }

    /// Element whose closed hull contains `x` (lowest id on ties).
    pub fn locate_element(&self, x: &Vector3<f64>) -> Option<usize> {
        self.locator().locate(self, x)
    }

    /// Linear scan version of [`Mesh::locate_element`].
    pub fn locate_element_brute(&self, x: &Vector3<f64>) -> Option<usize> {
        (0..self.num_elements()).find(|&e| self.contains(e, x, CONTAINMENT_TOL))
    }

    /// Signed distance from `x` to the boundary of element `e`: positive inside.
    pub fn inside_distance(&self, e: usize, x: &Vector3<f64>) -> f64 {
        match self.kind {
            ElementKind::Tet => (0..4)
                .map(|f| {
                    let n = self.face_normal(e, f);
                    n.dot(&(self.vertices[self.face_vertices(e, f)[0]] - x))
                })
                .fold(f64::INFINITY, f64::min),
            ElementKind::Hex => {
                let v = self.element(e);
                let lo = self.vertices[v[0]];
                let hi = self.vertices[v[7]];
                (x - lo).inf(&(hi - x)).min()
            }
        }
    }

    pub fn contains(&self, e: usize, x: &Vector3<f64>, tol: f64) -> bool {
        self.inside_distance(e, x) >= -tol
    }

    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn to_dump(&self) -> MeshDump {
        let nv = self.kind.vertices();
        MeshDump {
            kind: self.kind,
            vertices: self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            elements: self.connectivity.chunks(nv).map(|c| c.to_vec()).collect(),
            labels: self.labels.clone(),
            conductivity: self
                .conductivity
                .iter()
                .map(|s| {
                    let mut a = [0.0; 9];
                    for i in 0..3 {
                        for j in 0..3 {
                            a[3 * i + j] = s[(i, j)];
                        }
                    }
                    a
                })
                .collect(),
        }
    }

    pub fn from_dump(d: MeshDump) -> Result<Self> {
        let vertices = d.vertices.iter().map(|p| Vector3::from(*p)).collect();
        let nv = d.kind.vertices();
        if let Some(bad) = d.elements.iter().position(|e| e.len() != nv) {
            return Err(Error::Dimension(format!("element {bad} has the wrong vertex count")));
        }
        let conductivity = d
            .conductivity
            .iter()
            .map(|a| Matrix3::from_row_slice(a))
            .collect();
        Mesh::new(vertices, d.elements.concat(), d.kind, conductivity, d.labels)
    }
}

/// JSON form of a mesh (vertices in meters, conductivity row-major).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshDump {
    pub kind: ElementKind,
    pub vertices: Vec<[f64; 3]>,
    pub elements: Vec<Vec<usize>>,
    pub labels: Vec<i32>,
    pub conductivity: Vec<[f64; 9]>,
}
