//! Affine tetrahedra and axis-aligned boxes with nodal Lagrange bases.
//!
//! Reference tetrahedron vertices: 0 at the origin, then the unit axis points.
//! Reference box: `[0, 1]^3` with local vertex `bx + 2 by + 4 bz`.

use nalgebra::{Matrix3, Vector3};

use crate::mesh::{ElementKind, Mesh};
use crate::quadrature::Domain;

/// Local values for up to eight basis functions; only the first `n` are used.
pub type Local = [f64; 8];

#[derive(Clone, Debug)]
pub enum ElementGeometry {
    Tet {
        origin: Vector3<f64>,
        jacobian: Matrix3<f64>,
        det: f64,
        /// Physical gradients of the four barycentric basis functions.
        grads: [Vector3<f64>; 4],
    },
    Hex {
        origin: Vector3<f64>,
        size: Vector3<f64>,
    },
}

pub fn reference_vertex(kind: ElementKind, l: usize) -> Vector3<f64> {
    match kind {
        ElementKind::Tet => match l {
            0 => Vector3::zeros(),
            i => Vector3::ith(i - 1, 1.0),
        },
        ElementKind::Hex => Vector3::new(
            (l & 1) as f64,
            ((l >> 1) & 1) as f64,
            ((l >> 2) & 1) as f64,
        ),
    }
}

impl ElementGeometry {
    /// From corner points in local order. Hex corners must form an axis-aligned box.
    pub fn new(kind: ElementKind, pts: &[Vector3<f64>]) -> Self {
        match kind {
            ElementKind::Tet => {
                let jacobian = Matrix3::from_columns(&[pts[1] - pts[0], pts[2] - pts[0], pts[3] - pts[0]]);
                let inv_t = jacobian
                    .try_inverse()
                    .expect("degenerate tetrahedron")
                    .transpose();
                let g1 = inv_t.column(0).into_owned();
                let g2 = inv_t.column(1).into_owned();
                let g3 = inv_t.column(2).into_owned();
                ElementGeometry::Tet {
                    origin: pts[0],
                    jacobian,
                    det: jacobian.determinant(),
                    grads: [-(g1 + g2 + g3), g1, g2, g3],
                }
            }
            ElementKind::Hex => ElementGeometry::Hex {
                origin: pts[0],
                size: pts[7] - pts[0],
            },
        }
    }

    pub fn of(mesh: &Mesh, e: usize) -> Self {
        let pts: Vec<Vector3<f64>> = mesh.element_points(e).copied().collect();
        Self::new(mesh.kind(), &pts)
    }

    pub fn kind(&self) -> ElementKind {
        match self {
            ElementGeometry::Tet { .. } => ElementKind::Tet,
            ElementGeometry::Hex { .. } => ElementKind::Hex,
        }
    }

    pub fn n(&self) -> usize {
        self.kind().vertices()
    }

    pub fn domain(&self) -> Domain {
        match self {
            ElementGeometry::Tet { .. } => Domain::Tetrahedron,
            ElementGeometry::Hex { .. } => Domain::Hexahedron,
        }
    }

    pub fn map(&self, xi: &Vector3<f64>) -> Vector3<f64> {
        match self {
            ElementGeometry::Tet { origin, jacobian, .. } => origin + jacobian * xi,
            ElementGeometry::Hex { origin, size } => origin + size.component_mul(xi),
        }
    }

    /// Jacobian of the reference map; positive for valid elements.
    pub fn det(&self) -> f64 {
        match self {
            ElementGeometry::Tet { det, .. } => *det,
            ElementGeometry::Hex { size, .. } => size.product(),
        }
    }

    pub fn shape(&self, xi: &Vector3<f64>) -> Local {
        let mut out = [0.0; 8];
        match self {
            ElementGeometry::Tet { .. } => {
                out[0] = 1.0 - xi.x - xi.y - xi.z;
                out[1] = xi.x;
                out[2] = xi.y;
                out[3] = xi.z;
            }
            ElementGeometry::Hex { .. } => {
                for (l, o) in out.iter_mut().enumerate() {
                    let f = |bit: usize, t: f64| if l & bit != 0 { t } else { 1.0 - t };
                    *o = f(1, xi.x) * f(2, xi.y) * f(4, xi.z);
                }
            }
        }
        out
    }

    /// Physical gradients of the basis functions at reference point `xi`.
    pub fn grads(&self, xi: &Vector3<f64>) -> [Vector3<f64>; 8] {
        let mut out = [Vector3::zeros(); 8];
        match self {
            ElementGeometry::Tet { grads, .. } => out[..4].copy_from_slice(grads),
            ElementGeometry::Hex { size, .. } => {
                for (l, o) in out.iter_mut().enumerate() {
                    let f = |bit: usize, t: f64| if l & bit != 0 { t } else { 1.0 - t };
                    let d = |bit: usize| if l & bit != 0 { 1.0 } else { -1.0 };
                    *o = Vector3::new(
                        d(1) * f(2, xi.y) * f(4, xi.z) / size.x,
                        f(1, xi.x) * d(2) * f(4, xi.z) / size.y,
                        f(1, xi.x) * f(2, xi.y) * d(4) / size.z,
                    );
                }
            }
        }
        out
    }

    /// Parametrisation of local face `f`.
    pub fn face(&self, f: usize) -> FaceMap {
        let kind = self.kind();
        let locals = kind.faces()[f];
        let r0 = reference_vertex(kind, locals[0]);
        let r1 = reference_vertex(kind, locals[1]);
        let r2 = reference_vertex(kind, locals[2]);
        let (re1, re2) = (r1 - r0, r2 - r0);
        let origin = self.map(&r0);
        let e1 = self.map(&r1) - origin;
        let e2 = self.map(&r2) - origin;
        let domain = match kind {
            ElementKind::Tet => Domain::Triangle,
            ElementKind::Hex => Domain::Quadrilateral,
        };
        FaceMap {
            ref_origin: r0,
            ref_e1: re1,
            ref_e2: re2,
            origin,
            e1,
            e2,
            area_jacobian: e1.cross(&e2).norm(),
            domain,
        }
    }
}

/// Affine map from the reference triangle or square onto an element face.
#[derive(Clone, Debug)]
pub struct FaceMap {
    pub ref_origin: Vector3<f64>,
    pub ref_e1: Vector3<f64>,
    pub ref_e2: Vector3<f64>,
    pub origin: Vector3<f64>,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub area_jacobian: f64,
    pub domain: Domain,
}

impl FaceMap {
    /// Element reference coordinate of face parameter `(s, t)`.
    pub fn element_xi(&self, st: &Vector3<f64>) -> Vector3<f64> {
        self.ref_origin + self.ref_e1 * st.x + self.ref_e2 * st.y
    }

    pub fn point(&self, st: &Vector3<f64>) -> Vector3<f64> {
        self.origin + self.e1 * st.x + self.e2 * st.y
    }
}
