//! Single-element fixtures for measuring quadrature error against a high-order oracle.
//!
//! Unit-edge regular tetrahedron and unit cube, both touching the plane `x = 0`
//! from the left. The source sits at `d (1, 0.1, 0.1)`, the coil at `(20, 0, 0)`,
//! σ = σ∞ = σ^c = identity and χ is 1 on the face at `x = 0`.
//!
//! Each term is linear in the dipole moment, so values are taken for the three
//! axis moments and stacked; the relative error is then that of the whole linear
//! map and does not depend on a chosen orientation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::element::ElementGeometry;
use crate::error::{Error, Result};
use crate::fields::{Dipole, HomogeneousConductivity};
use crate::integrals;
use crate::mesh::{ElementKind, Mesh};
use crate::quadrature::{Problem, Term};

pub const ORACLE_ORDER: usize = 50;

pub fn fixture_coil() -> Vector3<f64> {
    Vector3::new(20.0, 0.0, 0.0)
}

pub fn fixture_source(d: f64) -> Vector3<f64> {
    Vector3::new(1.0, 0.1, 0.1) * d
}

/// Corner points in local order.
pub fn fixture_points(kind: ElementKind) -> Vec<Vector3<f64>> {
    let s3 = 3f64.sqrt();
    match kind {
        // first two swapped so the element is positively oriented
        ElementKind::Tet => vec![
            Vector3::new(0.0, 0.5, -s3 / 6.0),
            Vector3::new(0.0, -0.5, -s3 / 6.0),
            Vector3::new(0.0, 0.0, s3 / 3.0),
            Vector3::new(-(6f64.sqrt()) / 3.0, 0.0, 0.0),
        ],
        ElementKind::Hex => (0..8)
            .map(|l| {
                Vector3::new(
                    if l & 1 == 0 { -1.0 } else { 0.0 },
                    if l & 2 == 0 { -0.5 } else { 0.5 },
                    if l & 4 == 0 { -0.5 } else { 0.5 },
                )
            })
            .collect(),
    }
}

/// One-element mesh of the fixture.
pub fn fixture_mesh(kind: ElementKind) -> Mesh {
    let pts = fixture_points(kind);
    let n = pts.len();
    Mesh::new(pts, (0..n).collect(), kind, vec![Matrix3::identity()], vec![1]).expect("fixture is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixtureTerm {
    pub problem: Problem,
    pub term: Term,
}

impl FixtureTerm {
    pub const ALL: [FixtureTerm; 6] = [
        FixtureTerm { problem: Problem::Eeg, term: Term::Surface },
        FixtureTerm { problem: Problem::Eeg, term: Term::Transition },
        FixtureTerm { problem: Problem::Eeg, term: Term::Patch },
        FixtureTerm { problem: Problem::Meg, term: Term::Surface },
        FixtureTerm { problem: Problem::Meg, term: Term::Transition },
        FixtureTerm { problem: Problem::Meg, term: Term::Patch },
    ];

    pub fn name(&self) -> String {
        let p = match self.problem {
            Problem::Eeg => "eeg",
            Problem::Meg => "meg",
        };
        let t = match self.term {
            Term::Surface => "surface",
            Term::Transition => "transition",
            Term::Patch => "patch",
        };
        format!("{p}-{t}")
    }
}

/// Local face lying in the plane `x = 0`.
fn near_face(mesh: &Mesh) -> usize {
    (0..mesh.kind().faces().len())
        .find(|&f| mesh.face_center(0, f).x.abs() < 1e-12)
        .expect("fixture has a face at x = 0")
}

/// Term values at quadrature order `order` for the moments x, y, z in turn: one
/// entry per basis function for EEG, three flux components for MEG.
pub fn fixture_values(kind: ElementKind, term: FixtureTerm, d: f64, order: usize) -> Result<Vec<f64>> {
    if !(d > 0.0) {
        return Err(Error::Config(format!("fixture distance must be positive, got {d}")));
    }
    let mesh = fixture_mesh(kind);
    let geom = ElementGeometry::of(&mesh, 0);
    let face = near_face(&mesh);
    let normal = mesh.face_normal(0, face);
    let mut chi = [0.0; 8];
    for &l in kind.faces()[face] {
        chi[l] = 1.0;
    }
    let cond = HomogeneousConductivity::isotropic(1.0)?;
    let sigma = Matrix3::identity();
    let coil = fixture_coil();
    let n = kind.vertices();
    let mut out = Vec::new();
    for m in [Vector3::x(), Vector3::y(), Vector3::z()] {
        let dipole = Dipole::new(fixture_source(d), m);
        out.extend(term_values(&geom, face, &normal, &chi, &cond, &sigma, &dipole, &coil, n, term, order)?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn term_values(
    geom: &ElementGeometry,
    face: usize,
    normal: &Vector3<f64>,
    chi: &crate::element::Local,
    cond: &HomogeneousConductivity,
    sigma: &Matrix3<f64>,
    dipole: &Dipole,
    coil: &Vector3<f64>,
    n: usize,
    term: FixtureTerm,
    order: usize,
) -> Result<Vec<f64>> {
    Ok(match (term.problem, term.term) {
        (Problem::Eeg, Term::Surface) => integrals::eeg_surface(geom, face, normal, cond, dipole, order)?[..n].to_vec(),
        (Problem::Eeg, Term::Transition) => integrals::eeg_transition(geom, sigma, chi, cond, dipole, order)?[..n].to_vec(),
        (Problem::Eeg, Term::Patch) => integrals::eeg_patch(geom, sigma, cond, dipole, order)?[..n].to_vec(),
        (Problem::Meg, Term::Surface) => {
            integrals::meg_surface(geom, face, normal, cond, dipole, coil, order)?.as_slice().to_vec()
        }
        (Problem::Meg, Term::Transition) => {
            integrals::meg_transition(geom, sigma, chi, cond, dipole, coil, order)?.as_slice().to_vec()
        }
        (Problem::Meg, Term::Patch) => {
            integrals::meg_patch(geom, sigma, cond, dipole, coil, order)?.as_slice().to_vec()
        }
    })
}

/// `‖v(order) - v(oracle)‖ / ‖v(oracle)‖`.
pub fn fixture_error(kind: ElementKind, term: FixtureTerm, d: f64, order: usize) -> Result<f64> {
    let oracle = fixture_values(kind, term, d, ORACLE_ORDER)?;
    let v = fixture_values(kind, term, d, order)?;
    let den = oracle.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(v.iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_unit_sized() {
        for kind in [ElementKind::Tet, ElementKind::Hex] {
            let pts = fixture_points(kind);
            let a = kind
                .edges()
                .iter()
                .map(|[i, j]| (pts[*i] - pts[*j]).norm())
                .fold(0.0, f64::max);
            assert!((a - 1.0).abs() < 1e-14);
            for [i, j] in kind.edges() {
                assert!(((pts[*i] - pts[*j]).norm() - 1.0).abs() < 1e-14);
            }
            let m = fixture_mesh(kind);
            assert_eq!(m.face_normal(0, near_face(&m)), Vector3::x());
        }
        assert!((fixture_mesh(ElementKind::Tet).volume(0) - 1.0 / (6.0 * 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn oracle_has_zero_error() {
        for t in FixtureTerm::ALL {
            assert_eq!(fixture_error(ElementKind::Hex, t, 0.5, ORACLE_ORDER).unwrap(), 0.0);
        }
    }

    #[test]
    fn order_cap() {
        let t = FixtureTerm::ALL[0];
        assert!(matches!(fixture_error(ElementKind::Tet, t, 1.0, 61), Err(Error::OrderTooHigh(61))));
    }

    #[test]
    fn hex_patch_recommended_order() {
        let t = FixtureTerm { problem: Problem::Eeg, term: Term::Patch };
        assert!(fixture_error(ElementKind::Hex, t, 0.5, 8).unwrap() < 1e-3);
    }
}
