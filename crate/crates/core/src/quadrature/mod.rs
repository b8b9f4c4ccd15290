//! Reference-element quadrature of arbitrary polynomial exactness.
//!
//! Reference domains:
//! - triangle `{x, y >= 0, x + y <= 1}` (measure 1/2)
//! - tetrahedron `{x, y, z >= 0, x + y + z <= 1}` (measure 1/6)
//! - quadrilateral `[0, 1]^2` and hexahedron `[0, 1]^3` (measure 1)
//!
//! Points are stored as 3-vectors; unused coordinates are zero.

mod gauss;
mod orders;
mod simplex;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use gauss::{gauss_legendre, gauss_legendre_unit};
pub use orders::{fixed_orders, select_tet_patch_order, OrderPolicy, Problem, Term};
pub use simplex::grundmann_moller;

/// Highest order any rule constructor accepts.
pub const MAX_ORDER: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Triangle,
    Tetrahedron,
    Quadrilateral,
    Hexahedron,
}

impl Domain {
    pub fn dim(self) -> usize {
        match self {
            Domain::Triangle | Domain::Quadrilateral => 2,
            Domain::Tetrahedron | Domain::Hexahedron => 3,
        }
    }

    pub fn measure(self) -> f64 {
        match self {
            Domain::Triangle => 0.5,
            Domain::Tetrahedron => 1.0 / 6.0,
            Domain::Quadrilateral | Domain::Hexahedron => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub order: usize,
    pub domain: Domain,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector3<f64>, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Integrate a scalar function over the reference domain.
    pub fn integrate(&self, f: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::OrderTooHigh(order))
    } else {
        Ok(())
    }
}

/// Collapsed tensor-product Gauss rule on the reference simplex of dimension 2 or 3,
/// exact for total degree `order`. All weights are positive.
pub fn simplex_rule(dim: usize, order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    match dim {
        2 => Ok(simplex::collapsed_triangle(order)),
        3 => Ok(simplex::collapsed_tetrahedron(order)),
        _ => Err(Error::Dimension(format!("simplex rules exist for dim 2|3, got {dim}"))),
    }
}

/// Tensor Gauss–Legendre rule on `[0, 1]^dim`, exact for degree `order` in each variable.
pub fn cube_rule(dim: usize, order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    let n = gauss::points_for_degree(order);
    let (x, w) = gauss_legendre_unit(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        2 => {
            for j in 0..n {
                for i in 0..n {
                    points.push(Vector3::new(x[i], x[j], 0.0));
                    weights.push(w[i] * w[j]);
                }
            }
        }
        3 => {
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        points.push(Vector3::new(x[i], x[j], x[k]));
                        weights.push(w[i] * w[j] * w[k]);
                    }
                }
            }
        }
        _ => return Err(Error::Dimension(format!("cube rules exist for dim 2|3, got {dim}"))),
    }
    Ok(QuadratureRule {
        points,
        weights,
        order,
        domain: if dim == 2 {
            Domain::Quadrilateral
        } else {
            Domain::Hexahedron
        },
    })
}

type Cache = Mutex<HashMap<(Domain, usize), Arc<QuadratureRule>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoised rule for a domain and order. Safe to call from many threads.
pub fn rule(domain: Domain, order: usize) -> Result<Arc<QuadratureRule>> {
    check_order(order)?;
    if let Some(r) = cache().lock().unwrap().get(&(domain, order)) {
        return Ok(Arc::clone(r));
    }
    let built = Arc::new(match domain {
        Domain::Triangle => simplex_rule(2, order)?,
        Domain::Tetrahedron => simplex_rule(3, order)?,
        Domain::Quadrilateral => cube_rule(2, order)?,
        Domain::Hexahedron => cube_rule(3, order)?,
    });
    let mut guard = cache().lock().unwrap();
    Ok(Arc::clone(guard.entry((domain, order)).or_insert(built)))
}
