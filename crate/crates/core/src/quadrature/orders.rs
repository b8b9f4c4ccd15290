//! Integration-order rules for the singular source terms.

use crate::error::{Error, Result};
use crate::mesh::ElementKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Eeg,
    Meg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Surface,
    Transition,
    Patch,
}

/// Patch-flux order for a tetrahedron as a function of the distance/edge ratio.
pub fn select_tet_patch_order(ratio: f64) -> Result<usize> {
    if !(ratio >= 1.0 / 6.0) {
        return Err(Error::RatioOutOfValidity(ratio));
    }
    Ok(match ratio {
        r if r >= 0.5 => 8,
        r if r >= 0.4 => 9,
        r if r >= 0.33 => 11,
        r if r >= 0.25 => 13,
        _ => 20,
    })
}

/// Orders that do not depend on the source position.
///
/// Tetrahedral patch orders depend on d/a and come from [`select_tet_patch_order`];
/// asking for them here is a [`Error::Config`] error.
pub fn fixed_orders(kind: ElementKind, problem: Problem, term: Term) -> Result<usize> {
    match (kind, problem, term) {
        (ElementKind::Hex, _, Term::Surface) => Ok(6),
        (ElementKind::Hex, _, Term::Transition) => Ok(6),
        (ElementKind::Hex, _, Term::Patch) => Ok(8),
        (ElementKind::Tet, Problem::Eeg, _) => Err(Error::AnalyticPathOnly),
        (ElementKind::Tet, Problem::Meg, Term::Surface) => Ok(6),
        (ElementKind::Tet, Problem::Meg, Term::Transition) => Ok(5),
        (ElementKind::Tet, Problem::Meg, Term::Patch) => Err(Error::Config(
            "tetrahedral patch order depends on d/a; use select_tet_patch_order".into(),
        )),
    }
}

/// Orders used by the assembly routines.
///
/// `Default` follows the tables; `uniform` forces one order for every numeric term,
/// which the integration study and the oracles use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrderPolicy {
    pub uniform: Option<usize>,
}

impl OrderPolicy {
    pub fn uniform(order: usize) -> Self {
        Self {
            uniform: Some(order),
        }
    }

    /// Order for a numeric term. `ratio` is the element's d/a and only matters for
    /// tetrahedral patch terms.
    ///
    /// EEG surface faces use 16 (tet) and 10 (hex): their quadrature error is the only
    /// thing keeping `<rhs, 1>` from vanishing, and the solver needs it near 1e-10.
    /// Tetrahedral EEG patch elements use the patch-order table clamped at its last
    /// bucket, anisotropic tet transition elements order 6.
    pub fn order(&self, kind: ElementKind, problem: Problem, term: Term, ratio: f64) -> usize {
        if let Some(o) = self.uniform {
            return o;
        }
        match (kind, term) {
            (ElementKind::Tet, Term::Patch) => select_tet_patch_order(ratio).unwrap_or(20),
            (ElementKind::Tet, Term::Surface) if problem == Problem::Eeg => 16,
            (ElementKind::Hex, Term::Surface) if problem == Problem::Eeg => 10,
            (ElementKind::Tet, Term::Surface) => 6,
            (ElementKind::Tet, Term::Transition) if problem == Problem::Eeg => 6,
            _ => fixed_orders(kind, problem, term).expect("covered by the table"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_buckets() {
        assert_eq!(select_tet_patch_order(0.6).unwrap(), 8);
        assert_eq!(select_tet_patch_order(0.5).unwrap(), 8);
        assert_eq!(select_tet_patch_order(0.45).unwrap(), 9);
        assert_eq!(select_tet_patch_order(0.35).unwrap(), 11);
        assert_eq!(select_tet_patch_order(0.30).unwrap(), 13);
        assert_eq!(select_tet_patch_order(0.2).unwrap(), 20);
        assert_eq!(select_tet_patch_order(1.0 / 6.0).unwrap(), 20);
        assert!(matches!(
            select_tet_patch_order(0.10),
            Err(Error::RatioOutOfValidity(_))
        ));
        assert!(select_tet_patch_order(f64::NAN).is_err());
    }

    #[test]
    fn fixed_table() {
        assert_eq!(fixed_orders(ElementKind::Hex, Problem::Eeg, Term::Patch).unwrap(), 8);
        assert_eq!(fixed_orders(ElementKind::Hex, Problem::Meg, Term::Surface).unwrap(), 6);
        assert_eq!(fixed_orders(ElementKind::Hex, Problem::Eeg, Term::Transition).unwrap(), 6);
        assert_eq!(fixed_orders(ElementKind::Tet, Problem::Meg, Term::Surface).unwrap(), 6);
        assert_eq!(fixed_orders(ElementKind::Tet, Problem::Meg, Term::Transition).unwrap(), 5);
        assert!(matches!(
            fixed_orders(ElementKind::Tet, Problem::Eeg, Term::Surface),
            Err(Error::AnalyticPathOnly)
        ));
    }

    #[test]
    fn policy_defaults() {
        let p = OrderPolicy::default();
        assert_eq!(p.order(ElementKind::Tet, Problem::Meg, Term::Patch, 0.3), 13);
        assert_eq!(p.order(ElementKind::Tet, Problem::Eeg, Term::Patch, 0.05), 20);
        assert_eq!(p.order(ElementKind::Tet, Problem::Eeg, Term::Transition, 1.0), 6);
        assert_eq!(p.order(ElementKind::Tet, Problem::Eeg, Term::Surface, 1.0), 16);
        assert_eq!(p.order(ElementKind::Hex, Problem::Eeg, Term::Surface, 1.0), 10);
        assert_eq!(p.order(ElementKind::Hex, Problem::Meg, Term::Surface, 1.0), 6);
        assert_eq!(OrderPolicy::uniform(50).order(ElementKind::Hex, Problem::Eeg, Term::Patch, 1.0), 50);
    }
}
