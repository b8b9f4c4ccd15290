//! EEG right-hand sides and stiffness matrix.

pub mod analytic;
mod rhs;
mod stiffness;

pub use analytic::{transition_integral_analytic_tet, FaceGeometry};
pub use rhs::{assemble_rhs_full, assemble_rhs_localized, full_patch, source_conductivity, RhsOptions};
pub use stiffness::assemble_stiffness;
