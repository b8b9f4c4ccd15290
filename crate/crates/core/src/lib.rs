//! Finite-element EEG/MEG forward simulation with a localized subtraction source model.

pub mod eeg;
pub mod element;
pub mod error;
pub mod fields;
pub mod forward;
pub mod integrals;
pub mod meg;
pub mod mesh;
pub mod parallel;
pub mod quadrature;
pub mod reference;
pub mod solver;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
