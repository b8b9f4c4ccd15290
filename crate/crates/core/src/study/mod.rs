//! Desk-scale studies on sphere models: accuracy sweeps, vertex-extension
//! comparison, single-element quadrature errors and assembly timing.
//!
//! Every study returns a [`StudyOutput`]; the main CSV is a pure function of the
//! config, while wall-clock times go to a separate timings table.

mod config;
pub mod fixtures;
mod output;
mod runs;

pub use config::{default_eccentricities, IntegrationConfig, MeshSource, Orientation, SensorConfig, StudyConfig};
pub use output::{fmt_f64, StudyOutput, SCHEMA_VERSION};
pub use runs::{
    generate_dipoles, run_extension_study, run_extension_study_on, run_integration_study, run_sphere_study,
    run_sphere_study_on, run_timing_study, run_timing_study_on, Setup, StudyDipole, TimingSummary,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::Problem;
use crate::solver::zero_mean;

/// Relative error of a forward solution.
///
/// EEG compares zero-mean vectors, so a constant offset is ignored. MEG values
/// are stacked field vectors, compared as they are.
pub fn relative_error(numeric: &[f64], analytic: &[f64], problem: Problem) -> Result<f64> {
    if numeric.len() != analytic.len() {
        return Err(Error::Dimension(format!(
            "{} numeric values against {} reference values",
            numeric.len(),
            analytic.len()
        )));
    }
    let (a, b) = match problem {
        Problem::Eeg => (zero_mean(numeric)?, zero_mean(analytic)?),
        Problem::Meg => (numeric.to_vec(), analytic.to_vec()),
    };
    let den = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / den)
}

/// Order statistics of the finite entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub failures: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Summary {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let failures = values.len() - v.len();
    if v.is_empty() {
        return Summary {
            count: 0,
            failures,
            min: f64::NAN,
            q1: f64::NAN,
            median: f64::NAN,
            q3: f64::NAN,
            max: f64::NAN,
        };
    }
    Summary {
        count: v.len(),
        failures,
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    }
}
