//! Forward simulation for point dipoles on a fixed mesh and sensor set.

use std::time::{Duration, Instant};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::eeg::{assemble_rhs_localized, assemble_stiffness, full_patch, RhsOptions};
use crate::error::{Error, Result};
use crate::fields::{primary_b, u_infinity, Dipole, HomogeneousConductivity, MU0_OVER_4PI};
use crate::meg::{correction_lead_vectors, singular_flux, Coil, LeadVectors, MegTransfer};
use crate::mesh::{build_patch, Mesh, Patch};
use crate::solver::{cg_solve, compute_transfer, zero_mean, CgOptions, TransferMatrix};
use crate::sparse::{CsrMatrix, SparseVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    #[default]
    Localized,
    FullSubtraction,
}

/// Electrode position snapped to the nearest outer-surface vertex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElectrodeSite {
    pub vertex: usize,
    /// Distance from the requested position to the vertex.
    pub distance: f64,
}

/// Nearest boundary vertex for each point.
pub fn map_electrodes(mesh: &Mesh, points: &[Vector3<f64>]) -> Result<Vec<ElectrodeSite>> {
    let boundary = mesh.boundary_vertices();
    if boundary.is_empty() {
        return Err(Error::Empty);
    }
    let verts = mesh.vertices();
    Ok(points
        .iter()
        .map(|p| {
            let (vertex, distance) = boundary
                .iter()
                .map(|&v| (v, (verts[v] - p).norm()))
                .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            ElectrodeSite { vertex, distance }
        })
        .collect())
}

/// Mesh, stiffness matrix and solver settings shared by EEG and MEG.
pub struct ForwardModel {
    pub mesh: Mesh,
    pub stiffness: CsrMatrix,
    pub cg: CgOptions,
    pub rhs: RhsOptions,
}

/// Source term of one dipole.
pub struct SourceTerm {
    pub patch: Patch,
    pub rhs: SparseVector,
    pub assembly: Duration,
}

impl ForwardModel {
    pub fn new(mesh: Mesh, cg: CgOptions, rhs: RhsOptions) -> Self {
        let stiffness = assemble_stiffness(&mesh, cg.exec);
        Self { mesh, stiffness, cg, rhs }
    }

    pub fn patch(&self, dipole: &Dipole, approach: Approach, n_extensions: usize) -> Result<Patch> {
        match approach {
            Approach::Localized => build_patch(&self.mesh, &dipole.position, n_extensions),
            Approach::FullSubtraction => full_patch(&self.mesh, dipole),
        }
    }

    pub fn source(&self, dipole: &Dipole, approach: Approach, n_extensions: usize) -> Result<SourceTerm> {
        let t = Instant::now();
        let patch = self.patch(dipole, approach, n_extensions)?;
        let rhs = assemble_rhs_localized(&self.mesh, &patch, dipole, &self.rhs)?;
        Ok(SourceTerm {
            patch,
            rhs,
            assembly: t.elapsed(),
        })
    }

    /// Correction potential at all vertices.
    ///
    /// The right-hand side is projected onto zero-sum vectors first. A transfer
    /// matrix does the same implicitly, so both paths agree; only a source term
    /// whose surface integral is under-resolved (no extensions) has a mean to lose.
    pub fn solve(&self, rhs: &SparseVector) -> Result<Vec<f64>> {
        let b = zero_mean(&rhs.to_dense(self.stiffness.n()))?;
        Ok(cg_solve(&self.stiffness, &b, &self.cg)?.x)
    }

    /// `χ u∞` at vertex `v`.
    pub fn singular_part(&self, patch: &Patch, dipole: &Dipole, v: usize) -> Result<f64> {
        let chi = patch.chi(v);
        if chi == 0.0 {
            return Ok(0.0);
        }
        let cond = HomogeneousConductivity::new(patch.sigma_inf)?;
        Ok(chi * u_infinity(&cond, dipole, &self.mesh.vertices()[v])?)
    }
}

/// Result of one forward computation.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    pub values: T,
    pub assembly: Duration,
    pub solve: Duration,
}

pub struct EegEngine {
    pub sites: Vec<ElectrodeSite>,
    pub transfer: TransferMatrix,
}

impl EegEngine {
    pub fn new(model: &ForwardModel, electrodes: &[Vector3<f64>]) -> Result<Self> {
        let sites = map_electrodes(&model.mesh, electrodes)?;
        let ids: Vec<usize> = sites.iter().map(|s| s.vertex).collect();
        let transfer = compute_transfer(&model.stiffness, &ids, &model.cg)?;
        Ok(Self { sites, transfer })
    }

    /// Electrode potentials up to a common constant.
    pub fn forward(
        &self,
        model: &ForwardModel,
        dipole: &Dipole,
        approach: Approach,
        n_extensions: usize,
    ) -> Result<Forward<Vec<f64>>> {
        let src = model.source(dipole, approach, n_extensions)?;
        let t = Instant::now();
        let mut values = self.transfer.apply(&src.rhs);
        for (v, site) in values.iter_mut().zip(&self.sites) {
            *v += model.singular_part(&src.patch, dipole, site.vertex)?;
        }
        Ok(Forward {
            values,
            assembly: src.assembly,
            solve: t.elapsed(),
        })
    }

    /// Same values by a full solve instead of the transfer matrix.
    pub fn forward_direct(&self, model: &ForwardModel, dipole: &Dipole, approach: Approach, n_extensions: usize) -> Result<Vec<f64>> {
        let src = model.source(dipole, approach, n_extensions)?;
        let u = model.solve(&src.rhs)?;
        let reference = u[self.sites[0].vertex];
        self.sites
            .iter()
            .map(|s| Ok(u[s.vertex] - reference + model.singular_part(&src.patch, dipole, s.vertex)?))
            .collect()
    }
}

pub struct MegEngine {
    pub leads: LeadVectors,
    /// Present when solving once per lead component beats solving once per dipole.
    pub transfer: Option<MegTransfer>,
}

impl MegEngine {
    pub fn new(model: &ForwardModel, coils: &[Coil], with_transfer: bool) -> Result<Self> {
        let leads = correction_lead_vectors(&model.mesh, coils, model.cg.exec)?;
        let transfer = if with_transfer {
            Some(MegTransfer::compute(&model.stiffness, &leads, &model.cg)?)
        } else {
            None
        };
        Ok(Self { leads, transfer })
    }

    /// Total field at every coil.
    pub fn forward(
        &self,
        model: &ForwardModel,
        dipole: &Dipole,
        approach: Approach,
        n_extensions: usize,
    ) -> Result<Forward<Vec<Vector3<f64>>>> {
        let src = model.source(dipole, approach, n_extensions)?;
        let t = Instant::now();
        let u = match &self.transfer {
            Some(_) => None,
            None => Some(model.solve(&src.rhs)?),
        };
        let mut values = Vec::with_capacity(self.leads.coils.len());
        for (c, coil) in self.leads.coils.iter().enumerate() {
            let correction = match (&self.transfer, &u) {
                (Some(tr), _) => tr.correction(c, &src.rhs),
                (None, Some(u)) => self.leads.apply(c, u),
                _ => unreachable!(),
            };
            let flux = correction + singular_flux(&model.mesh, &src.patch, dipole, &coil.position, &model.rhs.policy)?;
            values.push(primary_b(dipole, &coil.position)? - flux * MU0_OVER_4PI);
        }
        Ok(Forward {
            values,
            assembly: src.assembly,
            solve: t.elapsed(),
        })
    }
}
