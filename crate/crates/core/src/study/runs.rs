use std::time::{Duration, Instant};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::config::{Orientation, StudyConfig};
use super::fixtures::fixture_error;
use super::output::{fmt_f64, StudyOutput, Table};
use super::{relative_error, summarize, Summary};
use crate::error::{Error, Result};
use crate::fields::Dipole;
use crate::forward::{Approach, EegEngine, Forward, ForwardModel, MegEngine};
use crate::meg::Coil;
use crate::mesh::Mesh;
use crate::parallel::{map_slice, Execution};
use crate::quadrature::Problem;
use crate::reference::{fibonacci_points, sphere_meg_analytic, MultilayerSphere};
use crate::solver::CgOptions;

/// Mesh, engines and reference solution shared by the sphere studies.
pub struct Setup {
    pub model: ForwardModel,
    pub sphere: MultilayerSphere,
    pub problem: Problem,
    pub eeg: Option<EegEngine>,
    /// Electrode vertices pushed radially onto the outer sphere, where the
    /// reference potential is evaluated.
    pub eeg_points: Vec<Vector3<f64>>,
    pub meg: Option<MegEngine>,
    pub coils: Vec<Coil>,
}

impl Setup {
    /// Build the mesh from the config, then everything else.
    pub fn new(config: &StudyConfig, meg_transfer: bool) -> Result<Self> {
        Self::from_mesh(config.build_mesh()?, config, meg_transfer)
    }

    /// `meg_transfer` selects one solve per coil component up front instead of one
    /// solve per dipole.
    pub fn from_mesh(mesh: Mesh, config: &StudyConfig, meg_transfer: bool) -> Result<Self> {
        let cg = CgOptions {
            tol: config.solver_tol,
            ..Default::default()
        };
        let model = ForwardModel::new(mesh, cg, Default::default());
        let sphere = MultilayerSphere::new(&config.model)?;
        let layout = config.layout()?;
        let (mut eeg, mut eeg_points, mut meg, mut coils) = (None, Vec::new(), None, Vec::new());
        match config.problem {
            Problem::Eeg => {
                let engine = EegEngine::new(&model, &layout.electrode_points())?;
                let c = sphere.center();
                let r = sphere.outer_radius();
                eeg_points = engine
                    .sites
                    .iter()
                    .map(|s| c + (model.mesh.vertices()[s.vertex] - c).normalize() * r)
                    .collect();
                eeg = Some(engine);
            }
            Problem::Meg => {
                coils = layout.coil_set();
                meg = Some(MegEngine::new(&model, &coils, meg_transfer)?);
            }
        }
        Ok(Self {
            model,
            sphere,
            problem: config.problem,
            eeg,
            eeg_points,
            meg,
            coils,
        })
    }

    /// Analytic sensor values; MEG fields are stacked `[x, y, z]` per coil.
    pub fn reference(&self, dipole: &Dipole) -> Result<Vec<f64>> {
        match self.problem {
            Problem::Eeg => self.eeg_points.iter().map(|x| self.sphere.potential(dipole, x)).collect(),
            Problem::Meg => {
                let pos: Vec<Vector3<f64>> = self.coils.iter().map(|c| c.position).collect();
                Ok(stack(&sphere_meg_analytic(dipole, self.sphere.center(), &pos)?))
            }
        }
    }

    /// Numeric sensor values in the layout of [`Setup::reference`].
    pub fn forward(&self, dipole: &Dipole, approach: Approach, n_extensions: usize) -> Result<Forward<Vec<f64>>> {
        match (&self.eeg, &self.meg) {
            (Some(e), _) => e.forward(&self.model, dipole, approach, n_extensions),
            (_, Some(m)) => {
                let f = m.forward(&self.model, dipole, approach, n_extensions)?;
                Ok(Forward {
                    values: stack(&f.values),
                    assembly: f.assembly,
                    solve: f.solve,
                })
            }
            _ => unreachable!("setup always has one engine"),
        }
    }
}

fn stack(v: &[Vector3<f64>]) -> Vec<f64> {
    v.iter().flat_map(|b| [b.x, b.y, b.z]).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct StudyDipole {
    pub index: usize,
    pub eccentricity: f64,
    pub dipole: Dipole,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Uniformly distributed rotation from three uniform numbers.
fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = 2.0 * std::f64::consts::PI;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    UnitQuaternion::from_quaternion(Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ))
}

/// Unit-moment dipoles: per eccentricity, Fibonacci points on the sphere of that
/// radius under a random rotation. Returns the dipoles and the rotation used for
/// each eccentricity as `[w, x, y, z]`.
pub fn generate_dipoles(config: &StudyConfig) -> (Vec<StudyDipole>, Vec<[f64; 4]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let center = config.model.center_m();
    let brain = config.model.brain_radius_m();
    let mut out = Vec::new();
    let mut rotations = Vec::new();
    // rotations first, so radial and tangential runs share positions
    let rots: Vec<UnitQuaternion<f64>> = config.eccentricities.iter().map(|_| random_rotation(&mut rng)).collect();
    for (&ecc, rot) in config.eccentricities.iter().zip(&rots) {
        rotations.push([rot.w, rot.i, rot.j, rot.k]);
        for p in fibonacci_points(config.dipoles_per_eccentricity, ecc * brain, &Vector3::zeros()) {
            let position = center + rot * p;
            let radial = p.normalize();
            let moment = match config.orientation {
                Orientation::Radial => rot * radial,
                Orientation::Tangential => loop {
                    let v = random_unit(&mut rng);
                    let t = v - radial * v.dot(&radial);
                    if t.norm() > 0.1 {
                        break rot * t.normalize();
                    }
                },
            };
            out.push(StudyDipole {
                index: out.len(),
                eccentricity: ecc,
                dipole: Dipole::new(position, moment),
            });
        }
    }
    (out, rotations)
}

/// Errors that only concern one dipole's placement in the mesh.
fn is_placement_error(e: &Error) -> bool {
    matches!(
        e,
        Error::OutsideMesh(..) | Error::AmbiguousContainment(_) | Error::NonConstantSourceConductivity(_)
    )
}

fn placement_status(e: &Error) -> String {
    match e {
        Error::OutsideMesh(..) => "outside-mesh".into(),
        Error::AmbiguousContainment(_) => "ambiguous-containment".into(),
        _ => "non-constant-source-conductivity".into(),
    }
}

struct Row {
    status: String,
    error: f64,
    magnitude: f64,
    reference_magnitude: f64,
    assembly: Duration,
    solve: Duration,
}

fn dipole_cells(d: &StudyDipole) -> Vec<String> {
    let p = &d.dipole.position;
    let m = &d.dipole.moment;
    let mut v = vec![d.index.to_string(), fmt_f64(d.eccentricity)];
    v.extend([p.x, p.y, p.z, m.x, m.y, m.z].map(fmt_f64));
    v
}

const DIPOLE_HEADER: [&str; 8] = ["index", "eccentricity", "x", "y", "z", "mx", "my", "mz"];

fn header(extra: &[&str]) -> Vec<String> {
    DIPOLE_HEADER.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn silent_meg(setup: &Setup, config: &StudyConfig) -> bool {
    setup.problem == Problem::Meg && config.orientation == Orientation::Radial
}

fn evaluate(setup: &Setup, d: &StudyDipole, approach: Approach, n: usize, silent: bool) -> Result<Row> {
    let reference = setup.reference(&d.dipole)?;
    match setup.forward(&d.dipole, approach, n) {
        Ok(f) => Ok(Row {
            status: "ok".into(),
            error: if silent {
                f64::NAN
            } else {
                relative_error(&f.values, &reference, setup.problem)?
            },
            magnitude: norm(&f.values),
            reference_magnitude: norm(&reference),
            assembly: f.assembly,
            solve: f.solve,
        }),
        Err(e) if is_placement_error(&e) => Ok(Row {
            status: placement_status(&e),
            error: f64::NAN,
            magnitude: f64::NAN,
            reference_magnitude: norm(&reference),
            assembly: Duration::ZERO,
            solve: Duration::ZERO,
        }),
        Err(e) => Err(e),
    }
}

fn mesh_info(setup: &Setup) -> serde_json::Value {
    let m = &setup.model.mesh;
    json!({"kind": m.kind(), "vertices": m.num_vertices(), "elements": m.num_elements()})
}

fn summary_cells(group: String, s: &Summary) -> Vec<String> {
    let mut v = vec![group, s.count.to_string(), s.failures.to_string()];
    v.extend([s.min, s.q1, s.median, s.q3, s.max].map(fmt_f64));
    v
}

fn summary_header(group: &str) -> Vec<String> {
    [group, "count", "failures", "min", "q1", "median", "q3", "max"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Accuracy sweep over the configured eccentricities.
pub fn run_sphere_study(config: &StudyConfig) -> Result<StudyOutput> {
    config.validate()?;
    let n = config.eccentricities.len() * config.dipoles_per_eccentricity;
    let meg_transfer = 3 * config.sensors.coils < n;
    let setup = Setup::new(config, meg_transfer)?;
    run_sphere_study_on(&setup, config)
}

/// Same as [`run_sphere_study`] on an existing setup; mesh and sensors in the
/// config are ignored.
pub fn run_sphere_study_on(setup: &Setup, config: &StudyConfig) -> Result<StudyOutput> {
    let (dipoles, rotations) = generate_dipoles(config);
    let silent = silent_meg(setup, config);
    let mut warnings = Vec::new();
    if silent {
        warnings.push(
            "radial dipoles produce no magnetic field outside a spherical conductor; \
             reporting field magnitudes instead of relative errors"
                .to_string(),
        );
    }
    let rows = map_slice(setup.model.cg.exec, &dipoles, |d| {
        evaluate(setup, d, config.approach, config.n_extensions, silent)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let approach = serde_json::to_value(config.approach)?.as_str().unwrap_or_default().to_string();
    let mut table = Table::new(
        "sphere-study",
        header(&["approach", "n_extensions", "status", "error", "magnitude", "reference_magnitude"]),
    );
    let mut timings = Table::new("sphere-study-timings", vec!["index".into(), "assembly_s".into(), "solve_s".into()]);
    for (d, r) in dipoles.iter().zip(&rows) {
        let mut cells = dipole_cells(d);
        cells.extend([
            approach.clone(),
            config.n_extensions.to_string(),
            r.status.clone(),
            fmt_f64(r.error),
            fmt_f64(r.magnitude),
            fmt_f64(r.reference_magnitude),
        ]);
        table.push(cells);
        timings.push(vec![
            d.index.to_string(),
            fmt_f64(r.assembly.as_secs_f64()),
            fmt_f64(r.solve.as_secs_f64()),
        ]);
    }
    for r in rows.iter().filter(|r| r.status != "ok") {
        warnings.push(format!("dipole placement failed: {}", r.status));
    }

    let metric = if silent { "magnitude" } else { "error" };
    let mut summary = Table::new("sphere-study-summary", summary_header("eccentricity"));
    let mut groups = Vec::new();
    for &ecc in &config.eccentricities {
        let vals: Vec<f64> = dipoles
            .iter()
            .zip(&rows)
            .filter(|(d, _)| d.eccentricity == ecc)
            .map(|(_, r)| if silent { r.magnitude } else { r.error })
            .collect();
        let s = summarize(&vals);
        summary.push(summary_cells(fmt_f64(ecc), &s));
        groups.push(json!({"eccentricity": ecc, "stats": s}));
    }
    let all: Vec<f64> = rows.iter().map(|r| if silent { r.magnitude } else { r.error }).collect();
    Ok(StudyOutput {
        csv: table.render()?,
        summary_csv: summary.render()?,
        summary: json!({
            "study": "sphere-study",
            "schema": super::SCHEMA_VERSION,
            "seed": config.seed,
            "problem": config.problem,
            "approach": config.approach,
            "n_extensions": config.n_extensions,
            "orientation": config.orientation,
            "metric": metric,
            "mesh": mesh_info(setup),
            "rotations": rotations,
            "overall": summarize(&all),
            "groups": groups,
        }),
        timings_csv: Some(timings.render()?),
        warnings,
    })
}

/// Error of every dipole for each extension count and for full subtraction.
pub fn run_extension_study(config: &StudyConfig) -> Result<StudyOutput> {
    config.validate()?;
    let n = config.eccentricities.len() * config.dipoles_per_eccentricity * (config.extensions.len() + 1);
    let setup = Setup::new(config, 3 * config.sensors.coils < n)?;
    run_extension_study_on(&setup, config)
}

pub fn run_extension_study_on(setup: &Setup, config: &StudyConfig) -> Result<StudyOutput> {
    if config.extensions.is_empty() {
        return Err(Error::Config("extension study needs at least one extension count".into()));
    }
    let (dipoles, rotations) = generate_dipoles(config);
    let silent = silent_meg(setup, config);
    let mut cases: Vec<(Approach, usize)> = config.extensions.iter().map(|&k| (Approach::Localized, k)).collect();
    cases.push((Approach::FullSubtraction, 0));
    let results = map_slice(setup.model.cg.exec, &dipoles, |d| {
        cases
            .iter()
            .map(|&(a, k)| evaluate(setup, d, a, k, silent))
            .collect::<Result<Vec<Row>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut names: Vec<String> = config.extensions.iter().map(|k| format!("n{k}")).collect();
    names.push("full".into());
    let value = |r: &Row| if silent { r.magnitude } else { r.error };
    let prefix = if silent { "magnitude" } else { "error" };
    let cols: Vec<String> = names.iter().map(|g| format!("{prefix}_{g}")).collect();
    let mut extra = vec!["status"];
    extra.extend(cols.iter().map(|s| s.as_str()));
    let mut table = Table::new("extension-study", header(&extra));
    let mut timings = Table::new(
        "extension-study-timings",
        ["index", "case", "assembly_s", "solve_s"].iter().map(|s| s.to_string()).collect(),
    );
    let mut warnings = Vec::new();
    if silent {
        warnings.push("radial dipoles produce no magnetic field outside a spherical conductor; reporting magnitudes".into());
    }
    for (d, rs) in dipoles.iter().zip(&results) {
        let status = rs.iter().map(|r| r.status.as_str()).find(|s| *s != "ok").unwrap_or("ok");
        if status != "ok" {
            warnings.push(format!("dipole {} placement failed: {status}", d.index));
        }
        let mut cells = dipole_cells(d);
        cells.push(status.to_string());
        cells.extend(rs.iter().map(|r| fmt_f64(value(r))));
        table.push(cells);
        for (g, r) in names.iter().zip(rs) {
            timings.push(vec![
                d.index.to_string(),
                g.clone(),
                fmt_f64(r.assembly.as_secs_f64()),
                fmt_f64(r.solve.as_secs_f64()),
            ]);
        }
    }
    let mut summary = Table::new("extension-study-summary", summary_header("case"));
    let mut groups = Vec::new();
    for (i, g) in names.iter().enumerate() {
        let vals: Vec<f64> = results.iter().map(|rs| value(&rs[i])).collect();
        let s = summarize(&vals);
        summary.push(summary_cells(g.clone(), &s));
        groups.push(json!({"case": g, "stats": s}));
    }
    Ok(StudyOutput {
        csv: table.render()?,
        summary_csv: summary.render()?,
        summary: json!({
            "study": "extension-study",
            "schema": super::SCHEMA_VERSION,
            "seed": config.seed,
            "problem": config.problem,
            "extensions": config.extensions,
            "orientation": config.orientation,
            "metric": prefix,
            "mesh": mesh_info(setup),
            "rotations": rotations,
            "groups": groups,
        }),
        timings_csv: Some(timings.render()?),
        warnings,
    })
}

/// Quadrature error on the single-element fixtures for every (term, ratio, order).
pub fn run_integration_study(config: &StudyConfig) -> Result<StudyOutput> {
    config.validate()?;
    let ic = &config.integration;
    let mut jobs = Vec::new();
    for &t in &ic.terms {
        for &r in &ic.ratios {
            for &o in &ic.orders {
                jobs.push((t, r, o));
            }
        }
    }
    let errors = map_slice(Execution::Parallel, &jobs, |&(t, r, o)| fixture_error(ic.element, t, r, o))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let element = serde_json::to_value(ic.element)?.as_str().unwrap_or_default().to_string();
    let mut table = Table::new(
        "integration-study",
        ["element", "term", "ratio", "order", "error"].iter().map(|s| s.to_string()).collect(),
    );
    for (&(t, r, o), e) in jobs.iter().zip(&errors) {
        table.push(vec![element.clone(), t.name(), fmt_f64(r), o.to_string(), fmt_f64(*e)]);
    }
    // smallest sampled order reaching each tolerance
    let tols = [1e-3, 1e-6];
    let mut summary = Table::new(
        "integration-study-summary",
        ["element", "term", "ratio", "min_order_1e-3", "min_order_1e-6"].iter().map(|s| s.to_string()).collect(),
    );
    let mut groups = Vec::new();
    for &t in &ic.terms {
        for &r in &ic.ratios {
            let sampled: Vec<(usize, f64)> = jobs
                .iter()
                .zip(&errors)
                .filter(|((jt, jr, _), _)| *jt == t && *jr == r)
                .map(|(&(_, _, o), &e)| (o, e))
                .collect();
            let reach: Vec<Option<usize>> = tols
                .iter()
                .map(|&tol| sampled.iter().filter(|(_, e)| *e <= tol).map(|(o, _)| *o).min())
                .collect();
            let cell = |o: Option<usize>| o.map(|o| o.to_string()).unwrap_or_default();
            summary.push(vec![element.clone(), t.name(), fmt_f64(r), cell(reach[0]), cell(reach[1])]);
            groups.push(json!({"term": t.name(), "ratio": r, "min_order_1e-3": reach[0], "min_order_1e-6": reach[1]}));
        }
    }
    Ok(StudyOutput {
        csv: table.render()?,
        summary_csv: summary.render()?,
        summary: json!({
            "study": "integration-study",
            "schema": super::SCHEMA_VERSION,
            "element": ic.element,
            "oracle_order": super::fixtures::ORACLE_ORDER,
            "groups": groups,
        }),
        timings_csv: None,
        warnings: Vec::new(),
    })
}

/// Total source-assembly plus transfer-application time per approach and repeat.
#[derive(Clone, Debug, Serialize)]
pub struct TimingSummary {
    pub dipoles: usize,
    pub localized_s: Vec<f64>,
    pub full_s: Vec<f64>,
    /// localized / full per repeat.
    pub ratios: Vec<f64>,
}

/// Transfer matrices are built before the clock starts.
pub fn run_timing_study(config: &StudyConfig) -> Result<StudyOutput> {
    config.validate()?;
    let setup = Setup::new(config, true)?;
    Ok(run_timing_study_on(&setup, config)?.0)
}

pub fn run_timing_study_on(setup: &Setup, config: &StudyConfig) -> Result<(StudyOutput, TimingSummary)> {
    let (dipoles, _) = generate_dipoles(config);
    if let Some(m) = &setup.meg {
        if m.transfer.is_none() {
            return Err(Error::Config("timing study needs a precomputed MEG transfer".into()));
        }
    }
    let mut table = Table::new(
        "timing-study",
        [
            "repeat", "approach", "n_extensions", "dipoles", "failures", "assembly_s", "apply_s", "total_s", "wall_s",
        ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    let mut ts = TimingSummary {
        dipoles: dipoles.len(),
        localized_s: Vec::new(),
        full_s: Vec::new(),
        ratios: Vec::new(),
    };
    for rep in 0..config.repeats {
        for (approach, n) in [(Approach::Localized, config.n_extensions), (Approach::FullSubtraction, 0)] {
            let (mut asm, mut apply, mut failures) = (Duration::ZERO, Duration::ZERO, 0usize);
            let start = Instant::now();
            for d in &dipoles {
                match setup.forward(&d.dipole, approach, n) {
                    Ok(f) => {
                        asm += f.assembly;
                        apply += f.solve;
                    }
                    Err(e) if is_placement_error(&e) => failures += 1,
                    Err(e) => return Err(e),
                }
            }
            let wall = start.elapsed();
            let total = (asm + apply).as_secs_f64();
            match approach {
                Approach::Localized => ts.localized_s.push(total),
                Approach::FullSubtraction => ts.full_s.push(total),
            }
            let name = serde_json::to_value(approach)?.as_str().unwrap_or_default().to_string();
            table.push(vec![
                rep.to_string(),
                name,
                n.to_string(),
                dipoles.len().to_string(),
                failures.to_string(),
                fmt_f64(asm.as_secs_f64()),
                fmt_f64(apply.as_secs_f64()),
                fmt_f64(total),
                fmt_f64(wall.as_secs_f64()),
            ]);
        }
        ts.ratios.push(ts.localized_s[rep] / ts.full_s[rep]);
    }
    let mut summary = Table::new(
        "timing-study-summary",
        ["repeat", "localized_s", "full_s", "ratio"].iter().map(|s| s.to_string()).collect(),
    );
    for (i, r) in ts.ratios.iter().enumerate() {
        summary.push(vec![i.to_string(), fmt_f64(ts.localized_s[i]), fmt_f64(ts.full_s[i]), fmt_f64(*r)]);
    }
    let out = StudyOutput {
        csv: table.render()?,
        summary_csv: summary.render()?,
        summary: json!({
            "study": "timing-study",
            "schema": super::SCHEMA_VERSION,
            "seed": config.seed,
            "problem": config.problem,
            "mesh": mesh_info(setup),
            "timing": ts,
            "ratio": summarize(&ts.ratios),
        }),
        timings_csv: None,
        warnings: Vec::new(),
    };
    Ok((out, ts))
}
