//! One EEG forward solve on the four-layer voxel sphere, compared with the series solution.
//!
//! `cargo run --release --example sphere_eeg -- [h_mm] [eccentricity]`
//!
//! Voxel spheres resolve the 2 mm CSF layer poorly, so expect tens of percent at
//! h = 4 mm; the localized and full-subtraction errors should nonetheless agree.

use locsub::fields::Dipole;
use locsub::forward::{Approach, EegEngine, ForwardModel};
use locsub::mesh::{generate_voxel_sphere, SphereModel};
use locsub::quadrature::Problem;
use locsub::reference::{fibonacci_points, MultilayerSphere};
use locsub::study::relative_error;
use nalgebra::Vector3;

fn main() -> locsub::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("number"));
    let h = args.next().unwrap_or(4.0);
    let ecc = args.next().unwrap_or(0.9);

    let model = SphereModel::default();
    let mesh = generate_voxel_sphere(&model, h)?;
    println!("{} vertices, {} elements", mesh.num_vertices(), mesh.num_elements());
    let fwd = ForwardModel::new(mesh, Default::default(), Default::default());
    let electrodes = fibonacci_points(64, model.outer_radius_m(), &model.center_m());
    let engine = EegEngine::new(&fwd, &electrodes)?;

    let pos = Vector3::new(0.3, 0.2, 0.93).normalize() * ecc * model.brain_radius_m();
    let dipole = Dipole::new(pos, Vector3::new(1.0, -0.5, 0.0).normalize());
    let sphere = MultilayerSphere::new(&model)?;
    // reference at the electrode vertices, pushed back onto the outer sphere
    let reference: Vec<f64> = engine
        .sites
        .iter()
        .map(|s| {
            let x = fwd.mesh.vertices()[s.vertex].normalize() * model.outer_radius_m();
            sphere.potential(&dipole, &x)
        })
        .collect::<locsub::Result<_>>()?;

    for (approach, n) in [(Approach::Localized, 0), (Approach::Localized, 2), (Approach::FullSubtraction, 0)] {
        let f = engine.forward(&fwd, &dipole, approach, n)?;
        let err = relative_error(&f.values, &reference, Problem::Eeg)?;
        println!(
            "{approach:?} n={n}: relative error {err:.4}, assembly {:.2} ms, apply {:.2} ms",
            f.assembly.as_secs_f64() * 1e3,
            f.solve.as_secs_f64() * 1e3
        );
    }
    Ok(())
}
