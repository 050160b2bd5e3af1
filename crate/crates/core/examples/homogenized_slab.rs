//! Homogenized problem on a laterally periodic slab, where the solution is
//! linear in the height with the Robin value `c μ / (1 + c μ)` on the bottom.

use std::sync::Arc;

use obstacle_homog::fem::{assemble_stiffness, solve_homogenized_detailed, ProblemData, SolverConfig};
use obstacle_homog::geometry::{DomainSpec, PatchLayout};
use obstacle_homog::kernel::CoefficientField;
use obstacle_homog::mesh::{build_mesh, MeshOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = DomainSpec::unit_slab(3)?;
    let mesh = Arc::new(build_mesh(&spec, &PatchLayout::empty(&spec, 0.25), 1.0 / 32.0, MeshOptions::default())?);
    let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
    for mu in [0.5, 1.0, std::f64::consts::FRAC_PI_2] {
        let data = ProblemData::constants(0.0, 1.0).with_mu(mu);
        let sol = solve_homogenized_detailed(&k, &data, &mesh, &SolverConfig::default())?;
        let b = sol.field.at(&[0.5, 0.5, 0.0]);
        println!(
            "mu = {mu:.4}: u(Sigma) = {b:.6} (exact {:.6}), energy {:.6}, {} Newton steps",
            mu / (1.0 + mu),
            sol.report.energy,
            sol.report.iterations
        );
    }
    Ok(())
}
