//! Single-patch obstacle problem: active-set solve against projected
//! gradient iteration.

use std::sync::Arc;

use obstacle_homog::fem::{assemble_stiffness, projected_gradient, solve_obstacle_detailed, ProblemData, SolverConfig};
use obstacle_homog::geometry::{build_layout, DomainSpec};
use obstacle_homog::kernel::CoefficientField;
use obstacle_homog::mesh::{build_mesh, MeshOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = DomainSpec::unit(3)?;
    let layout = build_layout(&spec, 0.5, 1.0)?;
    let mesh = Arc::new(build_mesh(&spec, &layout, 1.0 / 16.0, MeshOptions::default())?);
    let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
    let data = ProblemData::constants(0.0, 1.0);

    let sol = solve_obstacle_detailed(&k, &data, &mesh, &SolverConfig::default())?;
    println!("active set: {:?}", sol.report);
    println!("active nodes: {}", sol.active().len());

    let (oracle, rep) = projected_gradient(&k, &data, &mesh, 1e-13, 1_000_000)?;
    println!("projected gradient: {} sweeps, energy {:.12}", rep.iterations, rep.energy);
    let diff = sol.field.values().iter().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max nodal difference {diff:.3e}");
    Ok(())
}
