//! Obstacle solutions against the homogenized solution on one lattice cell
//! of the periodic slab, for two values of the density.

use obstacle_homog::fem::{ProblemData, SolverConfig};
use obstacle_homog::geometry::{DomainSpec, RadiusBounds, TildeR};
use obstacle_homog::harness::{convergence_study, MeshPlan, Reduction, StudySetup};
use obstacle_homog::kernel::CoefficientField;
use obstacle_homog::mesh::MeshOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for mu in [1.0, std::f64::consts::FRAC_PI_2] {
        let setup = StudySetup {
            domain: DomainSpec::unit_slab(3)?,
            tilde_r: TildeR::Uniform(1.0),
            bounds: RadiusBounds::default(),
            coeff: CoefficientField::identity(3),
            data: ProblemData::constants(0.0, 1.0).with_mu(mu),
            eps: vec![0.25, 0.125],
            mesh: MeshPlan {
                h: None,
                h_over_r: 1.0,
                options: MeshOptions { allow_under_resolved: true, ..MeshOptions::default() },
            },
            solver: SolverConfig::default(),
            reduction: Reduction::PeriodicCell,
            ordering: None,
        };
        let r = convergence_study(&setup)?;
        println!("mu = {mu:.4}, J(u~) = {:.6}", r.homogenized_energy);
        for i in 0..r.eps.len() {
            println!(
                "  eps {:<6} J = {:.6}  |u - u~|_D = {:.4e}  |u - u~|_Sigma = {:.4e}",
                r.eps[i], r.energies[i], r.l2_domain[i], r.l2_sigma[i]
            );
        }
    }
    Ok(())
}
