//! Extrapolated density of the capacity term for two reduced radii.

use obstacle_homog::corrector::{limit_density, DensitySetup, Quadrature, SignMode};
use obstacle_homog::geometry::{DomainSpec, RadiusBounds, TildeR};
use obstacle_homog::kernel::CoefficientField;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let domain = DomainSpec::unit(3)?;
    let coeff = CoefficientField::identity(3);
    let eps = [0.125, 0.0625, 0.03125];
    for r in [1.0, 2.0] {
        let tilde_r = TildeR::Uniform(r);
        let setup = DensitySetup {
            domain: &domain,
            tilde_r: &tilde_r,
            bounds: RadiusBounds::default(),
            coeff: &coeff,
            series: &[-1.0],
            mode: SignMode::Positive,
        };
        let d = limit_density(&setup, &eps, &Quadrature::default())?;
        println!("r~ = {r}: densities {:?}", d.densities);
        println!("        limit {:.6} (pi r~ / 2 = {:.6})", d.limit(), std::f64::consts::PI * r / 2.0);
    }
    Ok(())
}
