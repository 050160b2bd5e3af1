//! Norms of the corrector and of the auxiliary function along an ε sequence,
//! with the closed-form capacity energy for comparison.

use std::f64::consts::PI;

use obstacle_homog::corrector::{AuxiliaryFunction, Corrector};
use obstacle_homog::fit::log_log_slope;
use obstacle_homog::geometry::{build_layout, DomainSpec};
use obstacle_homog::kernel::{CoefficientField, GreenKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = DomainSpec::unit(3)?;
    let id = CoefficientField::identity(3);
    let eps = [0.25, 0.125, 0.0625];
    let (mut l2, mut q) = (Vec::new(), Vec::new());
    println!("{:>8} {:>6} {:>14} {:>14} {:>14} {:>14}", "eps", "count", "|grad w|^2", "closed form", "|w|^2", "|grad q|^2");
    for &e in &eps {
        let layout = build_layout(&spec, e, 1.0)?;
        let count = layout.len() as f64;
        let r = layout.radius(0);
        let corr = Corrector::new(layout.clone(), GreenKernel::new(id.clone()))?;
        let aux = AuxiliaryFunction::new(layout, id.clone(), vec![-1.0])?;
        let h1 = corr.omega_h1_seminorm(32)?;
        let closed = count * 2.0 * PI / (1.0 / r - 1.0 / e);
        l2.push(corr.omega_l2(32)?);
        q.push(aux.q_gradient_l2(32)?);
        println!("{e:>8} {count:>6} {h1:>14.10} {closed:>14.10} {:>14.6e} {:>14.6e}", l2.last().unwrap(), q.last().unwrap());
    }
    println!("\nslope of |w|^2:      {:.3}", log_log_slope(&eps, &l2).unwrap());
    println!("slope of |grad q|^2: {:.3}", log_log_slope(&eps, &q).unwrap());
    println!("limit of |grad w|^2: pi/2 = {:.6}", PI / 2.0);
    Ok(())
}
