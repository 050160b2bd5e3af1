//! Metric distance, kernel values and the finite-difference residual of the
//! operator applied to the kernel.

use obstacle_homog::kernel::{CoefficientField, GreenKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iso = GreenKernel::new(CoefficientField::identity(3));
    let x = [0.3, 0.4, 0.0];
    let y = [0.0, 0.0, 0.0];
    println!("isotropic: d = {}, G = {}", iso.metric_distance(&x, &y), iso.green_value(&x, &y)?);
    println!("grad G = {:?}", iso.green_gradient(&x, &y)?);

    let aniso = GreenKernel::new(CoefficientField::diagonal(&[0.5, 1.0, 1.0])?);
    println!("\ngamma = diag(0.5, 1, 1): d(e1, 0) = {}", aniso.metric_distance(&[1.0, 0.0, 0.0], &y));

    let p = [0.5, 0.0, 0.0];
    println!("\nresidual at |x - y| = 0.5:");
    for step in [4e-3, 2e-3, 1e-3] {
        println!(
            "  step {step:<7} isotropic {:.3e}  anisotropic {:.3e}",
            iso.laplace_beltrami_residual(&p, &y, step)?,
            aniso.laplace_beltrami_residual(&p, &y, step)?
        );
    }
    Ok(())
}
