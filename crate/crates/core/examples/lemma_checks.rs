//! Limit and flux checks of the corrector on the periodic slab.

use obstacle_homog::geometry::DomainSpec;
use obstacle_homog::harness::{run_lemma_checks, CheckPlan, LemmaSetup};
use obstacle_homog::kernel::{CoefficientField, GreenKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = LemmaSetup::new(
        DomainSpec::unit_slab(3)?,
        GreenKernel::new(CoefficientField::identity(3)),
        vec![0.25, 0.125, 0.0625],
    );
    let report = run_lemma_checks(&setup, &CheckPlan::standard(3));
    for e in &report.entries {
        let last = e.values.last().copied().unwrap_or(f64::NAN);
        println!(
            "{:<5} {:<42} last {:>12.6} limit {:>12.6} target {:>12.6}",
            if e.pass { "PASS" } else { "FAIL" },
            e.name,
            last,
            e.limit,
            e.target
        );
    }
    Ok(())
}
