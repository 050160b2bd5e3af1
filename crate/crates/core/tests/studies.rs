use obstacle_homog::fem::{ProblemData, SolverConfig};
use obstacle_homog::geometry::{DomainSpec, RadiusBounds, TildeR};
use obstacle_homog::harness::{convergence_study, MeshPlan, Reduction, StudySetup};
use obstacle_homog::kernel::CoefficientField;
use obstacle_homog::mesh::MeshOptions;

fn slab_study(tilde_r: f64, data: ProblemData, eps: Vec<f64>) -> StudySetup {
    StudySetup {
        domain: DomainSpec::unit_slab(3).unwrap(),
        tilde_r: TildeR::Uniform(tilde_r),
        bounds: RadiusBounds::default(),
        coeff: CoefficientField::identity(3),
        data,
        eps,
        mesh: MeshPlan {
            h: None,
            h_over_r: 1.0,
            options: MeshOptions { allow_under_resolved: true, ..MeshOptions::default() },
        },
        solver: SolverConfig::default(),
        reduction: Reduction::PeriodicCell,
        ordering: None,
    }
}

#[test]
fn nested_patches_raise_the_energy() {
    let mut energies = Vec::new();
    let mut constrained = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        let setup = slab_study(r, ProblemData::constants(0.0, 1.0), vec![0.25]);
        let level = setup.solve_level(0, 1.0 / 64.0).unwrap();
        assert!(level.solution.report.converged);
        energies.push(level.energy());
        constrained.push(level.constrained);
    }
    assert!(constrained.windows(2).all(|w| w[0] < w[1]), "{constrained:?}");
    assert!(energies.windows(2).all(|w| w[0] <= w[1]), "{energies:?}");
}

#[test]
fn inactive_obstacle_matches_the_limit_exactly() {
    let setup = slab_study(1.0, ProblemData::constants(1.0, 0.0).with_mu(1.5), vec![0.25, 0.125]);
    let report = convergence_study(&setup).unwrap();
    assert!(report.error.is_none());
    assert!(report.l2_domain.iter().all(|d| *d <= 1e-12), "{:?}", report.l2_domain);
    assert!(report.l2_sigma.iter().all(|d| *d <= 1e-12));
    assert!(report.active_fraction.iter().all(|f| *f == 0.0));
    assert!(report.penalty_consistent);
    assert!((report.homogenized_energy).abs() <= 1e-12);
}

#[test]
fn limit_penalty_is_consistent() {
    let setup = slab_study(1.0, ProblemData::constants(0.0, 1.0).with_mu(0.5), vec![0.25]);
    let limit = setup.solve_limit(1.0 / 16.0).unwrap();
    assert!(limit.penalty_consistent());
    // u = b (1 - z) with b = 1/3: gradient energy b², penalty μ (1 - b)²
    let b = 1.0 / 3.0;
    assert!((limit.energy() - (b * b + 0.5 * (1.0 - b) * (1.0 - b))).abs() <= 1e-9);
    assert!((limit.penalty() - 0.5 * (1.0 - b) * (1.0 - b)).abs() <= 1e-9);
}
