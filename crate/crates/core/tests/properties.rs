use std::sync::Arc;

use obstacle_homog::corrector::Corrector;
use obstacle_homog::fem::{assemble_stiffness, solve_homogenized_detailed, solve_obstacle_detailed, ProblemData, SolverConfig};
use obstacle_homog::fit::{log_log_slope, richardson};
use obstacle_homog::geometry::{build_layout, DomainSpec, PatchLayout};
use obstacle_homog::kernel::{CoefficientField, GreenKernel};
use obstacle_homog::mesh::{build_mesh, Mesh, MeshOptions};
use proptest::prelude::*;

fn eps_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.25), Just(0.125), Just(0.0625)]
}

fn corrector(eps: f64, diag: [f64; 3]) -> Corrector {
    let coeff = CoefficientField::diagonal(&diag).unwrap();
    let layout = build_layout(&DomainSpec::unit_slab(3).unwrap(), eps, 1.0).unwrap().with_metric(coeff.metric());
    Corrector::new(layout, GreenKernel::new(coeff)).unwrap()
}

fn small_box() -> Arc<Mesh> {
    let spec = DomainSpec::unit(3).unwrap();
    let layout = build_layout(&spec, 0.5, 1.0).unwrap();
    Arc::new(build_mesh(&spec, &layout, 0.125, MeshOptions::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corrector_is_one_on_the_half_balls(
        eps in eps_strategy(),
        k in 0usize..1000,
        u in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let c = corrector(eps, [1.0; 3]);
        let k = k % c.layout().len();
        let r = c.layout().radius(k);
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt().max(1.0) * (1.0 + 1e-12);
        let ctr = c.layout().center(k);
        let x = [ctr[0] + r * u[0] / norm, ctr[1] + r * u[1] / norm, r * u[2].abs() / norm];
        prop_assert_eq!(c.eval(&x), 1.0);
    }

    #[test]
    fn corrector_stays_in_unit_interval(
        eps in eps_strategy(),
        diag in prop::array::uniform3(0.5f64..1.0),
        x in prop::array::uniform3(0.0f64..1.0),
    ) {
        let c = corrector(eps, diag);
        let p = [x[0], x[1], x[2] * 2.0 * eps];
        let w = c.eval(&p);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&w), "ω = {w}");
        if p[2] > eps {
            prop_assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn kernel_gradient_matches_differences(
        diag in prop::array::uniform3(0.3f64..2.0),
        x in prop::array::uniform3(0.0f64..1.0),
    ) {
        let kernel = GreenKernel::new(CoefficientField::diagonal(&diag).unwrap());
        let y = [0.5, 0.5, 0.0];
        prop_assume!(kernel.metric_distance(&x, &y) > 0.1);
        let g = kernel.green_gradient(&x, &y).unwrap();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..3 {
            let (mut p, mut m) = (x, x);
            p[i] += 1e-5;
            m[i] -= 1e-5;
            let fd = (kernel.green_value(&p, &y).unwrap() - kernel.green_value(&m, &y).unwrap()) / 2e-5;
            prop_assert!((fd - g[i]).abs() <= 1e-6 * gn, "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn kernel_residual_is_second_order(
        diag in prop::array::uniform3(0.3f64..2.0),
        dir in prop::array::uniform3(-1.0f64..1.0),
        rad in 0.2f64..0.6,
    ) {
        let kernel = GreenKernel::new(CoefficientField::diagonal(&diag).unwrap());
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        prop_assume!(norm > 0.1);
        let y = [0.0; 3];
        let x = [rad * dir[0] / norm, rad * dir[1] / norm, rad * dir[2] / norm];
        let coarse = kernel.laplace_beltrami_residual(&x, &y, 2e-3).unwrap();
        let fine = kernel.laplace_beltrami_residual(&x, &y, 1e-3).unwrap();
        prop_assume!(coarse.abs() > 1e-8);
        let ratio = coarse / fine;
        prop_assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lattice_tiles_the_bottom_face(m in 1usize..9) {
        let eps = 0.5 / m as f64;
        let layout = build_layout(&DomainSpec::unit_slab(3).unwrap(), eps, 1.0).unwrap();
        prop_assert_eq!(layout.len(), m * m);
        for (_, c, r) in layout.rows() {
            prop_assert_eq!(c[2], 0.0);
            prop_assert!(r <= eps);
            prop_assert!(c[0] > 0.0 && c[0] < 1.0 && c[1] > 0.0 && c[1] < 1.0);
        }
    }

    #[test]
    fn extrapolation_recovers_power_laws(limit in -2.0f64..2.0, c in 0.1f64..3.0, p in 0.5f64..3.0) {
        let eps: [f64; 3] = [0.25, 0.125, 0.0625];
        let values: Vec<f64> = eps.iter().map(|e| limit + c * e.powf(p)).collect();
        let ex = richardson(&eps, &values);
        prop_assert!((ex.limit - limit).abs() <= 1e-8 * (1.0 + c), "{} vs {limit}", ex.limit);
        let pure: Vec<f64> = eps.iter().map(|e| c * e.powf(p)).collect();
        prop_assert!((log_log_slope(&eps, &pure).unwrap() - p).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn low_obstacle_is_inactive(psi in -1.0f64..2.0, gap in 0.01f64..1.0) {
        let mesh = small_box();
        let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
        let data = ProblemData::constants(psi, psi - gap);
        let sol = solve_obstacle_detailed(&k, &data, &mesh, &SolverConfig::default()).unwrap();
        prop_assert!(sol.active().is_empty());
        for v in sol.field.values() {
            prop_assert!((v - psi).abs() <= 1e-9);
        }
    }

    #[test]
    fn obstacle_solution_respects_the_constraint(phi in 0.1f64..2.0) {
        let mesh = small_box();
        let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
        let data = ProblemData::constants(0.0, phi);
        let sol = solve_obstacle_detailed(&k, &data, &mesh, &SolverConfig::default()).unwrap();
        prop_assert!(sol.report.converged);
        prop_assert!(!sol.active().is_empty());
        for i in 0..mesh.node_count() {
            if sol.constrained[i] {
                prop_assert!(sol.field.values()[i] >= phi - 1e-9);
                prop_assert!(sol.multiplier[i] >= -1e-9);
            }
        }
        let unit = solve_obstacle_detailed(&k, &ProblemData::constants(0.0, 1.0), &mesh, &SolverConfig::default()).unwrap();
        prop_assert!((sol.report.energy - phi * phi * unit.report.energy).abs() <= 1e-9 * unit.report.energy);
    }

    #[test]
    fn homogenized_slab_is_linear(mu in 0.0f64..5.0, c_n in 0.5f64..2.0) {
        let spec = DomainSpec::unit_slab(3).unwrap();
        let mesh = Arc::new(build_mesh(&spec, &PatchLayout::empty(&spec, 0.25), 0.25, MeshOptions::default()).unwrap());
        let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
        let data = ProblemData::constants(0.0, 1.0).with_mu(mu).with_c_n(c_n);
        let sol = solve_homogenized_detailed(&k, &data, &mesh, &SolverConfig::default()).unwrap();
        let b = c_n * mu / (1.0 + c_n * mu);
        for i in 0..mesh.node_count() {
            let z = mesh.coords_vec(i)[2];
            prop_assert!((sol.field.values()[i] - b * (1.0 - z)).abs() <= 1e-9);
        }
        prop_assert!((sol.report.energy - b).abs() <= 1e-9);
        let energies = &sol.energy_history;
        prop_assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
