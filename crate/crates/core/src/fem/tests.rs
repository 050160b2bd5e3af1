use std::sync::Arc;

use super::*;
use crate::field::Coordinate;
use crate::geometry::{build_layout, DomainSpec, PatchLayout};
use crate::kernel::CoefficientField;
use crate::mesh::{build_mesh, Mesh, MeshOptions};

fn empty_mesh(spec: &DomainSpec, h: f64) -> Arc<Mesh> {
    let layout = PatchLayout::empty(spec, 0.25);
    Arc::new(build_mesh(spec, &layout, h, MeshOptions::default()).unwrap())
}

fn nodal(mesh: &Mesh, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..mesh.node_count()).map(|i| f(&mesh.coords_vec(i))).collect()
}

fn single_patch() -> (Arc<Mesh>, CsrMatrix) {
    let spec = DomainSpec::unit(3).unwrap();
    let layout = build_layout(&spec, 0.5, 1.0).unwrap();
    let mesh = Arc::new(build_mesh(&spec, &layout, 1.0 / 16.0, MeshOptions::default()).unwrap());
    let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
    (mesh, k)
}

#[test]
fn stiffness_examples() {
    let spec = DomainSpec::unit(3).unwrap();
    let mesh = empty_mesh(&spec, 0.125);
    let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
    assert!(k.asymmetry() < 1e-14);
    let xn = nodal(&mesh, |x| x[2]);
    assert!((k.quad_form(&xn) - 1.0).abs() < 1e-12);
    let ones = vec![1.0; mesh.node_count()];
    assert!(k.quad_form(&ones).abs() < 1e-12);
    assert!(k.mul(&ones).iter().all(|v| v.abs() < 1e-12));
    let aniso = CoefficientField::diagonal(&[2.0, 1.0, 1.0]).unwrap();
    let k4 = assemble_stiffness(&mesh, &aniso);
    let x1 = nodal(&mesh, |x| x[0]);
    assert!((k4.quad_form(&x1) - 4.0).abs() < 1e-12);
}

#[test]
fn cg_recovers_known_solution() {
    let spec = DomainSpec::unit(3).unwrap();
    let mesh = empty_mesh(&spec, 0.125);
    let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
    let mass = assemble_mass(&mesh);
    let shifted = k.add_scaled(1.0, &mass, 1.0);
    let w = nodal(&mesh, |x| (x[0] * 3.0).sin() + x[1] * x[2]);
    let rhs = shifted.mul(&w);
    let (x, rep) = cg_solve(&shifted, &rhs, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    assert!(x.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-8));
    let (z, rep) = cg_solve(&shifted, &vec![0.0; w.len()], &SolverConfig::default()).unwrap();
    assert_eq!(rep.iterations, 0);
    assert!(z.iter().all(|v| *v == 0.0));
}

#[test]
fn obstacle_trivial_cases() {
    let (mesh, k) = single_patch();
    let cfg = SolverConfig::default();
    let (u, rep) = solve_obstacle(&k, &ProblemData::constants(1.0, 0.0), &mesh, &cfg).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.active_set, 0);
    assert!(rep.energy.abs() < 1e-12);
    assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
    let (u, rep) = solve_obstacle(&k, &ProblemData::constants(0.0, -1.0), &mesh, &cfg).unwrap();
    assert_eq!(rep.active_set, 0);
    assert!(u.values().iter().all(|v| *v == 0.0));
}

#[test]
fn obstacle_matches_projected_gradient() {
    let (mesh, k) = single_patch();
    let data = ProblemData::constants(0.0, 1.0);
    let sol = solve_obstacle_detailed(&k, &data, &mesh, &SolverConfig::default()).unwrap();
    assert!(sol.report.converged, "{:?}", sol.report);
    assert!(sol.report.energy > 0.0);
    assert!(sol.report.residual <= 1e-8);
    let (oracle, rep) = projected_gradient(&k, &data, &mesh, 1e-13, 1_000_000).unwrap();
    assert!(rep.converged);
    let diff = sol.field.values().iter().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "max nodal difference {diff}");
    // comparison principle
    assert!(sol.field.values().iter().all(|v| (-1e-10..=1.0 + 1e-10).contains(v)));
}

#[test]
fn homogenized_slab_matches_robin_solution() {
    let spec = DomainSpec::unit_slab(3).unwrap();
    let mesh = empty_mesh(&spec, 1.0 / 32.0);
    let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
    let data = ProblemData::constants(0.0, 1.0).with_mu(0.5);
    let sol = solve_homogenized_detailed(&k, &data, &mesh, &SolverConfig::default()).unwrap();
    assert!(sol.report.converged, "{:?}", sol.report);
    let b = sol.field.at(&[0.3, 0.7, 0.0]);
    assert!((b - 1.0 / 3.0).abs() < 1e-3, "{b}");
    assert!((sol.report.energy - 1.0 / 3.0).abs() < 1e-3);
    assert!(sol.energy_history.windows(2).all(|w| w[1] <= w[0]));
    let e = energy(&k, &sol.field, &data, EnergyMode::Homogenized);
    assert!((e - sol.report.energy).abs() < 1e-12);
}

#[test]
fn homogenized_trivial_cases() {
    let spec = DomainSpec::unit(3).unwrap();
    let mesh = empty_mesh(&spec, 0.125);
    let k = assemble_stiffness(&mesh, &CoefficientField::identity(3));
    let cfg = SolverConfig::default();
    let data = ProblemData::constants(2.0, 1.0).with_mu(7.0);
    let (u, rep) = solve_homogenized(&k, &data, &mesh, &cfg).unwrap();
    assert!(rep.converged);
    assert!(u.values().iter().all(|v| (v - 2.0).abs() < 1e-10));
    assert!(energy(&k, &u, &data, EnergyMode::Homogenized).abs() < 1e-12);
    let bad = ProblemData::constants(0.0, 1.0).with_mu(-1.0);
    assert!(solve_homogenized(&k, &bad, &mesh, &cfg).is_err());
    let psi = ProblemData::new(Arc::new(Coordinate(0)), Arc::new(5.0));
    let (u0, _) = solve_homogenized(&k, &psi, &mesh, &cfg).unwrap();
    let (u1, _) = cg_like_extension(&k, &psi, &mesh);
    assert!(u0.values().iter().zip(&u1).all(|(a, b)| (a - b).abs() < 1e-9));
}

fn cg_like_extension(k: &CsrMatrix, data: &ProblemData, mesh: &Arc<Mesh>) -> (Vec<f64>, usize) {
    let (mask, mut u) = problem::dirichlet_setup(mesh, data).unwrap();
    let out = cg_masked(k, &vec![0.0; u.len()], &mask, &mut u, 1e-12, 10_000).unwrap();
    (u, out.iterations)
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    let spec = DomainSpec::unit(3).unwrap();
    let mesh = empty_mesh(&spec, 0.25);
    let phi = |x: &[f64]| 0.5 + 0.3 * x[0] - 0.2 * x[1];
    let quad = SigmaQuadrature::new(&mesh, &phi);
    let u: Vec<f64> = (0..mesh.node_count()).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
    let pen = assemble_boundary_penalty(&mesh, &quad, 0.7, &u);
    let step = 1e-6;
    for i in 0..mesh.bottom_count() {
        let mut up = u.clone();
        up[i] += step;
        let mut dn = u.clone();
        dn[i] -= step;
        let fd = 0.7 * (quad.negative_part_sq(&mesh, &up) - quad.negative_part_sq(&mesh, &dn)) / (2.0 * step);
        let g = pen.gradient[i];
        assert!((fd - g).abs() <= 1e-6 * g.abs().max(1e-3), "node {i}: {fd} vs {g}");
    }
}
