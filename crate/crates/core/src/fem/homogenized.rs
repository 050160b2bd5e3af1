//! Semismooth Newton for `uᵀKu + c_n μ ∫_Σ (u - φ)_-²` with `u = ψ` on Γ.

use std::sync::Arc;
use std::time::Instant;

use super::assembly::assemble_boundary_penalty;
use super::cg::cg_masked;
use super::problem::{dirichlet_setup, DiscreteField, ProblemData, SolveReport, SolverConfig};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Solution with the per-iteration energies and the final penalty part.
#[derive(Debug, Clone)]
pub struct HomogenizedSolution {
    pub field: DiscreteField,
    pub report: SolveReport,
    /// Energy at the start and after every accepted step.
    pub energy_history: Vec<f64>,
    pub penalty_energy: f64,
}

const INNER_TOL: f64 = 1e-12;

pub fn solve_homogenized(
    k: &CsrMatrix,
    data: &ProblemData,
    mesh: &Arc<Mesh>,
    config: &SolverConfig,
) -> Result<(DiscreteField, SolveReport)> {
    let sol = solve_homogenized_detailed(k, data, mesh, config)?;
    Ok((sol.field, sol.report))
}

pub fn solve_homogenized_detailed(
    k: &CsrMatrix,
    data: &ProblemData,
    mesh: &Arc<Mesh>,
    config: &SolverConfig,
) -> Result<HomogenizedSolution> {
    let start = Instant::now();
    if !(data.mu >= 0.0) || !data.mu.is_finite() {
        return Err(Error::Problem(format!("μ = {} must be finite and nonnegative", data.mu)));
    }
    if !(data.c_n > 0.0) || !data.c_n.is_finite() {
        return Err(Error::Problem(format!("c_n = {} must be finite and positive", data.c_n)));
    }
    let n = mesh.node_count();
    if k.dim() != n {
        return Err(Error::Problem(format!("operator of size {} on {n} nodes", k.dim())));
    }
    let (gamma, mut u) = dirichlet_setup(mesh, data)?;
    let zeros = vec![0.0; n];
    let tol = config.tol.min(INNER_TOL);
    let first = cg_masked(k, &zeros, &gamma, &mut u, tol, config.max_iter)?;
    let weight = data.penalty_weight();
    let quad = data.sigma_quadrature(mesh);
    let objective = |v: &[f64]| k.quad_form(v) + weight * quad.negative_part_sq(mesh, v);

    let mut energy = objective(&u);
    let mut history = vec![energy];
    let mut iterations = 0;
    let mut cg_ok = first.converged;
    let mut residual;
    let mut active_points;
    loop {
        let pen = assemble_boundary_penalty(mesh, &quad, weight, &u);
        active_points = pen.active_points;
        let ku = k.mul(&u);
        let grad: Vec<f64> = (0..n).map(|i| if gamma[i] { 0.0 } else { 2.0 * ku[i] + pen.gradient[i] }).collect();
        residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if residual <= config.kkt_tol || iterations >= config.outer_max_iter {
            break;
        }
        iterations += 1;
        let newton = k.add_scaled(2.0, &pen.hessian, 1.0);
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut d = vec![0.0; n];
        cg_ok &= cg_masked(&newton, &rhs, &gamma, &mut d, tol, config.max_iter)?.converged;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=config.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let e = objective(&trial);
            if e <= energy {
                u = trial;
                energy = e;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        history.push(energy);
    }
    let penalty_energy = weight * quad.negative_part_sq(mesh, &u);
    let report = SolveReport {
        iterations,
        residual,
        energy,
        active_set: active_points,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        converged: cg_ok && residual <= config.kkt_tol,
    };
    Ok(HomogenizedSolution { field: DiscreteField::new(mesh.clone(), u)?, report, energy_history: history, penalty_energy })
}
