//! Primal-dual active set method for the nodal obstacle problem
//! `min uᵀKu` with `u = ψ` on Γ and `u ≥ φ` at patch nodes.

use std::sync::Arc;
use std::time::Instant;

use super::cg::cg_masked;
use super::problem::{dirichlet_setup, nodal_values, DiscreteField, ProblemData, SolveReport, SolverConfig};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeTag};

const INNER_TOL: f64 = 1e-12;

/// Solution together with the multiplier `λ = Ku` on constrained nodes.
#[derive(Debug, Clone)]
pub struct ObstacleSolution {
    pub field: DiscreteField,
    pub multiplier: Vec<f64>,
    pub constrained: Vec<bool>,
    pub obstacle: Vec<f64>,
    pub report: SolveReport,
}

impl ObstacleSolution {
    /// Nodes where the constraint is active.
    pub fn active(&self) -> Vec<usize> {
        let u = self.field.values();
        (0..u.len())
            .filter(|&i| self.constrained[i] && self.multiplier[i] > 0.0 && u[i] - self.obstacle[i] <= 0.0)
            .collect()
    }
}

/// `max |min(u - φ, λ)|` over the constrained nodes.
pub fn complementarity_residual(u: &[f64], phi: &[f64], lambda: &[f64], constrained: &[bool]) -> f64 {
    (0..u.len())
        .filter(|&i| constrained[i])
        .map(|i| (u[i] - phi[i]).min(lambda[i]).abs())
        .fold(0.0, f64::max)
}

pub fn solve_obstacle(
    k: &CsrMatrix,
    data: &ProblemData,
    mesh: &Arc<Mesh>,
    config: &SolverConfig,
) -> Result<(DiscreteField, SolveReport)> {
    let sol = solve_obstacle_detailed(k, data, mesh, config)?;
    Ok((sol.field, sol.report))
}

pub fn solve_obstacle_detailed(
    k: &CsrMatrix,
    data: &ProblemData,
    mesh: &Arc<Mesh>,
    config: &SolverConfig,
) -> Result<ObstacleSolution> {
    let start = Instant::now();
    let n = mesh.node_count();
    if k.dim() != n {
        return Err(Error::Problem(format!("operator of size {} on {n} nodes", k.dim())));
    }
    let (gamma, mut u) = dirichlet_setup(mesh, data)?;
    let phi = nodal_values(mesh, data.phi.as_ref(), "φ")?;
    let constrained: Vec<bool> = mesh.tags().iter().map(|t| matches!(t, NodeTag::Patch(_))).collect();
    debug_assert!((0..n).all(|i| !(gamma[i] && constrained[i])));

    let diag = k.diagonal();
    let free_diag: Vec<f64> = (0..n).filter(|&i| !gamma[i]).map(|i| diag[i]).collect();
    let c = config.pdas_factor * free_diag.iter().sum::<f64>() / free_diag.len().max(1) as f64;
    let rhs = vec![0.0; n];
    let tol = config.tol.min(INNER_TOL);

    let mut fixed = gamma.clone();
    let mut cg_ok = cg_masked(k, &rhs, &fixed, &mut u, tol, config.max_iter)?.converged;
    let mut lambda = vec![0.0; n];
    let mut active = vec![false; n];
    let mut stable = false;
    let mut iterations = 0;
    while iterations < config.outer_max_iter {
        iterations += 1;
        let next: Vec<bool> =
            (0..n).map(|i| constrained[i] && lambda[i] + c * (phi[i] - u[i]) > 0.0).collect();
        if iterations > 1 && next == active {
            stable = true;
            break;
        }
        active = next;
        for i in 0..n {
            fixed[i] = gamma[i] || active[i];
            if active[i] {
                u[i] = phi[i];
            }
        }
        cg_ok = cg_masked(k, &rhs, &fixed, &mut u, tol, config.max_iter)?.converged;
        let ku = k.mul(&u);
        for i in 0..n {
            lambda[i] = if active[i] { ku[i] } else { 0.0 };
        }
    }
    let residual = complementarity_residual(&u, &phi, &lambda, &constrained);
    let energy = k.quad_form(&u);
    let report = SolveReport {
        iterations,
        residual,
        energy,
        active_set: active.iter().filter(|a| **a).count(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        converged: stable && cg_ok && residual <= config.kkt_tol,
    };
    Ok(ObstacleSolution {
        field: DiscreteField::new(mesh.clone(), u)?,
        multiplier: lambda,
        constrained,
        obstacle: phi,
        report,
    })
}
