//! Projected gradient descent for the obstacle problem, used as an
//! independent reference for the active-set solver.

use std::sync::Arc;
use std::time::Instant;

use super::problem::{dirichlet_setup, nodal_values, DiscreteField, ProblemData, SolveReport};
use super::sparse::CsrMatrix;
use crate::error::Result;
use crate::mesh::{Mesh, NodeTag};

/// Runs `u ← P(u - 2Ku/L)` with `L` the Gershgorin bound of `2K` until the
/// largest nodal update falls below `tol`.
pub fn projected_gradient(
    k: &CsrMatrix,
    data: &ProblemData,
    mesh: &Arc<Mesh>,
    tol: f64,
    max_iter: usize,
) -> Result<(DiscreteField, SolveReport)> {
    let start = Instant::now();
    let n = mesh.node_count();
    let (gamma, mut u) = dirichlet_setup(mesh, data)?;
    let phi = nodal_values(mesh, data.phi.as_ref(), "φ")?;
    let constrained: Vec<bool> = mesh.tags().iter().map(|t| matches!(t, NodeTag::Patch(_))).collect();
    for i in 0..n {
        if constrained[i] {
            u[i] = u[i].max(phi[i]);
        }
    }
    let step = 1.0 / k.gershgorin_bound();
    let mut ku = vec![0.0; n];
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < max_iter && change > tol {
        iterations += 1;
        k.mul_into(&u, &mut ku);
        change = 0.0;
        for i in 0..n {
            if gamma[i] {
                continue;
            }
            let mut v = u[i] - step * ku[i];
            if constrained[i] {
                v = v.max(phi[i]);
            }
            change = f64::max(change, (v - u[i]).abs());
            u[i] = v;
        }
    }
    let energy = k.quad_form(&u);
    let active_set = (0..n).filter(|&i| constrained[i] && u[i] == phi[i]).count();
    let report = SolveReport {
        iterations,
        residual: change,
        energy,
        active_set,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        converged: change <= tol,
    };
    Ok((DiscreteField::new(mesh.clone(), u)?, report))
}
