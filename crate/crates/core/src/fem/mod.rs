//! Finite element discretization of the obstacle problem and its homogenized limit.

pub mod assembly;
pub mod cg;
pub mod homogenized;
pub mod obstacle;
pub mod problem;
pub mod projected;
pub mod sparse;

pub use assembly::{assemble_boundary_penalty, assemble_mass, assemble_stiffness, PenaltyTerms, SigmaQuadrature};
pub use cg::{cg_masked, cg_solve, CgOutcome};
pub use homogenized::{solve_homogenized, solve_homogenized_detailed, HomogenizedSolution};
pub use obstacle::{complementarity_residual, solve_obstacle, solve_obstacle_detailed, ObstacleSolution};
pub use problem::{energy, nodal_values, DiscreteField, EnergyMode, ProblemData, SolveReport, SolverConfig};
pub use projected::projected_gradient;
pub use sparse::CsrMatrix;

#[cfg(test)]
mod tests;
