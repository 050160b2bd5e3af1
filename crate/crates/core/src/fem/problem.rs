use std::sync::Arc;

use rayon::prelude::*;

use super::assembly::SigmaQuadrature;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::field::{ScalarField, SharedField};
use crate::geometry::MAX_DIM;
use crate::mesh::{Mesh, NodeTag};

/// Dirichlet datum, obstacle and the homogenized penalty weight.
#[derive(Clone)]
pub struct ProblemData {
    pub psi: SharedField,
    pub phi: SharedField,
    pub c_n: f64,
    pub mu: f64,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData").field("c_n", &self.c_n).field("mu", &self.mu).finish_non_exhaustive()
    }
}

impl ProblemData {
    pub fn new(psi: SharedField, phi: SharedField) -> Self {
        Self { psi, phi, c_n: 1.0, mu: 0.0 }
    }

    /// Constant `ψ` and `φ`.
    pub fn constants(psi: f64, phi: f64) -> Self {
        Self::new(Arc::new(psi), Arc::new(phi))
    }

    pub fn with_c_n(mut self, c_n: f64) -> Self {
        self.c_n = c_n;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// Weight `c_n μ` of the boundary penalty.
    pub fn penalty_weight(&self) -> f64 {
        self.c_n * self.mu
    }

    pub fn sigma_quadrature(&self, mesh: &Mesh) -> SigmaQuadrature {
        let phi = self.phi.clone();
        SigmaQuadrature::new(mesh, &move |x| phi.value(x))
    }
}

/// Nodal values of `field`, failing on any non-finite value.
pub fn nodal_values(mesh: &Mesh, field: &dyn ScalarField, name: &str) -> Result<Vec<f64>> {
    let n = mesh.dim();
    let vals: Vec<f64> = (0..mesh.node_count())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; MAX_DIM];
            mesh.coords(i, &mut x[..n]);
            field.value(&x[..n])
        })
        .collect();
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::Problem(format!(
            "{name} is not finite at node {i} ({:?})",
            mesh.coords_vec(i)
        )));
    }
    Ok(vals)
}

/// Iterative solver settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative residual target for conjugate gradients.
    pub tol: f64,
    pub max_iter: usize,
    /// Outer iterations of the active-set and Newton loops.
    pub outer_max_iter: usize,
    /// Active-set parameter as a multiple of the mean stiffness diagonal.
    pub pdas_factor: f64,
    /// Target for the KKT (obstacle) and first-order (homogenized) residuals.
    pub kkt_tol: f64,
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            outer_max_iter: 100,
            pdas_factor: 1e3,
            kkt_tol: 1e-8,
            max_halvings: 30,
        }
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
    pub active_set: usize,
    /// Wall-clock time, kept out of serialized reports.
    #[serde(skip)]
    pub wall_ms: f64,
    pub converged: bool,
}

/// Nodal field on a mesh.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::Problem(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, x: &[f64]) -> f64 {
        self.mesh.interpolate(&self.values, x)
    }
}

/// Which functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    /// `u^T K u`.
    Eps,
    /// `u^T K u + c_n μ ∫_Σ (u - φ)_-²`.
    Homogenized,
}

pub fn energy(k: &CsrMatrix, u: &DiscreteField, data: &ProblemData, mode: EnergyMode) -> f64 {
    let dirichlet = k.quad_form(u.values());
    match mode {
        EnergyMode::Eps => dirichlet,
        EnergyMode::Homogenized => {
            let w = data.penalty_weight();
            if w == 0.0 {
                return dirichlet;
            }
            let quad = data.sigma_quadrature(u.mesh());
            dirichlet + w * quad.negative_part_sq(u.mesh(), u.values())
        }
    }
}

/// Dirichlet mask and the values `ψ` at masked nodes.
pub(crate) fn dirichlet_setup(mesh: &Mesh, data: &ProblemData) -> Result<(Vec<bool>, Vec<f64>)> {
    let psi = nodal_values(mesh, data.psi.as_ref(), "ψ")?;
    let mask: Vec<bool> = mesh.tags().iter().map(|t| *t == NodeTag::Gamma).collect();
    let u0: Vec<f64> = psi.iter().zip(&mask).map(|(p, &m)| if m { *p } else { 0.0 }).collect();
    Ok((mask, u0))
}
