//! Drives ε sequences through the corrector and FEM pipelines and checks
//! the limits and inequalities they should satisfy.

pub mod convergence;
pub mod lemmas;
pub mod testfn;

use serde::{Deserialize, Serialize};

pub use convergence::{
    convergence_study, sigma_penalty, ConvergenceReport, LevelSolve, LimitSolve, MeshPlan, OrderingPlan, OrderingReport,
    Reduction, StudySetup, PENALTY_TOL,
};
pub use lemmas::{
    boundary_flux, check_boundary_flux_e2, check_inner_flux, check_lifted_boundary_flux, check_le2, check_outer_flux_e3, check_volume_coupling,
    flux_identity_mismatch, inner_capacity_flux, run_lemma_checks, sphere_flux, volume_coupling, CheckPlan,
    LemmaSetup,
};
pub use testfn::{sigma_integral, TestFunctionSpec, VField};

/// One named check: values per ε, the extrapolated limit, the target and
/// the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaEntry {
    pub name: String,
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: f64,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
    /// Per-ε comparison values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<f64>,
    /// Per-ε relative gaps to the comparison values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<f64>,
    /// Center lifts of the boundary-flux diagnostic, one per value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lifts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LemmaEntry {
    pub fn new(
        name: impl Into<String>,
        eps: &[f64],
        values: Vec<f64>,
        limit: f64,
        target: f64,
        tol: f64,
        pass: bool,
    ) -> Self {
        Self {
            name: name.into(),
            eps: eps.to_vec(),
            values,
            limit,
            target,
            tol,
            pass,
            reference: Vec::new(),
            gaps: Vec::new(),
            lifts: Vec::new(),
            slope: None,
            error: None,
        }
    }

    /// Entry for a check that could not be evaluated.
    pub fn failed(name: impl Into<String>, eps: &[f64], error: String) -> Self {
        Self { error: Some(error), ..Self::new(name, eps, Vec::new(), f64::NAN, f64::NAN, f64::NAN, false) }
    }
}

/// Entries in execution order, names unique.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub entries: Vec<LemmaEntry>,
}

impl LemmaCheckReport {
    /// Adds an entry, replacing an earlier one of the same name.
    pub fn push(&mut self, entry: LemmaEntry) {
        match self.entries.iter_mut().find(|e| e.name == entry.name) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn get(&self, name: &str) -> Option<&LemmaEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}
