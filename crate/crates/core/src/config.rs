//! Run configuration: a TOML document parsed strictly into [`RunConfig`].
//!
//! ```toml
//! [domain]
//! n = 3
//! [patch]
//! eps = [0.25, 0.125, 0.0625]
//! [problem]
//! psi = "0"
//! phi = "1"
//! ```
//!
//! The `coefficient`, `solver`, `lemmas`, `study` and `output` blocks are
//! optional and default to the identity coefficient, the standard solver and
//! quadrature settings and the output directory `out`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::corrector::Quadrature;
use crate::expr::Expr;
use crate::fem::{ProblemData, SolverConfig};
use crate::field::{Cutoff, SharedField};
use crate::geometry::{build_layout_with, BoundaryMode, DomainSpec, RadiusBounds, TildeR};
use crate::harness::{CheckPlan, LemmaSetup, MeshPlan, OrderingPlan, Reduction, StudySetup, TestFunctionSpec, VField};
use crate::kernel::{CoefficientField, GreenKernel};
use crate::mesh::MeshOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("unknown config key `{path}`")]
    UnknownKey { path: String },
    #[error("invalid config value at `{path}`: {msg}")]
    Invalid { path: String, msg: String },
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), msg: msg.to_string() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: RawDomain,
    patch: RawPatch,
    #[serde(default)]
    coefficient: RawCoefficient,
    problem: RawProblem,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    lemmas: RawLemmas,
    #[serde(default)]
    study: RawStudy,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    n: usize,
    extents: Option<Vec<f64>>,
    #[serde(default = "default_boundary")]
    boundary: BoundaryMode,
}

fn default_boundary() -> BoundaryMode {
    BoundaryMode::Closed
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawTildeR {
    Uniform(f64),
    PerPatch(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPatch {
    eps: Vec<f64>,
    tilde_r: Option<RawTildeR>,
    c1: Option<f64>,
    c2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSeries {
    Named(String),
    Terms(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficient {
    /// Full matrix, one row per entry.
    gamma: Option<Vec<Vec<f64>>>,
    gamma_diag: Option<Vec<f64>>,
    /// `C_i`.
    kernel_series: Option<Vec<f64>>,
    /// `C'_i`.
    gradient_series: Option<Vec<f64>>,
    /// `C̃_i` or `"matched"`.
    aux_series: Option<RawSeries>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    psi: String,
    phi: String,
    #[serde(default = "one")]
    c_n: f64,
    mu: Option<f64>,
    mu_eps: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    tol: f64,
    max_iter: usize,
    outer_max_iter: usize,
    pdas_factor: f64,
    kkt_tol: f64,
    max_halvings: usize,
    quadrature: Quadrature,
    mesh: RawMesh,
}

impl Default for RawSolver {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            tol: s.tol,
            max_iter: s.max_iter,
            outer_max_iter: s.outer_max_iter,
            pdas_factor: s.pdas_factor,
            kkt_tol: s.kkt_tol,
            max_halvings: s.max_halvings,
            quadrature: Quadrature::default(),
            mesh: RawMesh::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMesh {
    h: Option<Vec<f64>>,
    h_over_r: f64,
    node_cap: usize,
    allow_under_resolved: bool,
}

impl Default for RawMesh {
    fn default() -> Self {
        let plan = MeshPlan::default();
        Self {
            h: None,
            h_over_r: plan.h_over_r,
            node_cap: plan.options.node_cap,
            allow_under_resolved: plan.options.allow_under_resolved,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawLemmas {
    phi: String,
    cutoff: Option<Vec<f64>>,
    volume_phi: Option<String>,
    v: Vec<String>,
    v_bound: f64,
    lift: Vec<f64>,
}

impl Default for RawLemmas {
    fn default() -> Self {
        Self {
            phi: "1".into(),
            cutoff: None,
            volume_phi: None,
            v: vec!["0".into(), "1".into(), "1-omega".into()],
            v_bound: 1.0,
            lift: Vec::new(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawStudy {
    reduction: Reduction,
    ordering: Option<RawOrdering>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrdering {
    eps: Vec<f64>,
    h: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: PathBuf,
    json: bool,
    csv: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), json: true, csv: true }
    }
}

/// Lemma-check test data.
#[derive(Debug, Clone)]
pub struct LemmaConfig {
    pub plan: CheckPlan,
    /// Center lifts of the boundary-flux diagnostic; empty disables it.
    pub lift: Vec<f64>,
    pub v_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub json: bool,
    pub csv: bool,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub eps: Vec<f64>,
    pub tilde_r: TildeR,
    pub bounds: RadiusBounds,
    pub coeff: CoefficientField,
    pub kernel: GreenKernel,
    pub aux_series: Vec<f64>,
    pub psi: Arc<Expr>,
    pub phi: Arc<Expr>,
    pub c_n: f64,
    /// Explicit `μ`; computed from the corrector when absent.
    pub mu: Option<f64>,
    /// ε sequence of the `μ` extrapolation.
    pub mu_eps: Vec<f64>,
    pub solver: SolverConfig,
    pub quad: Quadrature,
    pub mesh: MeshPlan,
    pub reduction: Reduction,
    pub ordering: Option<OrderingPlan>,
    pub lemmas: LemmaConfig,
    pub output: OutputConfig,
}

fn strictly_decreasing(path: &str, eps: &[f64]) -> Result<(), ConfigError> {
    if eps.is_empty() {
        return Err(invalid(path, "eps list is empty"));
    }
    if let Some(bad) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0 && **e < 1.0)) {
        return Err(invalid(path, format!("eps value {bad} must lie in (0, 1)")));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid(path, "eps not strictly decreasing"));
    }
    Ok(())
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("{v} must be positive")))
    }
}

fn unknown_key(path: &str, msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    let key = &rest[..rest.find('`')?];
    Some(if path.is_empty() || path == "." {
        key.to_string()
    } else if path == key || path.ends_with(&format!(".{key}")) {
        path.to_string()
    } else {
        format!("{path}.{key}")
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().message().to_string();
        match unknown_key(&path, &msg) {
            Some(path) => ConfigError::UnknownKey { path },
            None => invalid(&path, msg),
        }
    })?;
    raw.validate()
}

/// Reads and parses the configuration at `path`.
pub fn load_config(path: &Path) -> crate::error::Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

impl RawConfig {
    fn validate(self) -> Result<RunConfig, ConfigError> {
        let n = self.domain.n;
        let extents = self.domain.extents.unwrap_or_else(|| vec![1.0; n]);
        let domain = DomainSpec::new(n, extents, self.domain.boundary).map_err(|e| invalid("domain", e))?;

        let p = self.patch;
        strictly_decreasing("patch.eps", &p.eps)?;
        let tilde_r = match p.tilde_r {
            None => TildeR::Uniform(1.0),
            Some(RawTildeR::Uniform(v)) => TildeR::Uniform(v),
            Some(RawTildeR::PerPatch(v)) => TildeR::PerPatch(v),
        };
        let defaults = RadiusBounds::default();
        let bounds = RadiusBounds { c1: p.c1.unwrap_or(defaults.c1), c2: p.c2.unwrap_or(defaults.c2) };
        for &e in &p.eps {
            build_layout_with(&domain, e, tilde_r.clone(), bounds).map_err(|err| invalid("patch", format!("ε = {e}: {err}")))?;
        }

        let c = self.coefficient;
        let coeff = match (c.gamma, c.gamma_diag) {
            (Some(_), Some(_)) => return Err(invalid("coefficient", "give either gamma or gamma_diag, not both")),
            (Some(rows), None) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(invalid("coefficient.gamma", format!("expected {n} rows of {n} entries")));
                }
                CoefficientField::constant(n, rows.concat()).map_err(|e| ellipticity("coefficient.gamma", e))?
            }
            (None, Some(d)) => {
                if d.len() != n {
                    return Err(invalid("coefficient.gamma_diag", format!("expected {n} entries")));
                }
                CoefficientField::diagonal(&d).map_err(|e| ellipticity("coefficient.gamma_diag", e))?
            }
            (None, None) => CoefficientField::identity(n),
        };
        let kernel = match (c.kernel_series, c.gradient_series) {
            (None, None) => GreenKernel::new(coeff.clone()),
            (value, gradient) => GreenKernel::with_series(coeff.clone(), value.unwrap_or_else(|| vec![1.0]), gradient)
                .map_err(|e| invalid("coefficient.kernel_series", e))?,
        };
        let aux_series = match c.aux_series {
            None => kernel.gradient_series().to_vec(),
            Some(RawSeries::Named(name)) if name == "matched" => kernel.gradient_series().to_vec(),
            Some(RawSeries::Named(name)) => {
                return Err(invalid("coefficient.aux_series", format!("expected a list or \"matched\", got \"{name}\"")))
            }
            Some(RawSeries::Terms(t)) => {
                if t.is_empty() || t.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("coefficient.aux_series", "needs at least one finite term"));
                }
                t
            }
        };

        let pr = self.problem;
        let psi = Arc::new(Expr::parse(&pr.psi, n).map_err(|e| invalid("problem.psi", e))?);
        let phi = Arc::new(Expr::parse(&pr.phi, n).map_err(|e| invalid("problem.phi", e))?);
        positive("problem.c_n", pr.c_n)?;
        if let Some(mu) = pr.mu {
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(invalid("problem.mu", format!("{mu} must be nonnegative")));
            }
        }
        let mu_eps = pr.mu_eps.unwrap_or_else(|| p.eps.clone());
        strictly_decreasing("problem.mu_eps", &mu_eps)?;

        let s = self.solver;
        let solver = SolverConfig {
            tol: s.tol,
            max_iter: s.max_iter,
            outer_max_iter: s.outer_max_iter,
            pdas_factor: s.pdas_factor,
            kkt_tol: s.kkt_tol,
            max_halvings: s.max_halvings,
        };
        positive("solver.tol", solver.tol)?;
        positive("solver.kkt_tol", solver.kkt_tol)?;
        positive("solver.pdas_factor", solver.pdas_factor)?;
        if solver.max_iter == 0 || solver.outer_max_iter == 0 {
            return Err(invalid("solver", "iteration limits must be positive"));
        }
        s.quadrature.validate().map_err(|e| invalid("solver.quadrature", e))?;
        if let Some(h) = &s.mesh.h {
            if h.len() != p.eps.len() {
                return Err(invalid("solver.mesh.h", format!("{} widths for {} eps values", h.len(), p.eps.len())));
            }
            for &w in h {
                positive("solver.mesh.h", w)?;
            }
        }
        positive("solver.mesh.h_over_r", s.mesh.h_over_r)?;
        let mesh = MeshPlan {
            h: s.mesh.h,
            h_over_r: s.mesh.h_over_r,
            options: MeshOptions { allow_under_resolved: s.mesh.allow_under_resolved, node_cap: s.mesh.node_cap },
        };

        let st = self.study;
        if st.reduction == Reduction::PeriodicCell && domain.mode() != BoundaryMode::PeriodicSlab {
            return Err(invalid("study.reduction", "the periodic-cell reduction needs boundary = \"periodic-slab\""));
        }
        let ordering = match st.ordering {
            Some(o) => {
                strictly_decreasing("study.ordering.eps", &o.eps)?;
                positive("study.ordering.h", o.h)?;
                Some(OrderingPlan { eps: o.eps, h: o.h })
            }
            None => None,
        };

        let lemmas = lemma_config(self.lemmas, &domain)?;
        let out = self.output;
        Ok(RunConfig {
            domain,
            eps: p.eps,
            tilde_r,
            bounds,
            coeff,
            kernel,
            aux_series,
            psi,
            phi,
            c_n: pr.c_n,
            mu: pr.mu,
            mu_eps,
            solver,
            quad: s.quadrature,
            mesh,
            reduction: st.reduction,
            ordering,
            lemmas,
            output: OutputConfig { dir: out.dir, json: out.json, csv: out.csv },
        })
    }
}

fn ellipticity(path: &str, e: crate::error::Error) -> ConfigError {
    invalid(
        path,
        format!("γ must be symmetric and uniformly elliptic, a|ξ|² <= γξ·ξ <= b|ξ|² with a > 0 ({e})"),
    )
}

fn lemma_config(raw: RawLemmas, domain: &DomainSpec) -> Result<LemmaConfig, ConfigError> {
    let n = domain.dim();
    let cutoff = match raw.cutoff.as_deref() {
        None => Some(Cutoff::default()),
        Some([]) => None,
        Some(&[lo, hi]) if lo < hi => Some(Cutoff::new(lo, hi)),
        Some(_) => return Err(invalid("lemmas.cutoff", "expected [] or [lower, upper] with lower < upper")),
    };
    let test_fn = |path: &str, src: &str| -> Result<TestFunctionSpec, ConfigError> {
        let f: SharedField = Arc::new(Expr::parse(src, n).map_err(|e| invalid(path, e))?);
        let label = if cutoff.is_some() { format!("cutoff*{src}") } else { src.to_string() };
        let label = if src == "1" && cutoff.is_some() { "cutoff".to_string() } else { label };
        Ok(TestFunctionSpec::new(cutoff, f, label))
    };
    let phi = test_fn("lemmas.phi", &raw.phi)?;
    let volume_phi = test_fn("lemmas.volume_phi", raw.volume_phi.as_deref().unwrap_or(&format!("x{n}")))?;
    positive("lemmas.v_bound", raw.v_bound)?;
    let mut v_family = Vec::with_capacity(raw.v.len());
    for src in &raw.v {
        let v = match src.trim() {
            "0" => VField::Zero,
            "1" => VField::One,
            "1-omega" | "1 - omega" => VField::OneMinusOmega,
            other => VField::Field {
                field: Arc::new(Expr::parse(other, n).map_err(|e| invalid("lemmas.v", e))?),
                label: other.to_string(),
            },
        };
        v.validate(domain, raw.v_bound).map_err(|e| invalid("lemmas.v", e))?;
        v_family.push(v);
    }
    for &d in &raw.lift {
        positive("lemmas.lift", d)?;
    }
    Ok(LemmaConfig { plan: CheckPlan { phi, volume_phi, v_family }, lift: raw.lift, v_bound: raw.v_bound })
}

impl LemmaConfig {
    /// Checks that the test functions vanish on `Γ` of `domain`.
    pub fn validate(&self, domain: &DomainSpec) -> Result<(), ConfigError> {
        self.plan.phi.validate(domain).map_err(|e| invalid("lemmas.phi", e))?;
        self.plan.volume_phi.validate(domain).map_err(|e| invalid("lemmas.volume_phi", e))
    }
}

impl RunConfig {
    pub fn lemma_setup(&self, eps: Vec<f64>) -> LemmaSetup {
        LemmaSetup {
            domain: self.domain.clone(),
            tilde_r: self.tilde_r.clone(),
            bounds: self.bounds,
            kernel: self.kernel.clone(),
            aux_series: self.aux_series.clone(),
            quad: self.quad,
            eps,
        }
    }

    /// `μ` from the configuration, or the extrapolated positive-normalized limit.
    pub fn resolve_mu(&self) -> crate::error::Result<f64> {
        match self.mu {
            Some(mu) => Ok(mu),
            None => self.lemma_setup(self.mu_eps.clone()).mu_limit(),
        }
    }

    pub fn problem_data(&self, mu: f64) -> ProblemData {
        let psi: SharedField = self.psi.clone();
        let phi: SharedField = self.phi.clone();
        ProblemData::new(psi, phi).with_c_n(self.c_n).with_mu(mu)
    }

    pub fn study_setup(&self, mu: f64) -> StudySetup {
        StudySetup {
            domain: self.domain.clone(),
            tilde_r: self.tilde_r.clone(),
            bounds: self.bounds,
            coeff: self.coeff.clone(),
            data: self.problem_data(mu),
            eps: self.eps.clone(),
            mesh: self.mesh.clone(),
            solver: self.solver,
            reduction: self.reduction,
            ordering: self.ordering.clone(),
        }
    }
}
