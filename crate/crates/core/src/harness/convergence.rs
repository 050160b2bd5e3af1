//! Convergence of the ε-level obstacle solutions to the homogenized one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, solve_homogenized_detailed, solve_obstacle_detailed, HomogenizedSolution, ObstacleSolution,
    ProblemData, SolveReport, SolverConfig,
};
use crate::field::ScalarField;
use crate::fit::log_log_slope;
use crate::geometry::{build_layout_with, BoundaryMode, DomainSpec, PatchLayout, RadiusBounds, TildeR, MAX_DIM};
use crate::kernel::CoefficientField;
use crate::mesh::{build_mesh, build_mesh_cells, Mesh, MeshOptions, NodeTag};
use crate::quadrature::GaussLegendre;

/// How the laterally periodic structure is exploited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Solve on the full box.
    #[default]
    None,
    /// Solve on one lattice cell of a periodic slab and scale by the cell
    /// count. Requires `ψ` and `φ` to repeat with the smallest cell.
    PeriodicCell,
}

/// Mesh width per ε: explicit, or a multiple of the smallest patch radius.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPlan {
    pub h: Option<Vec<f64>>,
    pub h_over_r: f64,
    pub options: MeshOptions,
}

impl Default for MeshPlan {
    fn default() -> Self {
        Self { h: None, h_over_r: 0.5, options: MeshOptions::default() }
    }
}

impl MeshPlan {
    fn width(&self, i: usize, layout: &PatchLayout) -> Result<f64> {
        match &self.h {
            Some(h) => h.get(i).copied().ok_or_else(|| {
                Error::Problem(format!("{} mesh widths given for at least {} ε values", h.len(), i + 1))
            }),
            None => {
                let r = layout.min_radius().unwrap_or(layout.epsilon());
                Ok(self.h_over_r * r)
            }
        }
    }
}

/// Lattices compared on one fixed mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingPlan {
    pub eps: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct StudySetup {
    pub domain: DomainSpec,
    pub tilde_r: TildeR,
    pub bounds: RadiusBounds,
    pub coeff: CoefficientField,
    /// `μ` and `c_n` inside are used for the homogenized solve.
    pub data: ProblemData,
    pub eps: Vec<f64>,
    pub mesh: MeshPlan,
    pub solver: SolverConfig,
    pub reduction: Reduction,
    pub ordering: Option<OrderingPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub eps: Vec<f64>,
    pub h: f64,
    pub energies: Vec<f64>,
    /// Energies nondecreasing as ε decreases.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub eps: Vec<f64>,
    pub h: Vec<f64>,
    pub energies: Vec<f64>,
    pub l2_domain: Vec<f64>,
    pub l2_sigma: Vec<f64>,
    pub active_fraction: Vec<f64>,
    pub solves: Vec<SolveReport>,
    pub mu: f64,
    pub c_n: f64,
    pub homogenized_energy: f64,
    pub homogenized_penalty: f64,
    /// The penalty recomputed by Gauss quadrature of the interpolant on Σ.
    pub penalty_recomputed: f64,
    /// The two penalty values agree to `1e-10`.
    pub penalty_consistent: bool,
    pub homogenized: Option<SolveReport>,
    pub slope_l2_domain: Option<f64>,
    pub slope_l2_sigma: Option<f64>,
    pub l2_decreasing: bool,
    pub ordering: Option<OrderingReport>,
    pub pass: bool,
    pub error: Option<String>,
}

impl ConvergenceReport {
    fn empty(setup: &StudySetup) -> Self {
        Self {
            eps: Vec::new(),
            h: Vec::new(),
            energies: Vec::new(),
            l2_domain: Vec::new(),
            l2_sigma: Vec::new(),
            active_fraction: Vec::new(),
            solves: Vec::new(),
            mu: setup.data.mu,
            c_n: setup.data.c_n,
            homogenized_energy: f64::NAN,
            homogenized_penalty: f64::NAN,
            penalty_recomputed: f64::NAN,
            penalty_consistent: false,
            homogenized: None,
            slope_l2_domain: None,
            slope_l2_sigma: None,
            l2_decreasing: false,
            ordering: None,
            pass: false,
            error: None,
        }
    }
}

/// A meshed instance and the factor converting its energies to the full box.
struct Instance {
    mesh: Arc<Mesh>,
    copies: f64,
}

fn cell_domain(full: &DomainSpec, period: f64) -> Result<DomainSpec> {
    let n = full.dim();
    let mut ext = vec![period; n];
    ext[n - 1] = full.height();
    DomainSpec::new(n, ext, BoundaryMode::PeriodicSlab)
}

fn cells_for(length: f64, h: f64) -> usize {
    ((length / h).round() as usize).max(1)
}

impl StudySetup {
    fn layout(&self, domain: &DomainSpec, eps: f64) -> Result<PatchLayout> {
        Ok(build_layout_with(domain, eps, self.tilde_r.clone(), self.bounds)?.with_metric(self.coeff.metric()))
    }

    /// Mesh of `domain` with width `h`; `period` is the lateral cell size in
    /// the periodic reduction.
    fn instance(&self, eps: f64, h: f64, period: Option<f64>, empty: bool) -> Result<Instance> {
        let n = self.domain.dim();
        match (self.reduction, period) {
            (Reduction::PeriodicCell, Some(p)) => {
                let cell = cell_domain(&self.domain, p)?;
                let layout = if empty { PatchLayout::empty(&cell, eps) } else { self.layout(&cell, eps)? };
                let mut cells: Vec<usize> = vec![cells_for(p, h).max(2); n];
                cells[n - 1] = cells_for(cell.height(), h);
                let mesh = build_mesh_cells(&cell, &layout, &cells, self.mesh.options)?;
                let copies = self.domain.sigma_area() / cell.sigma_area();
                Ok(Instance { mesh: Arc::new(mesh), copies })
            }
            _ => {
                let layout =
                    if empty { PatchLayout::empty(&self.domain, eps) } else { self.layout(&self.domain, eps)? };
                let mesh = build_mesh(&self.domain, &layout, h, self.mesh.options)?;
                Ok(Instance { mesh: Arc::new(mesh), copies: 1.0 })
            }
        }
    }

    fn check_periodic_data(&self, period: f64) -> Result<()> {
        let n = self.domain.dim();
        let ext = self.domain.extents();
        // deterministic low-discrepancy samples
        let alphas = [0.754_877_666_246_692_7, 0.569_840_290_998_053_2, 0.438_289_196_222_811_4, 0.347_296_355_333_860_7, 0.281_818_181_818_181_8, 0.618_033_988_749_894_8];
        let mut x = [0.0; MAX_DIM];
        let mut y = [0.0; MAX_DIM];
        for s in 1..=64 {
            for a in 0..n {
                x[a] = ext[a] * ((s as f64) * alphas[a]).fract();
            }
            for a in 0..n - 1 {
                y[..n].copy_from_slice(&x[..n]);
                y[a] = (y[a] + period) % ext[a];
                for (name, f) in [("ψ", &self.data.psi), ("φ", &self.data.phi)] {
                    let (u, v) = (f.value(&x[..n]), f.value(&y[..n]));
                    if (u - v).abs() > 1e-12 * (1.0 + u.abs()) {
                        return Err(Error::Problem(format!(
                            "{name} does not repeat with the lattice period {period} along axis {} (at {:?})",
                            a + 1,
                            &x[..n]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `∫_Σ (u - φ)_-²` by order-5 Gauss rules on every bottom face of `mesh`,
/// evaluating the interpolant of `u`.
pub fn sigma_penalty(mesh: &Mesh, u: &[f64], phi: &dyn ScalarField) -> f64 {
    let n = mesh.dim();
    let m = n - 1;
    let gl: Vec<(f64, f64)> = GaussLegendre::new(5).mapped(0.0, 1.0).collect();
    let h = mesh.spacing();
    let area: f64 = h[..m].iter().product();
    let per = gl.len().pow(m as u32);
    let mut total = 0.0;
    let mut origin = [0.0; MAX_DIM];
    let mut x = [0.0; MAX_DIM];
    for f in 0..mesh.face_count() {
        mesh.face_origin(f, &mut origin[..n]);
        let mut face = 0.0;
        for q in 0..per {
            let mut rem = q;
            let mut w = 1.0;
            x[..n].copy_from_slice(&origin[..n]);
            for a in 0..m {
                let (t, wt) = gl[rem % gl.len()];
                rem /= gl.len();
                x[a] += t * h[a];
                w *= wt;
            }
            x[m] = 0.0;
            let neg = (phi.value(&x[..n]) - mesh.interpolate(u, &x[..n])).max(0.0);
            face += w * neg * neg;
        }
        total += area * face;
    }
    total
}

fn strictly_decreasing(values: &[f64]) -> bool {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale <= 1e-8 {
        return true;
    }
    values.windows(2).all(|w| w[1] < w[0])
}

fn nondecreasing(values: &[f64]) -> bool {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values.windows(2).all(|w| w[1] >= w[0] - 1e-9 * scale)
}

fn constrained_count(mesh: &Mesh) -> usize {
    mesh.tags().iter().filter(|t| matches!(t, NodeTag::Patch(_))).count()
}

fn unconverged(what: &str, r: &SolveReport) -> String {
    format!(
        "{what} did not converge after {} iterations (residual {:.3e})",
        r.iterations, r.residual
    )
}

/// An ε-level obstacle solve on the study mesh for that level.
#[derive(Debug, Clone)]
pub struct LevelSolve {
    pub eps: f64,
    pub mesh: Arc<Mesh>,
    /// Cells of the reduced mesh per box; 1 without reduction.
    pub copies: f64,
    pub constrained: usize,
    pub solution: ObstacleSolution,
}

impl LevelSolve {
    /// Energy of the full box.
    pub fn energy(&self) -> f64 {
        self.solution.report.energy * self.copies
    }

    pub fn active_fraction(&self) -> f64 {
        if self.constrained == 0 {
            0.0
        } else {
            self.solution.report.active_set as f64 / self.constrained as f64
        }
    }
}

/// The homogenized solve on the finest study mesh.
#[derive(Debug, Clone)]
pub struct LimitSolve {
    pub mesh: Arc<Mesh>,
    pub copies: f64,
    pub solution: HomogenizedSolution,
    /// `c_n μ ∫_Σ (ũ - φ)_-²` by independent surface quadrature, full box.
    pub penalty_recomputed: f64,
}

impl LimitSolve {
    pub fn energy(&self) -> f64 {
        self.solution.report.energy * self.copies
    }

    pub fn penalty(&self) -> f64 {
        self.solution.penalty_energy * self.copies
    }

    pub fn penalty_consistent(&self) -> bool {
        (self.penalty() - self.penalty_recomputed).abs() <= PENALTY_TOL * self.penalty().abs().max(1.0)
    }
}

/// Agreement required between the solver's penalty and its recomputation.
pub const PENALTY_TOL: f64 = 1e-10;

impl StudySetup {
    fn periodic(&self) -> bool {
        self.reduction == Reduction::PeriodicCell
    }

    fn period(&self, e: f64) -> Option<f64> {
        self.periodic().then_some(2.0 * e)
    }

    /// Validates the ε list, `μ` and the reduction against the data.
    pub fn check(&self) -> Result<()> {
        if self.eps.is_empty() || self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Problem("the ε list must be nonempty and strictly decreasing".into()));
        }
        if !(self.data.mu >= 0.0) {
            return Err(Error::Problem(format!("μ = {} must be nonnegative", self.data.mu)));
        }
        if self.periodic() {
            if self.domain.mode() != BoundaryMode::PeriodicSlab {
                return Err(Error::Problem("the periodic-cell reduction needs the periodic slab".into()));
            }
            self.check_periodic_data(2.0 * self.eps[self.eps.len() - 1])?;
        }
        Ok(())
    }

    /// Mesh width of every level.
    pub fn widths(&self) -> Result<Vec<f64>> {
        self.eps
            .iter()
            .enumerate()
            .map(|(i, &e)| self.mesh.width(i, &self.layout(&self.domain, e)?))
            .collect()
    }

    /// Obstacle solve of level `i` with mesh width `h`.
    pub fn solve_level(&self, i: usize, h: f64) -> Result<LevelSolve> {
        let e = self.eps[i];
        let inst = self.instance(e, h, self.period(e), false)?;
        let k = assemble_stiffness(&inst.mesh, &self.coeff);
        let solution = solve_obstacle_detailed(&k, &self.data, &inst.mesh, &self.solver)?;
        Ok(LevelSolve { eps: e, constrained: constrained_count(&inst.mesh), mesh: inst.mesh, copies: inst.copies, solution })
    }

    /// Homogenized solve with mesh width `h` on the smallest-ε cell.
    pub fn solve_limit(&self, h: f64) -> Result<LimitSolve> {
        let e_min = self.eps[self.eps.len() - 1];
        let inst = self.instance(e_min, h, self.period(e_min), true)?;
        let k = assemble_stiffness(&inst.mesh, &self.coeff);
        let solution = solve_homogenized_detailed(&k, &self.data, &inst.mesh, &self.solver)?;
        let penalty_recomputed = self.data.penalty_weight()
            * sigma_penalty(&inst.mesh, solution.field.values(), self.data.phi.as_ref())
            * inst.copies;
        Ok(LimitSolve { mesh: inst.mesh, copies: inst.copies, solution, penalty_recomputed })
    }
}

/// Solves `u^ε` for every ε and `ũ` once, and measures their distance.
/// Sub-solve failures end the study early with a partial report.
pub fn convergence_study(setup: &StudySetup) -> Result<ConvergenceReport> {
    setup.check()?;
    let periodic = setup.periodic();
    let mut report = ConvergenceReport::empty(setup);
    let widths = setup.widths()?;
    let h_fine = widths.iter().copied().fold(f64::INFINITY, f64::min);

    let hom = setup.solve_limit(h_fine)?;
    report.homogenized_energy = hom.energy();
    report.homogenized_penalty = hom.penalty();
    report.penalty_recomputed = hom.penalty_recomputed;
    report.penalty_consistent = hom.penalty_consistent();
    report.homogenized = Some(hom.solution.report.clone());
    if !hom.solution.report.converged {
        report.error = Some(unconverged("homogenized solve", &hom.solution.report));
        return Ok(report);
    }
    let u_hom = hom.solution.field.values();

    for (i, &h) in widths.iter().enumerate() {
        let level = setup.solve_level(i, h)?;
        let mesh = &level.mesh;
        let u = level.solution.field.values();
        report.eps.push(level.eps);
        report.h.push(mesh.spacing().iter().copied().fold(0.0, f64::max));
        report.energies.push(level.energy());
        report.active_fraction.push(level.active_fraction());
        let (d_domain, d_sigma) = if periodic {
            let n = mesh.dim();
            let diff: Vec<f64> = (0..mesh.node_count())
                .map(|j| {
                    let mut x = [0.0; MAX_DIM];
                    mesh.coords(j, &mut x[..n]);
                    u[j] - hom.mesh.interpolate(u_hom, &x[..n])
                })
                .collect();
            let s = level.copies.sqrt();
            (mesh.l2_norm(&diff) * s, mesh.sigma_l2_norm(&diff) * s)
        } else {
            let moved = hom.mesh.transfer_from(mesh, u);
            let diff: Vec<f64> = moved.iter().zip(u_hom).map(|(a, b)| a - b).collect();
            (hom.mesh.l2_norm(&diff), hom.mesh.sigma_l2_norm(&diff))
        };
        report.l2_domain.push(d_domain);
        report.l2_sigma.push(d_sigma);
        let solve = level.solution.report.clone();
        report.solves.push(solve.clone());
        if !solve.converged {
            report.error = Some(unconverged(&format!("obstacle solve at ε = {}", level.eps), &solve));
            return Ok(report);
        }
    }
    report.slope_l2_domain = log_log_slope(&report.eps, &report.l2_domain);
    report.slope_l2_sigma = log_log_slope(&report.eps, &report.l2_sigma);
    report.l2_decreasing = strictly_decreasing(&report.l2_domain);

    if let Some(plan) = &setup.ordering {
        let mut energies = Vec::with_capacity(plan.eps.len());
        let common = plan.eps.iter().copied().fold(0.0, f64::max);
        for &e in &plan.eps {
            let inst = setup.instance(e, plan.h, setup.period(common), false)?;
            let k = assemble_stiffness(&inst.mesh, &setup.coeff);
            let sol = solve_obstacle_detailed(&k, &setup.data, &inst.mesh, &setup.solver)?;
            if !sol.report.converged {
                report.error = Some(unconverged(&format!("ordering solve at ε = {e}"), &sol.report));
                return Ok(report);
            }
            energies.push(sol.report.energy * inst.copies);
        }
        let pass = nondecreasing(&energies);
        report.ordering = Some(OrderingReport { eps: plan.eps.clone(), h: plan.h, energies, pass });
    }
    report.pass = report.l2_decreasing
        && report.penalty_consistent
        && report.ordering.as_ref().is_none_or(|o| o.pass);
    Ok(report)
}
