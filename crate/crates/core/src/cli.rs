//! Subcommand pipelines behind the `obstacle-lab` binary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::config::RunConfig;
use crate::corrector::{limit_density, DensitySetup, SignMode};
use crate::error::{Error, Result};
use crate::fem::SolveReport;
use crate::fit::log_log_slope;
use crate::harness::{check_lifted_boundary_flux, convergence_study, run_lemma_checks, VField};
use crate::report::{lemma_rows, write_csv, write_json, write_layout_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    DumpLayout,
    CorrectorScan,
    MuLimit,
    SolveEps,
    SolveHom,
    CheckLemmas,
    Converge,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::DumpLayout,
        Command::CorrectorScan,
        Command::MuLimit,
        Command::SolveEps,
        Command::SolveHom,
        Command::CheckLemmas,
        Command::Converge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::DumpLayout => "dump-layout",
            Command::CorrectorScan => "corrector-scan",
            Command::MuLimit => "mu-limit",
            Command::SolveEps => "solve-eps",
            Command::SolveHom => "solve-hom",
            Command::CheckLemmas => "check-lemmas",
            Command::Converge => "converge",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub command: Command,
    /// Conjunction of every pass flag of the run.
    pub pass: bool,
    pub artifacts: Vec<PathBuf>,
    /// A pipeline failure; the artifacts then hold a partial report.
    pub error: Option<String>,
}

/// Exit status: 0 when every pass flag holds, 1 when one fails or a
/// pipeline stops early, 2 when the run could not start or write.
pub fn exit_code(outcome: &Result<Outcome>) -> i32 {
    match outcome {
        Ok(o) if o.pass && o.error.is_none() => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

struct Sink<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    artifacts: Vec<PathBuf>,
}

impl Sink<'_> {
    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.config.output.json {
            let path = self.dir.join(format!("{name}.json"));
            write_json(&path, value)?;
            self.artifacts.push(path);
        }
        Ok(())
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        if self.config.output.csv {
            let path = self.dir.join(format!("{name}.csv"));
            write_csv(&path, rows)?;
            self.artifacts.push(path);
        }
        Ok(())
    }
}

/// Runs `command` and writes its artifacts under `dir`, which is created if
/// needed. Pipeline failures are reported in the outcome; only I/O and
/// configuration problems return an error.
pub fn dispatch(command: Command, config: &RunConfig, dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(dir)?;
    let mut sink = Sink { config, dir, artifacts: Vec::new() };
    let (pass, error) = match command {
        Command::DumpLayout => dump_layout(&mut sink)?,
        Command::CorrectorScan => corrector_scan(&mut sink)?,
        Command::MuLimit => mu_limit(&mut sink)?,
        Command::SolveEps => solve_eps(&mut sink)?,
        Command::SolveHom => solve_hom(&mut sink)?,
        Command::CheckLemmas => check_lemmas(&mut sink)?,
        Command::Converge => converge(&mut sink)?,
    };
    Ok(Outcome { command, pass, artifacts: sink.artifacts, error })
}

type Verdict = (bool, Option<String>);

#[derive(Debug, Serialize)]
struct LayoutSummary {
    eps: f64,
    patches: usize,
    lattice: Vec<usize>,
    r_min: Option<f64>,
    file: String,
}

fn dump_layout(sink: &mut Sink<'_>) -> Result<Verdict> {
    let c = sink.config;
    let mut summary = Vec::new();
    for (i, &e) in c.eps.iter().enumerate() {
        let layout = c.lemma_setup(vec![e]).layout(e)?;
        let file = format!("layout_{i}.csv");
        let path = sink.dir.join(&file);
        write_layout_csv(&path, &layout)?;
        sink.artifacts.push(path);
        summary.push(LayoutSummary {
            eps: e,
            patches: layout.len(),
            lattice: layout.lattice().to_vec(),
            r_min: layout.min_radius(),
            file,
        });
    }
    sink.json("layout", &summary)?;
    Ok((true, None))
}

#[derive(Debug, Clone, Serialize)]
struct ScanRow {
    eps: f64,
    patches: usize,
    radius: f64,
    omega_l2: f64,
    omega_h1: f64,
    omega_gradient_l1: f64,
    q_gradient_l2: f64,
    mu_pairing: f64,
    slope_omega_l2: Option<f64>,
    slope_omega_h1: Option<f64>,
    slope_omega_gradient_l1: Option<f64>,
    slope_q_gradient_l2: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ScanReport {
    rows: Vec<ScanRow>,
    error: Option<String>,
}

fn scan_row(c: &RunConfig, e: f64) -> Result<ScanRow> {
    let setup = c.lemma_setup(vec![e]);
    let corr = setup.corrector(e)?;
    let aux = setup.auxiliary(e)?;
    let mu = setup.mu(e, SignMode::Verbatim)?;
    let order = c.quad.radial;
    Ok(ScanRow {
        eps: e,
        patches: corr.layout().len(),
        radius: corr.layout().min_radius().unwrap_or(f64::NAN),
        omega_l2: corr.omega_l2(order)?,
        omega_h1: corr.omega_h1_seminorm(order)?,
        omega_gradient_l1: corr.omega_gradient_l1(order)?,
        q_gradient_l2: aux.q_gradient_l2(order)?,
        mu_pairing: mu.mu_weak_pairing(&1.0, &c.quad)?,
        slope_omega_l2: None,
        slope_omega_h1: None,
        slope_omega_gradient_l1: None,
        slope_q_gradient_l2: None,
    })
}

fn corrector_scan(sink: &mut Sink<'_>) -> Result<Verdict> {
    let c = sink.config;
    let mut rows = Vec::new();
    let mut error = None;
    for &e in &c.eps {
        match scan_row(c, e) {
            Ok(r) => rows.push(r),
            Err(err) => {
                error = Some(format!("ε = {e}: {err}"));
                break;
            }
        }
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let slope = |f: fn(&ScanRow) -> f64| log_log_slope(&eps, &rows.iter().map(f).collect::<Vec<_>>());
    let slopes = [
        slope(|r| r.omega_l2),
        slope(|r| r.omega_h1),
        slope(|r| r.omega_gradient_l1),
        slope(|r| r.q_gradient_l2),
    ];
    for r in &mut rows {
        r.slope_omega_l2 = slopes[0];
        r.slope_omega_h1 = slopes[1];
        r.slope_omega_gradient_l1 = slopes[2];
        r.slope_q_gradient_l2 = slopes[3];
    }
    sink.csv("corrector_scan", &rows)?;
    let report = ScanReport { rows, error };
    sink.json("corrector_scan", &report)?;
    Ok((true, report.error))
}

#[derive(Debug, Serialize)]
struct MuLimitReport {
    eps: Vec<f64>,
    densities: Vec<f64>,
    limit: f64,
    order: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct MuRow {
    eps: f64,
    density: f64,
}

fn mu_limit(sink: &mut Sink<'_>) -> Result<Verdict> {
    let c = sink.config;
    let setup = DensitySetup {
        domain: &c.domain,
        tilde_r: &c.tilde_r,
        bounds: c.bounds,
        coeff: &c.coeff,
        series: &c.aux_series,
        mode: SignMode::Positive,
    };
    let report = match limit_density(&setup, &c.mu_eps, &c.quad) {
        Ok(d) => MuLimitReport {
            limit: d.limit(),
            order: d.extrapolation.order,
            eps: d.eps,
            densities: d.densities,
            error: None,
        },
        Err(e) => MuLimitReport { eps: c.mu_eps.clone(), densities: Vec::new(), limit: f64::NAN, order: None, error: Some(e.to_string()) },
    };
    let rows: Vec<MuRow> = report.eps.iter().zip(&report.densities).map(|(&eps, &density)| MuRow { eps, density }).collect();
    sink.csv("mu_limit", &rows)?;
    sink.json("mu_limit", &report)?;
    Ok((true, report.error))
}

#[derive(Debug, Clone, Serialize)]
struct SolveRow {
    eps: f64,
    h: f64,
    nodes: usize,
    copies: f64,
    constrained: usize,
    energy: f64,
    iterations: usize,
    residual: f64,
    active_set: usize,
    active_fraction: f64,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct SolveEpsReport {
    rows: Vec<SolveRow>,
    pass: bool,
    error: Option<String>,
}

fn solve_eps(sink: &mut Sink<'_>) -> Result<Verdict> {
    let c = sink.config;
    let setup = c.study_setup(c.mu.unwrap_or(0.0));
    let mut rows = Vec::new();
    let mut error = None;
    let run = |rows: &mut Vec<SolveRow>| -> Result<()> {
        setup.check()?;
        for (i, h) in setup.widths()?.into_iter().enumerate() {
            let level = setup.solve_level(i, h)?;
            let rep = &level.solution.report;
            rows.push(SolveRow {
                eps: level.eps,
                h: level.mesh.spacing().iter().copied().fold(0.0, f64::max),
                nodes: level.mesh.node_count(),
                copies: level.copies,
                constrained: level.constrained,
                energy: level.energy(),
                iterations: rep.iterations,
                residual: rep.residual,
                active_set: rep.active_set,
                active_fraction: level.active_fraction(),
                converged: rep.converged,
            });
            if !rep.converged {
                return Err(Error::Solver(format!("obstacle solve at ε = {} did not converge", level.eps)));
            }
        }
        Ok(())
    };
    if let Err(e) = run(&mut rows) {
        error = Some(e.to_string());
    }
    let pass = error.is_none() && rows.iter().all(|r| r.converged);
    sink.csv("solve_eps", &rows)?;
    let report = SolveEpsReport { rows, pass, error };
    sink.json("solve_eps", &report)?;
    Ok((report.pass, report.error))
}

#[derive(Debug, Serialize)]
struct SolveHomReport {
    mu: f64,
    c_n: f64,
    h: f64,
    nodes: usize,
    copies: f64,
    energy: f64,
    penalty: f64,
    penalty_recomputed: f64,
    penalty_consistent: bool,
    sigma_mean: f64,
    solve: Option<SolveReport>,
    pass: bool,
    error: Option<String>,
}

fn solve_hom(sink: &mut Sink<'_>) -> Result<Verdict> {
    let c = sink.config;
    let mut report = SolveHomReport {
        mu: f64::NAN,
        c_n: c.c_n,
        h: f64::NAN,
        nodes: 0,
        copies: f64::NAN,
        energy: f64::NAN,
        penalty: f64::NAN,
        penalty_recomputed: f64::NAN,
        penalty_consistent: false,
        sigma_mean: f64::NAN,
        solve: None,
        pass: false,
        error: None,
    };
    let run = |report: &mut SolveHomReport| -> Result<()> {
        let mu = c.resolve_mu()?;
        report.mu = mu;
        let setup = c.study_setup(mu);
        setup.check()?;
        let h = setup.widths()?.into_iter().fold(f64::INFINITY, f64::min);
        let sol = setup.solve_limit(h)?;
        let mesh = &sol.mesh;
        report.h = mesh.spacing().iter().copied().fold(0.0, f64::max);
        report.nodes = mesh.node_count();
        report.copies = sol.copies;
        report.energy = sol.energy();
        report.penalty = sol.penalty();
        report.penalty_recomputed = sol.penalty_recomputed;
        report.penalty_consistent = sol.penalty_consistent();
        let u = sol.solution.field.values();
        let bottom = mesh.bottom_count();
        report.sigma_mean = u[..bottom].iter().sum::<f64>() / bottom as f64;
        report.solve = Some(sol.solution.report.clone());
        report.pass = sol.solution.report.converged && report.penalty_consistent;
        if !sol.solution.report.converged {
            return Err(Error::Solver("homogenized solve did not converge".into()));
        }
        Ok(())
    };
    if let Err(e) = run(&mut report) {
        report.error = Some(e.to_string());
        report.pass = false;
    }
    sink.csv("solve_hom", std::slice::from_ref(&SolveHomRow::from(&report)))?;
    sink.json("solve_hom", &report)?;
    Ok((report.pass, report.error))
}

#[derive(Debug, Serialize)]
struct SolveHomRow {
    mu: f64,
    c_n: f64,
    h: f64,
    nodes: usize,
    energy: f64,
    penalty: f64,
    penalty_recomputed: f64,
    sigma_mean: f64,
    pass: bool,
}

impl From<&SolveHomReport> for SolveHomRow {
    fn from(r: &SolveHomReport) -> Self {
        Self {
            mu: r.mu,
            c_n: r.c_n,
            h: r.h,
            nodes: r.nodes,
            energy: r.energy,
            penalty: r.penalty,
            penalty_recomputed: r.penalty_recomputed,
            sigma_mean: r.sigma_mean,
            pass: r.pass,
        }
    }
}

fn check_lemmas(sink: &mut Sink<'_>) -> Result<Verdict> {
    let c = sink.config;
    c.lemmas.validate(&c.domain)?;
    let setup = c.lemma_setup(c.eps.clone());
    let plan = &c.lemmas.plan;
    let mut report = run_lemma_checks(&setup, plan);
    if !c.lemmas.lift.is_empty() {
        let name = format!("boundary_flux_lift[v=1,phi={}]", plan.phi.label);
        let entry = check_lifted_boundary_flux(&setup, &VField::One, &plan.phi, &c.lemmas.lift)
            .unwrap_or_else(|e| crate::harness::LemmaEntry::failed(name, &setup.eps, e.to_string()));
        report.push(entry);
    }
    sink.csv("lemmas", &lemma_rows(&report))?;
    sink.json("lemmas", &report.entries)?;
    let error = report
        .entries
        .iter()
        .filter_map(|e| e.error.as_ref().map(|m| format!("{}: {m}", e.name)))
        .next();
    Ok((report.all_pass(), error))
}

#[derive(Debug, Serialize)]
struct ConvergeRow {
    eps: f64,
    h: f64,
    energy: f64,
    l2_domain: f64,
    l2_sigma: f64,
    active_fraction: f64,
    converged: bool,
}

fn converge(sink: &mut Sink<'_>) -> Result<Verdict> {
    let c = sink.config;
    let study = c.resolve_mu().and_then(|mu| convergence_study(&c.study_setup(mu)));
    let report = match study {
        Ok(r) => r,
        Err(e) => {
            let error = e.to_string();
            sink.json("converge", &serde_json::json!({ "pass": false, "error": error }))?;
            return Ok((false, Some(error)));
        }
    };
    let rows: Vec<ConvergeRow> = (0..report.eps.len())
        .map(|i| ConvergeRow {
            eps: report.eps[i],
            h: report.h[i],
            energy: report.energies[i],
            l2_domain: report.l2_domain[i],
            l2_sigma: report.l2_sigma[i],
            active_fraction: report.active_fraction[i],
            converged: report.solves[i].converged,
        })
        .collect();
    sink.csv("converge", &rows)?;
    sink.json("converge", &report)?;
    Ok((report.pass, report.error.clone()))
}
