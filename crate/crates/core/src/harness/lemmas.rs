//! Numerical checks of the energy limit of `ω_ε`, the three flux terms on
//! the pieces of `∂(D ∩ B_ε)` and the volume coupling term.

use rayon::prelude::*;

use super::testfn::{sigma_integral, TestFunctionSpec, VField};
use super::{LemmaCheckReport, LemmaEntry};
use crate::corrector::{
    limit_density, AuxiliaryFunction, Corrector, DensitySetup, HalfSphere, MuDensity, Quadrature, SignMode,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::fit::{log_log_slope, richardson};
use crate::geometry::{build_layout_with, DomainSpec, PatchLayout, RadiusBounds, TildeR, MAX_DIM};
use crate::kernel::GreenKernel;
use crate::quadrature::{radial_rule, DirectionRule};

/// Relative tolerance of the capacity-type limits.
pub const LIMIT_TOL: f64 = 0.05;
/// Absolute tolerance of the flat-boundary identity.
pub const EXACT_TOL: f64 = 1e-12;
/// Pointwise tolerance of the outer-sphere flux identity.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Smallest accepted decay slope of the volume coupling.
pub const COUPLING_SLOPE: f64 = 0.7;

/// Everything that defines `ω_ε`, `q_ε` and `μ_ε` along an ε sequence.
#[derive(Debug, Clone)]
pub struct LemmaSetup {
    pub domain: DomainSpec,
    pub tilde_r: TildeR,
    pub bounds: RadiusBounds,
    pub kernel: GreenKernel,
    /// Series of `q_ε` and `μ_ε`.
    pub aux_series: Vec<f64>,
    pub quad: Quadrature,
    pub eps: Vec<f64>,
}

impl LemmaSetup {
    /// Uniform `r̃ = 1` and an auxiliary series matched to the kernel.
    pub fn new(domain: DomainSpec, kernel: GreenKernel, eps: Vec<f64>) -> Self {
        let aux_series = kernel.gradient_series().to_vec();
        Self {
            domain,
            tilde_r: TildeR::Uniform(1.0),
            bounds: RadiusBounds::default(),
            kernel,
            aux_series,
            quad: Quadrature::default(),
            eps,
        }
    }

    pub fn layout(&self, eps: f64) -> Result<PatchLayout> {
        Ok(build_layout_with(&self.domain, eps, self.tilde_r.clone(), self.bounds)?
            .with_metric(self.kernel.metric().clone()))
    }

    pub fn corrector(&self, eps: f64) -> Result<Corrector> {
        Corrector::new(self.layout(eps)?, self.kernel.clone())
    }

    pub fn auxiliary(&self, eps: f64) -> Result<AuxiliaryFunction> {
        AuxiliaryFunction::new(self.layout(eps)?, self.kernel.coefficients().clone(), self.aux_series.clone())
    }

    pub fn mu(&self, eps: f64, mode: SignMode) -> Result<MuDensity> {
        MuDensity::new(self.layout(eps)?, self.kernel.coefficients(), self.aux_series.clone(), mode)
    }

    /// `lim ∫ μ_ε / |Σ|` in positive normalization.
    pub fn mu_limit(&self) -> Result<f64> {
        let setup = DensitySetup {
            domain: &self.domain,
            tilde_r: &self.tilde_r,
            bounds: self.bounds,
            coeff: self.kernel.coefficients(),
            series: &self.aux_series,
            mode: SignMode::Positive,
        };
        Ok(limit_density(&setup, &self.eps, &self.quad)?.limit())
    }

    fn per_eps(&self, f: impl Fn(f64) -> Result<f64> + Sync + Send) -> Result<Vec<f64>> {
        self.eps.par_iter().map(|&e| f(e)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_k ∫ (A∇ω_ε)·ν w dS` over the half-spheres of radius `radius(k)`, with
/// `ν` the outward normal of the ball when `outward` and the inward one
/// otherwise. `w` receives the point and `ω_ε` there.
pub fn sphere_flux(
    corr: &Corrector,
    sphere: &HalfSphere,
    radius: impl Fn(usize) -> f64 + Sync + Send,
    outward: bool,
    w: &(dyn Fn(&[f64], f64) -> f64 + Sync),
) -> f64 {
    let n = corr.dim();
    let frame = corr.frame();
    let sign = if outward { 1.0 } else { -1.0 };
    let parts: Vec<f64> = (0..corr.layout().len())
        .into_par_iter()
        .map(|k| {
            let mut flux = [0.0; MAX_DIM];
            let mut nu = [0.0; MAX_DIM];
            let c = corr.layout().center(k);
            frame.sphere_integral(c, radius(k), sphere, |x, u| {
                corr.patch_flux_into(k, x, &mut flux[..n]);
                frame.normal(u, &mut nu[..n]);
                let d = corr.kernel().metric_distance(x, c);
                let weight = w(x, corr.profile(k, d));
                if weight == 0.0 {
                    return 0.0;
                }
                sign * dot(&flux[..n], &nu[..n]) * frame.surface_ratio(u) * weight
            })
        })
        .collect();
    parts.iter().sum()
}

/// Capacity flux `Σ_k -ω'(r_k) det γ r_k^{n-1} |S^{n-1}|/2` through the inner
/// spheres, the value of the inner flux for `v = φ = 1`.
pub fn inner_capacity_flux(corr: &Corrector) -> f64 {
    let n = corr.dim() as i32;
    let half = 0.5 * crate::quadrature::unit_sphere_area(corr.dim());
    (0..corr.layout().len())
        .map(|k| {
            let r = corr.layout().radius(k);
            -corr.profile_slope(k, r) * corr.frame().det() * r.powi(n - 1) * half
        })
        .sum()
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

/// `∫ |γ∇ω_ε|² φ` against `μ ∫_Σ φ`.
pub fn check_le2(setup: &LemmaSetup, phi: &TestFunctionSpec) -> Result<LemmaEntry> {
    let values = setup.per_eps(|e| setup.corrector(e)?.weighted_energy(phi, &setup.quad))?;
    let target = setup.mu_limit()? * sigma_integral(&setup.domain, phi, 16, 4);
    let limit = richardson(&setup.eps, &values).limit;
    let gaps: Vec<f64> = values.iter().map(|v| relative_gap(*v, target)).collect();
    let pass = limit_matches(limit, target, &values, LIMIT_TOL);
    Ok(LemmaEntry {
        gaps,
        reference: vec![target; values.len()],
        ..LemmaEntry::new(format!("le2[phi={}]", phi.label), &setup.eps, values, limit, target, LIMIT_TOL, pass)
    })
}

fn limit_matches(limit: f64, target: f64, values: &[f64], tol: f64) -> bool {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if target == 0.0 {
        scale == 0.0 || limit.abs() <= tol * scale
    } else {
        (limit - target).abs() <= tol * target.abs()
    }
}

/// Flux of `A∇ω_ε` into the inner balls `B_{r_k}`, weighted by `v φ`.
pub fn check_inner_flux(setup: &LemmaSetup, v: &VField, phi: &TestFunctionSpec) -> Result<LemmaEntry> {
    let quad = setup.quad;
    let weight = |x: &[f64], omega: f64| v.value(x, omega) * phi.value(x);
    let values = setup.per_eps(|e| {
        let corr = setup.corrector(e)?;
        let sphere = corr.frame().half_sphere(quad.polar, quad.azimuth);
        Ok(sphere_flux(&corr, &sphere, |k| corr.layout().radius(k), false, &weight))
    })?;
    let reference = setup.per_eps(|e| Ok(inner_capacity_flux(&setup.corrector(e)?)))?;
    let limit = richardson(&setup.eps, &values).limit;
    let last = *values.last().unwrap_or(&0.0);
    let pass = limit >= -LIMIT_TOL && last >= -LIMIT_TOL;
    Ok(LemmaEntry {
        reference,
        ..LemmaEntry::new(
            format!("inner_flux[v={},phi={}]", v.label(), phi.label),
            &setup.eps,
            values,
            limit,
            0.0,
            LIMIT_TOL,
            pass,
        )
    })
}

/// Lateral basis data of `A^{-1}`: block `B` on `Σ`, column `b` coupling to
/// `x_n` and the corner `a`.
struct PlaneMetric {
    m: usize,
    block: Vec<f64>,
    column: Vec<f64>,
    corner: f64,
}

impl PlaneMetric {
    fn new(corr: &Corrector) -> Self {
        let n = corr.dim();
        let m = n - 1;
        let inv = corr.kernel().coefficients().a_inverse();
        let mut block = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                block[i * m + j] = inv[i * n + j];
            }
        }
        let column = (0..m).map(|i| inv[i * n + m]).collect();
        Self { m, block, column, corner: inv[m * n + m] }
    }

    fn quad_form(&self, t: &[f64]) -> f64 {
        let m = self.m;
        (0..m).map(|i| t[i] * (0..m).map(|j| self.block[i * m + j] * t[j]).sum::<f64>()).sum()
    }

    /// Distance `t > 0` along `theta` at which the metric distance to the
    /// lifted center reaches `rho`.
    fn reach(&self, theta: &[f64], delta: f64, rho: f64) -> Option<f64> {
        let qa = self.quad_form(theta);
        let qb = -delta * dot(theta, &self.column);
        let qc = delta * delta * self.corner - rho * rho;
        let disc = qb * qb - qa * qc;
        if disc < 0.0 {
            return None;
        }
        let t = (-qb + disc.sqrt()) / qa;
        (t > 0.0).then_some(t)
    }
}

/// `Σ_k ∫_{Σ ∩ (B_ε \ B_{r_k})} (A∇ω)·ν v φ dS` with every center lifted
/// by `delta` along `e_n`; `delta = 0` is the actual flat-boundary term.
pub fn boundary_flux(
    corr: &Corrector,
    delta: f64,
    v: &VField,
    phi: &dyn ScalarField,
    quad: &Quadrature,
) -> Result<f64> {
    quad.validate()?;
    let n = corr.dim();
    let m = n - 1;
    let plane = PlaneMetric::new(corr);
    let dirs = DirectionRule::sphere(m, quad.polar, quad.azimuth);
    let eps = corr.epsilon();
    if let Some(r_min) = corr.layout().min_radius() {
        if !(delta >= 0.0 && delta * plane.corner.sqrt() < r_min) {
            return Err(Error::Layout(format!(
                "center lift {delta} must be nonnegative and below the patch radius {r_min} in the metric"
            )));
        }
    }
    let parts: Vec<f64> = (0..corr.layout().len())
        .into_par_iter()
        .map(|k| {
            let c = corr.layout().center(k);
            let r = corr.layout().radius(k);
            let mut x = [0.0; MAX_DIM];
            let mut flux = [0.0; MAX_DIM];
            let mut total = 0.0;
            for (theta, wt) in dirs.iter() {
                let Some(outer) = plane.reach(theta, delta, eps) else { continue };
                let inner = plane.reach(theta, delta, r).unwrap_or(0.0);
                if inner >= outer {
                    continue;
                }
                let rule = radial_rule(inner, outer, quad.radial);
                let mut line = 0.0;
                for (t, w) in rule {
                    for a in 0..m {
                        x[a] = c[a] + t * theta[a];
                    }
                    x[m] = 0.0;
                    let xs = &x[..n];
                    let (normal_flux, omega) = if delta == 0.0 {
                        corr.flux_into(xs, &mut flux[..n]);
                        (-flux[m], corr.eval(xs))
                    } else {
                        let mut lifted = [0.0; MAX_DIM];
                        lifted[..n].copy_from_slice(&c[..n]);
                        lifted[m] += delta;
                        let d = corr.kernel().metric_distance(xs, &lifted[..n]);
                        let s = corr.profile_slope(k, d) / d;
                        (-s * (x[m] - lifted[m]), corr.profile(k, d))
                    };
                    if normal_flux == 0.0 {
                        continue;
                    }
                    line += w * t.powi(m as i32 - 1) * normal_flux * v.value(xs, omega) * phi.value(xs);
                }
                total += wt * line;
            }
            total
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Flat-boundary flux, asserted to vanish for every ε.
pub fn check_boundary_flux_e2(setup: &LemmaSetup, v: &VField, phi: &TestFunctionSpec) -> Result<LemmaEntry> {
    let values = setup.per_eps(|e| boundary_flux(&setup.corrector(e)?, 0.0, v, phi, &setup.quad))?;
    let pass = values.iter().all(|x| x.abs() <= EXACT_TOL);
    let limit = richardson(&setup.eps, &values).limit;
    Ok(LemmaEntry::new(
        format!("boundary_flux_e2[v={},phi={}]", v.label(), phi.label),
        &setup.eps,
        values,
        limit,
        0.0,
        EXACT_TOL,
        pass,
    ))
}

/// Boundary flux at the smallest ε with the centers lifted off `Σ` by each
/// of `lifts`. Passes when every value is nonzero and the magnitudes shrink
/// with the lift.
pub fn check_lifted_boundary_flux(
    setup: &LemmaSetup,
    v: &VField,
    phi: &TestFunctionSpec,
    lifts: &[f64],
) -> Result<LemmaEntry> {
    let e = *setup.eps.last().ok_or_else(|| Error::Problem("empty ε sequence".into()))?;
    let corr = setup.corrector(e)?;
    let mut order: Vec<f64> = lifts.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let values = order
        .par_iter()
        .map(|&d| boundary_flux(&corr, d, v, phi, &setup.quad))
        .collect::<Result<Vec<_>>>()?;
    let pass = values.iter().all(|x| *x != 0.0) && values.windows(2).all(|w| w[1].abs() < w[0].abs());
    let eps = vec![e; values.len()];
    Ok(LemmaEntry {
        lifts: order,
        ..LemmaEntry::new(
            format!("boundary_flux_lift[v={},phi={}]", v.label(), phi.label),
            &eps,
            values,
            0.0,
            0.0,
            0.0,
            pass,
        )
    })
}

/// Largest relative mismatch between `(A∇ω)·ν` and `(A∇q)·ν` on the outer spheres.
pub fn flux_identity_mismatch(corr: &Corrector, aux: &AuxiliaryFunction) -> f64 {
    let n = corr.dim();
    let frame = corr.frame();
    let sphere = frame.half_sphere(4, 8);
    let eps = corr.epsilon();
    (0..corr.layout().len())
        .into_par_iter()
        .map(|k| {
            let c = corr.layout().center(k);
            let mut x = [0.0; MAX_DIM];
            let mut fw = [0.0; MAX_DIM];
            let mut fq = [0.0; MAX_DIM];
            let mut nu = [0.0; MAX_DIM];
            let mut worst = 0.0f64;
            for (u, gu, _) in sphere.iter() {
                for i in 0..n {
                    x[i] = c[i] + eps * gu[i];
                }
                corr.patch_flux_into(k, &x[..n], &mut fw[..n]);
                aux.patch_flux_into(k, &x[..n], &mut fq[..n]);
                frame.normal(u, &mut nu[..n]);
                let a = dot(&fw[..n], &nu[..n]);
                let b = dot(&fq[..n], &nu[..n]);
                worst = worst.max(relative_gap(a, b));
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Outer flux `Σ_k ∫_{∂B_ε ∩ D} (A∇ω)·ν v φ` against `-∫ φ v μ_ε`.
pub fn check_outer_flux_e3(setup: &LemmaSetup, v: &VField, phi: &TestFunctionSpec) -> Result<LemmaEntry> {
    let quad = setup.quad;
    let pairs: Vec<(f64, f64)> = setup
        .eps
        .par_iter()
        .map(|&e| {
            let corr = setup.corrector(e)?;
            let aux = setup.auxiliary(e)?;
            let mismatch = flux_identity_mismatch(&corr, &aux);
            if !(mismatch <= IDENTITY_TOL) {
                return Err(Error::UnmatchedSeries { mismatch });
            }
            let mu = setup.mu(e, SignMode::Verbatim)?;
            let sphere = corr.frame().half_sphere(quad.polar, quad.azimuth);
            let weight = |x: &[f64], omega: f64| v.value(x, omega) * phi.value(x);
            let lhs = sphere_flux(&corr, &sphere, |_| e, true, &weight);
            let f = |x: &[f64]| {
                let p = phi.value(x);
                if p == 0.0 {
                    0.0
                } else {
                    p * v.value(x, corr.eval(x))
                }
            };
            let rhs = -mu.weighted_pairing(&f, &quad)?;
            Ok((lhs, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let reference: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let gaps: Vec<f64> = pairs.iter().map(|(a, b)| relative_gap(*a, *b)).collect();
    let limit = richardson(&setup.eps, &values).limit;
    let target = richardson(&setup.eps, &reference).limit;
    let last = pairs.last().copied().unwrap_or((0.0, 0.0));
    let pass = if v.vanishes_on_patches() {
        let trivial = pairs.iter().all(|(a, b)| a.abs() <= EXACT_TOL && b.abs() <= EXACT_TOL);
        trivial
            || (gaps.last().is_some_and(|g| *g <= LIMIT_TOL) && gaps.windows(2).all(|w| w[1] < w[0]))
    } else {
        last.0 >= last.1 - LIMIT_TOL
    };
    Ok(LemmaEntry {
        reference,
        gaps,
        ..LemmaEntry::new(
            format!("outer_flux_e3[v={},phi={}]", v.label(), phi.label),
            &setup.eps,
            values,
            limit,
            target,
            LIMIT_TOL,
            pass,
        )
    })
}

/// `Σ_k ∫_{D ∩ B_ε} (A∇ω)·∇φ v`, expected to decay at least like `ε^0.7`.
pub fn check_volume_coupling(setup: &LemmaSetup, phi: &TestFunctionSpec, v: &VField) -> Result<LemmaEntry> {
    let quad = setup.quad;
    let values = setup.per_eps(|e| volume_coupling(&setup.corrector(e)?, phi, v, &quad))?;
    let slope = log_log_slope(&setup.eps, &values);
    let zero = values.iter().all(|x| *x == 0.0);
    let pass = zero || slope.is_some_and(|s| s >= COUPLING_SLOPE);
    let limit = richardson(&setup.eps, &values).limit;
    Ok(LemmaEntry {
        slope,
        ..LemmaEntry::new(
            format!("volume_coupling[v={},phi={}]", v.label(), phi.label),
            &setup.eps,
            values,
            limit,
            0.0,
            COUPLING_SLOPE,
            pass,
        )
    })
}

pub fn volume_coupling(corr: &Corrector, phi: &dyn ScalarField, v: &VField, quad: &Quadrature) -> Result<f64> {
    quad.validate()?;
    if phi.constant_value().is_some() {
        return Ok(0.0);
    }
    let n = corr.dim();
    let frame = corr.frame();
    let sphere = frame.half_sphere(quad.volume_polar, quad.volume_azimuth);
    let parts: Vec<f64> = (0..corr.layout().len())
        .into_par_iter()
        .map(|k| {
            let radial = radial_rule(corr.layout().radius(k), corr.epsilon(), quad.radial);
            let mut flux = [0.0; MAX_DIM];
            let mut grad = [0.0; MAX_DIM];
            frame.shell_integral(corr.layout().center(k), &radial, &sphere, |x, _, _| {
                corr.flux_into(x, &mut flux[..n]);
                phi.gradient(x, &mut grad[..n]);
                let g = dot(&flux[..n], &grad[..n]);
                if g == 0.0 {
                    0.0
                } else {
                    g * v.value(x, corr.eval(x))
                }
            })
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Test data for [`run_lemma_checks`].
#[derive(Debug, Clone)]
pub struct CheckPlan {
    pub phi: TestFunctionSpec,
    /// Weight of the volume coupling check.
    pub volume_phi: TestFunctionSpec,
    pub v_family: Vec<VField>,
}

impl CheckPlan {
    pub fn standard(dim: usize) -> Self {
        let xn = crate::field::Coordinate(dim - 1);
        Self {
            phi: TestFunctionSpec::cutoff_one(),
            volume_phi: TestFunctionSpec::new(
                Some(crate::field::Cutoff::default()),
                std::sync::Arc::new(xn),
                format!("cutoff*x{dim}"),
            ),
            v_family: vec![VField::Zero, VField::One, VField::OneMinusOmega],
        }
    }
}

/// Runs every check of the plan. Failures become entries with an error
/// message and a false pass flag.
pub fn run_lemma_checks(setup: &LemmaSetup, plan: &CheckPlan) -> LemmaCheckReport {
    let mut report = LemmaCheckReport::default();
    let mut push = |name: String, r: Result<LemmaEntry>| {
        report.push(r.unwrap_or_else(|e| LemmaEntry::failed(name, &setup.eps, e.to_string())));
    };
    let phi_label = plan.phi.label.clone();
    push(format!("le2[phi={phi_label}]"), check_le2(setup, &plan.phi));
    for v in &plan.v_family {
        let l = v.label();
        push(format!("inner_flux[v={l},phi={phi_label}]"), check_inner_flux(setup, v, &plan.phi));
        push(format!("boundary_flux_e2[v={l},phi={phi_label}]"), check_boundary_flux_e2(setup, v, &plan.phi));
        push(format!("outer_flux_e3[v={l},phi={phi_label}]"), check_outer_flux_e3(setup, v, &plan.phi));
    }
    for v in &plan.v_family {
        push(
            format!("volume_coupling[v={},phi={}]", v.label(), plan.volume_phi.label),
            check_volume_coupling(setup, &plan.volume_phi, v),
        );
    }
    report
}
