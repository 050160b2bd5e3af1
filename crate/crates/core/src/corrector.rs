//! The oscillating test function `ω_ε`, the auxiliary paraboloid `q_ε`, the
//! density `μ_ε`, and per-patch quadrature for their integrals.
//!
//! Every patch integral is computed in the frame `x = x_k + γ y`, where the
//! metric distance becomes `|y|`, `dx = det γ dy` and `D ∩ B_ε` becomes a
//! half-ball whose pole is `γ e_n / |γ e_n|`. Radial integrands reduce to
//! one-dimensional Gauss rules; the rest use a product rule on the
//! hemisphere.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::fit::{richardson, Extrapolation};
use crate::geometry::{build_layout_with, DomainSpec, Metric, PatchLayout, RadiusBounds, TildeR, MAX_DIM};
use crate::kernel::{CoefficientField, GreenKernel, MAX_SERIES_LEN};
use crate::quadrature::{radial_rule, unit_sphere_area, DirectionRule, GaussLegendre};

/// Quadrature orders for patch integrals.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Quadrature {
    /// Gauss points per radial panel.
    pub radial: usize,
    /// Polar and azimuthal counts for surface integrals on spheres.
    pub polar: usize,
    pub azimuth: usize,
    /// Polar and azimuthal counts for non-radial volume integrals.
    pub volume_polar: usize,
    pub volume_azimuth: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { radial: 32, polar: 32, azimuth: 64, volume_polar: 8, volume_azimuth: 16 }
    }
}

impl Quadrature {
    pub fn with_radial(radial: usize) -> Self {
        Self { radial, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial < 3 {
            return Err(Error::Quadrature(format!("radial order {} is below 3", self.radial)));
        }
        if self.polar < 1 || self.volume_polar < 1 || self.azimuth < 3 || self.volume_azimuth < 3 {
            return Err(Error::Quadrature("angular orders must be at least 1 (polar) and 3 (azimuth)".into()));
        }
        Ok(())
    }
}

fn check_order(order: usize) -> Result<()> {
    Quadrature::with_radial(order).validate()
}

/// Sum of `series[i] * eps^i`.
pub fn series_at(series: &[f64], eps: f64) -> f64 {
    series.iter().rev().fold(0.0, |acc, c| acc * eps + c)
}

fn check_aux_series(series: &[f64]) -> Result<()> {
    if series.is_empty() || series.len() > MAX_SERIES_LEN || series.iter().any(|c| !c.is_finite()) {
        return Err(Error::Density(format!(
            "auxiliary series must have 1..={MAX_SERIES_LEN} finite terms"
        )));
    }
    Ok(())
}

/// Map `y -> γ y` from the unit frame to the box.
#[derive(Debug, Clone)]
pub struct PatchFrame {
    dim: usize,
    coeff: CoefficientField,
    pole: Vec<f64>,
}

/// Hemisphere directions with their images under `γ`.
#[derive(Debug, Clone)]
pub struct HalfSphere {
    dim: usize,
    dirs: Vec<f64>,
    images: Vec<f64>,
    weights: Vec<f64>,
}

impl HalfSphere {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(u, γ u, weight)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64], f64)> + '_ {
        self.dirs
            .chunks(self.dim)
            .zip(self.images.chunks(self.dim))
            .zip(self.weights.iter().copied())
            .map(|((u, g), w)| (u, g, w))
    }
}

impl PatchFrame {
    /// Requires `γ <= I` so that metric balls of radius `ε` around lattice
    /// centers stay pairwise disjoint.
    pub fn new(coeff: &CoefficientField) -> Result<Self> {
        let (_, upper) = coeff.bounds();
        if upper > 1.0 + 1e-12 {
            return Err(Error::Coefficient(format!(
                "largest eigenvalue of γ is {upper:.6}; patch balls need γ <= I to stay disjoint"
            )));
        }
        let n = coeff.dim();
        let mut en = vec![0.0; n];
        en[n - 1] = 1.0;
        let mut pole = vec![0.0; n];
        coeff.apply_gamma(&en, &mut pole);
        Ok(Self { dim: n, coeff: coeff.clone(), pole })
    }

    pub fn det(&self) -> f64 {
        self.coeff.det_gamma()
    }

    pub fn half_sphere(&self, polar: usize, azimuth: usize) -> HalfSphere {
        let rule = DirectionRule::hemisphere(&self.pole, polar, azimuth);
        let n = self.dim;
        let mut dirs = Vec::with_capacity(rule.len() * n);
        let mut images = vec![0.0; rule.len() * n];
        let mut weights = Vec::with_capacity(rule.len());
        for (j, (u, w)) in rule.iter().enumerate() {
            dirs.extend_from_slice(u);
            self.coeff.apply_gamma(u, &mut images[j * n..(j + 1) * n]);
            weights.push(w);
        }
        HalfSphere { dim: n, dirs, images, weights }
    }

    /// Surface element ratio `dS_x / dS_y` at direction `u`.
    pub fn surface_ratio(&self, u: &[f64]) -> f64 {
        let mut t = [0.0; MAX_DIM];
        self.coeff.apply_gamma_inv(u, &mut t[..self.dim]);
        self.det() * t[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Outward unit normal of the metric sphere at the image of `u`.
    pub fn normal(&self, u: &[f64], out: &mut [f64]) {
        self.coeff.apply_gamma_inv(u, out);
        let len = out[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        out[..self.dim].iter_mut().for_each(|v| *v /= len);
    }

    /// Measure of the unit half-ball in the box frame.
    pub fn half_ball_volume(&self, radius: f64) -> f64 {
        self.det() * 0.5 * unit_sphere_area(self.dim) * radius.powi(self.dim as i32) / self.dim as f64
    }

    /// `det γ ∫∫ f(x, ρ, u) ρ^{n-1} dρ dΩ` over the half-shell `[a, b]` of the
    /// patch centred at `center`.
    pub fn shell_integral(
        &self,
        center: &[f64],
        radial: &[(f64, f64)],
        sphere: &HalfSphere,
        mut f: impl FnMut(&[f64], f64, &[f64]) -> f64,
    ) -> f64 {
        let n = self.dim;
        let mut x = [0.0; MAX_DIM];
        let mut total = 0.0;
        for &(rho, wr) in radial {
            let mut shell = 0.0;
            for (u, gu, wu) in sphere.iter() {
                for i in 0..n {
                    x[i] = center[i] + rho * gu[i];
                }
                shell += wu * f(&x[..n], rho, u);
            }
            total += wr * rho.powi(n as i32 - 1) * shell;
        }
        self.det() * total
    }

    /// `∫ f(x, u) dS_y` over the half-sphere of radius `rho` (frame measure).
    pub fn sphere_integral(
        &self,
        center: &[f64],
        rho: f64,
        sphere: &HalfSphere,
        mut f: impl FnMut(&[f64], &[f64]) -> f64,
    ) -> f64 {
        let n = self.dim;
        let mut x = [0.0; MAX_DIM];
        let mut total = 0.0;
        for (u, gu, wu) in sphere.iter() {
            for i in 0..n {
                x[i] = center[i] + rho * gu[i];
            }
            total += wu * f(&x[..n], u);
        }
        total * rho.powi(n as i32 - 1)
    }
}

/// Ball of radius `radius(k)` containing `x`, if any, with the distance.
fn locate(layout: &PatchLayout, metric: &Metric, x: &[f64], radius: impl Fn(usize) -> f64, closed: bool) -> Option<(usize, f64)> {
    layout.candidates(x).find_map(|k| {
        let d = metric.distance(x, layout.center(k));
        let inside = if closed { d <= radius(k) } else { d < radius(k) };
        inside.then_some((k, d))
    })
}

fn sum_patches(count: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let parts: Vec<f64> = (0..count).into_par_iter().map(f).collect();
    parts.iter().sum()
}

/// Gradient value with a flag for evaluations on a branch sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaGradient {
    pub value: Vec<f64>,
    /// `d` equals `r_k` or `ε` to rounding; the annulus-side value is returned.
    pub on_branch: bool,
}

/// `ω_ε = Σ_k ω_{ε,k}`: one on `B_{r_k}`, the normalized kernel on the annulus,
/// zero outside `B_ε`.
#[derive(Debug, Clone)]
pub struct Corrector {
    layout: PatchLayout,
    kernel: GreenKernel,
    frame: PatchFrame,
    eps_term: f64,
    normalizers: Vec<f64>,
}

const BRANCH_TOL: f64 = 1e-12;

impl Corrector {
    pub fn new(layout: PatchLayout, kernel: GreenKernel) -> Result<Self> {
        let n = layout.dim();
        if kernel.dim() != n {
            return Err(Error::Density(format!(
                "kernel dimension {} differs from layout dimension {n}",
                kernel.dim()
            )));
        }
        let frame = PatchFrame::new(kernel.coefficients())?;
        let eps = layout.epsilon();
        let p = 2 - n as i32;
        let eps_term = eps.powi(p);
        let normalizers: Vec<f64> = layout.radii().iter().map(|r| r.powi(p) - eps_term).collect();
        if let Some(bad) = normalizers.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Density(format!("corrector normalizer {bad} is not positive")));
        }
        let layout = layout.with_metric(kernel.metric().clone());
        Ok(Self { layout, kernel, frame, eps_term, normalizers })
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn kernel(&self) -> &GreenKernel {
        &self.kernel
    }

    pub fn frame(&self) -> &PatchFrame {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.layout.epsilon()
    }

    pub fn normalizer(&self, k: usize) -> f64 {
        self.normalizers[k]
    }

    /// Patch whose closed ball `B_ε` contains `x`.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, f64)> {
        let eps = self.epsilon();
        locate(&self.layout, self.kernel.metric(), x, |_| eps, true)
    }

    /// `ω_{ε,k}` as a function of the metric distance.
    pub fn profile(&self, k: usize, d: f64) -> f64 {
        if d <= self.layout.radius(k) {
            1.0
        } else if d < self.epsilon() {
            (self.kernel.profile(d) - self.eps_term) / self.normalizers[k]
        } else {
            0.0
        }
    }

    /// Annulus-side radial derivative of `ω_{ε,k}`.
    pub fn profile_slope(&self, k: usize, d: f64) -> f64 {
        self.kernel.profile_slope(d) / self.normalizers[k]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.locate(x) {
            Some((k, d)) => self.profile(k, d),
            None => 0.0,
        }
    }

    /// Writes `∇ω_ε(x)` and returns whether `x` sits on a branch sphere.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|v| *v = 0.0);
        let Some((k, d)) = self.locate(x) else { return false };
        let r = self.layout.radius(k);
        let eps = self.epsilon();
        let on_branch = (d - r).abs() <= BRANCH_TOL * r || (d - eps).abs() <= BRANCH_TOL * eps;
        if on_branch || (d > r && d < eps) {
            self.kernel
                .green_gradient_into(x, self.layout.center(k), out)
                .expect("distance is positive on the annulus");
            let s = 1.0 / self.normalizers[k];
            out.iter_mut().for_each(|v| *v *= s);
        }
        on_branch
    }

    pub fn gradient(&self, x: &[f64]) -> OmegaGradient {
        let mut value = vec![0.0; self.dim()];
        let on_branch = self.gradient_into(x, &mut value);
        OmegaGradient { value, on_branch }
    }

    /// The flux field `A ∇ω_ε(x)`, written in closed form as
    /// `ω'(d) (x - x_k) / d` so that its normal component on a plane through
    /// the center is exactly zero.
    pub fn flux_into(&self, x: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|v| *v = 0.0);
        let Some((k, d)) = self.locate(x) else { return false };
        let r = self.layout.radius(k);
        let eps = self.epsilon();
        let on_branch = (d - r).abs() <= BRANCH_TOL * r || (d - eps).abs() <= BRANCH_TOL * eps;
        if on_branch || (d > r && d < eps) {
            let s = self.profile_slope(k, d) / d;
            let c = self.layout.center(k);
            for i in 0..self.dim() {
                out[i] = s * (x[i] - c[i]);
            }
        }
        on_branch
    }

    /// Annulus-side `A ∇ω_{ε,k}(x)` of patch `k`, whatever the distance of `x`.
    pub fn patch_flux_into(&self, k: usize, x: &[f64], out: &mut [f64]) {
        let c = self.layout.center(k);
        let d = self.kernel.metric_distance(x, c);
        let s = self.profile_slope(k, d) / d;
        for i in 0..self.dim() {
            out[i] = s * (x[i] - c[i]);
        }
    }

    fn half_area(&self) -> f64 {
        0.5 * unit_sphere_area(self.dim())
    }

    fn radial_integral(&self, k: usize, order: usize, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.dim() as i32;
        radial_rule(self.layout.radius(k), self.epsilon(), order)
            .iter()
            .map(|(rho, w)| w * f(*rho) * rho.powi(n - 1))
            .sum()
    }

    /// `∫_{D ∩ B_ε} |ω_{ε,k}|²` for one patch.
    pub fn omega_l2_patch(&self, k: usize, order: usize) -> Result<f64> {
        check_order(order)?;
        let n = self.dim() as i32;
        let r = self.layout.radius(k);
        let inner = r.powi(n) / n as f64;
        let outer = self.radial_integral(k, order, |rho| self.profile(k, rho).powi(2));
        Ok(self.frame.det() * self.half_area() * (inner + outer))
    }

    /// `∫_D |ω_ε|²`.
    pub fn omega_l2(&self, order: usize) -> Result<f64> {
        check_order(order)?;
        Ok(sum_patches(self.layout.len(), |k| self.omega_l2_patch(k, order).unwrap_or(f64::NAN)))
    }

    /// `∫_{D ∩ B_ε} |γ∇ω_{ε,k}|²` for one patch.
    pub fn omega_h1_patch(&self, k: usize, order: usize) -> Result<f64> {
        check_order(order)?;
        let v = self.radial_integral(k, order, |rho| self.profile_slope(k, rho).powi(2));
        Ok(self.frame.det() * self.half_area() * v)
    }

    /// `∫_D |γ∇ω_ε|²`.
    pub fn omega_h1_seminorm(&self, order: usize) -> Result<f64> {
        check_order(order)?;
        Ok(sum_patches(self.layout.len(), |k| self.omega_h1_patch(k, order).unwrap_or(f64::NAN)))
    }

    /// `∫_{D ∩ B_ε} |γ∇ω_{ε,k}|` for one patch.
    pub fn omega_gradient_l1_patch(&self, k: usize, order: usize) -> Result<f64> {
        check_order(order)?;
        let v = self.radial_integral(k, order, |rho| self.profile_slope(k, rho).abs());
        Ok(self.frame.det() * self.half_area() * v)
    }

    /// `∫_D |γ∇ω_ε|`.
    pub fn omega_gradient_l1(&self, order: usize) -> Result<f64> {
        check_order(order)?;
        Ok(sum_patches(self.layout.len(), |k| {
            self.omega_gradient_l1_patch(k, order).unwrap_or(f64::NAN)
        }))
    }

    /// `∫_D |γ∇ω_ε|² φ` with `φ` sampled at the quadrature points.
    pub fn weighted_energy(&self, phi: &dyn ScalarField, quad: &Quadrature) -> Result<f64> {
        quad.validate()?;
        if let Some(c) = phi.constant_value() {
            return Ok(c * self.omega_h1_seminorm(quad.radial)?);
        }
        let sphere = self.frame.half_sphere(quad.volume_polar, quad.volume_azimuth);
        Ok(sum_patches(self.layout.len(), |k| {
            let radial = radial_rule(self.layout.radius(k), self.epsilon(), quad.radial);
            self.frame.shell_integral(self.layout.center(k), &radial, &sphere, |x, rho, _| {
                self.profile_slope(k, rho).powi(2) * phi.value(x)
            })
        }))
    }
}

/// `q_ε = κ_k (d² - ε²) / 2` inside `B_ε(x_k)`, zero outside, with
/// `κ_k = (Σ C̃_i ε^{i-1}) / (ε (r̃_k^{2-n} - ε))`.
#[derive(Debug, Clone)]
pub struct AuxiliaryFunction {
    layout: PatchLayout,
    coeff: CoefficientField,
    metric: Metric,
    frame: PatchFrame,
    series: Vec<f64>,
    kappa: Vec<f64>,
}

impl AuxiliaryFunction {
    pub fn new(layout: PatchLayout, coeff: CoefficientField, series: Vec<f64>) -> Result<Self> {
        check_aux_series(&series)?;
        let frame = PatchFrame::new(&coeff)?;
        let n = layout.dim() as i32;
        let eps = layout.epsilon();
        let s = series_at(&series, eps);
        let kappa = layout
            .tilde_radii()
            .iter()
            .map(|t| {
                let denom = eps * (t.powi(2 - n) - eps);
                if denom == 0.0 {
                    Err(Error::Density("auxiliary scale has a zero denominator".into()))
                } else {
                    Ok(s / denom)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let metric = coeff.metric();
        Ok(Self { layout, coeff, metric, frame, series, kappa })
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn kappa(&self, k: usize) -> f64 {
        self.kappa[k]
    }

    fn locate(&self, x: &[f64]) -> Option<(usize, f64)> {
        let eps = self.layout.epsilon();
        locate(&self.layout, &self.metric, x, |_| eps, true)
    }

    pub fn eval_q(&self, x: &[f64]) -> f64 {
        let eps = self.layout.epsilon();
        match self.locate(x) {
            Some((k, d)) => 0.5 * self.kappa[k] * (d * d - eps * eps),
            None => 0.0,
        }
    }

    /// `∇q_ε = κ_k A^{-1} (x - x_k)` inside the ball.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some((k, _)) = self.locate(x) {
            let n = self.layout.dim();
            let c = self.layout.center(k);
            let mut diff = [0.0; MAX_DIM];
            for i in 0..n {
                diff[i] = x[i] - c[i];
            }
            self.coeff.apply_a_inv(&diff[..n], out);
            out.iter_mut().for_each(|v| *v *= self.kappa[k]);
        }
    }

    /// `A ∇q_ε = κ_k (x - x_k)` inside the ball.
    pub fn flux_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some((k, _)) = self.locate(x) {
            let c = self.layout.center(k);
            for i in 0..self.layout.dim() {
                out[i] = self.kappa[k] * (x[i] - c[i]);
            }
        }
    }

    /// `A ∇q_{ε,k}(x) = κ_k (x - x_k)` of patch `k`, without the ball test.
    pub fn patch_flux_into(&self, k: usize, x: &[f64], out: &mut [f64]) {
        let c = self.layout.center(k);
        for i in 0..self.layout.dim() {
            out[i] = self.kappa[k] * (x[i] - c[i]);
        }
    }

    /// `∫_{D ∩ B_ε} |∇q_ε|²` for one patch. The angular mean of
    /// `|γ^{-1} u|²` over the half-sphere is `tr(A^{-1}) / n`.
    pub fn q_gradient_l2_patch(&self, k: usize, order: usize) -> Result<f64> {
        check_order(order)?;
        let n = self.layout.dim();
        let eps = self.layout.epsilon();
        let radial = GaussLegendre::new(order).integrate(0.0, eps, |rho| rho.powi(n as i32 + 1));
        let angular = 0.5 * unit_sphere_area(n) * self.coeff.trace_a_inv() / n as f64;
        Ok(self.frame.det() * self.kappa[k].powi(2) * angular * radial)
    }

    pub fn q_gradient_l2(&self, order: usize) -> Result<f64> {
        check_order(order)?;
        Ok(sum_patches(self.layout.len(), |k| self.q_gradient_l2_patch(k, order).unwrap_or(f64::NAN)))
    }
}

/// Sign convention for `μ_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    /// The defining formula with its own sign.
    Verbatim,
    /// The absolute value of the verbatim coefficient.
    Positive,
}

/// `μ_ε = Σ_k c_k χ_{B_ε(x_k)}` with
/// `c_k = (Σ C̃_i ε^{i-1}) r̃_k^{n-2} / (ε r̃_k^{n-2} - 1) · tr(A) / ε`.
#[derive(Debug, Clone)]
pub struct MuDensity {
    layout: PatchLayout,
    metric: Metric,
    frame: PatchFrame,
    series: Vec<f64>,
    mode: SignMode,
    coefficients: Vec<f64>,
}

impl MuDensity {
    pub fn new(layout: PatchLayout, coeff: &CoefficientField, series: Vec<f64>, mode: SignMode) -> Result<Self> {
        check_aux_series(&series)?;
        let frame = PatchFrame::new(coeff)?;
        let n = layout.dim() as i32;
        let eps = layout.epsilon();
        let s = series_at(&series, eps);
        let trace = coeff.trace_a();
        let coefficients = layout
            .tilde_radii()
            .iter()
            .map(|t| {
                let tp = t.powi(n - 2);
                let denom = eps * tp - 1.0;
                if denom.abs() <= 1e-14 {
                    return Err(Error::Density(format!(
                        "degenerate denominator: ε·r̃^(n-2) = 1 at ε = {eps}, r̃ = {t}"
                    )));
                }
                let c = s * tp / denom * trace / eps;
                Ok(match mode {
                    SignMode::Verbatim => c,
                    SignMode::Positive => c.abs(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let metric = coeff.metric();
        Ok(Self { layout, metric, frame, series, mode, coefficients })
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn mode(&self) -> SignMode {
        self.mode
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        self.coefficients[k]
    }

    /// Value at `x`; the balls are open, so at most one patch contributes.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let eps = self.layout.epsilon();
        match locate(&self.layout, &self.metric, x, |_| eps, false) {
            Some((k, _)) => self.coefficients[k],
            None => 0.0,
        }
    }

    /// `∫_{D ∩ B_ε(x_k)} μ_ε f` with the radial range split at `r_k`.
    pub fn weighted_pairing_patch(
        &self,
        k: usize,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
        quad: &Quadrature,
        sphere: &HalfSphere,
    ) -> f64 {
        let r = self.layout.radius(k);
        let eps = self.layout.epsilon();
        let mut radial: Vec<(f64, f64)> = GaussLegendre::new(quad.radial).mapped(0.0, r).collect();
        radial.extend(radial_rule(r, eps, quad.radial));
        self.coefficients[k] * self.frame.shell_integral(self.layout.center(k), &radial, sphere, |x, _, _| f(x))
    }

    /// `∫_D μ_ε f` for a pointwise weight `f`.
    pub fn weighted_pairing(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync), quad: &Quadrature) -> Result<f64> {
        quad.validate()?;
        let sphere = self.frame.half_sphere(quad.volume_polar, quad.volume_azimuth);
        Ok(sum_patches(self.layout.len(), |k| self.weighted_pairing_patch(k, f, quad, &sphere)))
    }

    /// `∫_D μ_ε ζ`.
    pub fn mu_weak_pairing(&self, zeta: &dyn ScalarField, quad: &Quadrature) -> Result<f64> {
        quad.validate()?;
        if let Some(c) = zeta.constant_value() {
            let eps = self.layout.epsilon();
            let vol = self.frame.half_ball_volume(eps);
            return Ok(c * vol * self.coefficients.iter().sum::<f64>());
        }
        self.weighted_pairing(&|x| zeta.value(x), quad)
    }
}

/// Pairings with `ζ ≡ 1` per unit area of `Σ` along an ε sequence and their
/// extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityLimit {
    pub eps: Vec<f64>,
    pub densities: Vec<f64>,
    pub extrapolation: Extrapolation,
}

impl DensityLimit {
    pub fn limit(&self) -> f64 {
        self.extrapolation.limit
    }
}

/// Inputs that define `μ_ε` for every ε of a sequence.
#[derive(Debug, Clone)]
pub struct DensitySetup<'a> {
    pub domain: &'a DomainSpec,
    pub tilde_r: &'a TildeR,
    pub bounds: RadiusBounds,
    pub coeff: &'a CoefficientField,
    pub series: &'a [f64],
    pub mode: SignMode,
}

/// Richardson-extrapolated `lim ∫ μ_ε / |Σ|` over `eps`.
pub fn limit_density(setup: &DensitySetup<'_>, eps: &[f64], quad: &Quadrature) -> Result<DensityLimit> {
    if setup.tilde_r.uniform_value().is_none() {
        return Err(Error::Density(
            "the limit density is only defined for a uniform reduced radius".into(),
        ));
    }
    if eps.is_empty() {
        return Err(Error::Density("empty ε sequence".into()));
    }
    let densities = eps
        .iter()
        .map(|&e| {
            let layout = build_layout_with(setup.domain, e, setup.tilde_r.clone(), setup.bounds)?;
            let mu = MuDensity::new(layout, setup.coeff, setup.series.to_vec(), setup.mode)?;
            Ok(mu.mu_weak_pairing(&1.0, quad)? / setup.domain.sigma_area())
        })
        .collect::<Result<Vec<_>>>()?;
    let extrapolation = richardson(eps, &densities);
    Ok(DensityLimit { eps: eps.to_vec(), densities, extrapolation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_layout;
    use std::f64::consts::PI;

    fn corrector(eps: f64) -> Corrector {
        let spec = DomainSpec::unit(3).unwrap();
        let layout = build_layout(&spec, eps, 1.0).unwrap();
        Corrector::new(layout, GreenKernel::new(CoefficientField::identity(3))).unwrap()
    }

    #[test]
    fn omega_branches() {
        let c = corrector(0.1);
        let r = c.layout().radius(0);
        assert_eq!(c.profile(0, r), 1.0);
        assert_eq!(c.profile(0, 0.1), 0.0);
        // r = 0.01, d = 0.02
        assert!((c.profile(0, 0.02) - 4.0 / 9.0).abs() < 1e-13);
        let x = [0.1 + 0.02, 0.1, 0.0];
        let g = c.gradient(&x);
        assert!(!g.on_branch);
        assert!((g.value[0] + 2500.0 / 90.0).abs() < 1e-10, "{:?}", g.value);
        let g = c.gradient(&[0.1 + r, 0.1, 0.0]);
        assert!(g.on_branch);
        assert!(c.gradient(&[0.1, 0.1, 0.001]).value.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn patch_integrals_match_closed_forms() {
        let c = corrector(0.1);
        let (r, eps) = (0.01, 0.1);
        let norm = 1.0 / r - 1.0 / eps;
        let h1 = c.omega_h1_patch(0, 32).unwrap();
        assert!((h1 - 2.0 * PI / norm).abs() < 1e-14);
        let l1 = c.omega_gradient_l1_patch(0, 32).unwrap();
        assert!((l1 - 2.0 * PI * (eps - r) / norm).abs() < 1e-14);
        let l2 = c.omega_l2_patch(0, 32).unwrap();
        let exact = 2.0 * PI / (norm * norm) * (eps / 3.0) * (1.0 - r / eps).powi(3) + 2.0 * PI / 3.0 * r.powi(3);
        assert!((l2 - exact).abs() < 1e-17, "{l2} vs {exact}");
    }

    #[test]
    fn q_and_mu_examples() {
        let spec = DomainSpec::unit(3).unwrap();
        let layout = build_layout(&spec, 0.1, 1.0).unwrap();
        let aux = AuxiliaryFunction::new(layout.clone(), CoefficientField::identity(3), vec![1.0]).unwrap();
        assert!((aux.eval_q(&[0.1, 0.1, 0.0]) + 0.1 / 1.8).abs() < 1e-15);
        assert_eq!(aux.eval_q(&[0.1, 0.1, 0.1]), 0.0);
        let per = aux.q_gradient_l2_patch(0, 32).unwrap();
        let kappa: f64 = 1.0 / (0.1 * 0.9);
        assert!((per - kappa * kappa * 2.0 * PI * 1e-5 / 5.0).abs() < 1e-15);

        let id = CoefficientField::identity(3);
        let mu = MuDensity::new(layout.clone(), &id, vec![1.0], SignMode::Verbatim).unwrap();
        assert!((mu.eval(&[0.1, 0.1, 0.05]) + 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(mu.eval(&[0.2, 0.2, 0.0]), 0.0);
        let mu = MuDensity::new(layout, &id, vec![1.0], SignMode::Positive).unwrap();
        assert!((mu.eval(&[0.1, 0.1, 0.05]) - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_wide_gamma() {
        let spec = DomainSpec::unit(3).unwrap();
        let layout = build_layout(&spec, 0.25, 1.0).unwrap();
        let k = GreenKernel::new(CoefficientField::diagonal(&[2.0, 1.0, 1.0]).unwrap());
        assert!(Corrector::new(layout, k).is_err());
    }

    #[test]
    fn pairing_quadrature_matches_volume() {
        let spec = DomainSpec::unit(3).unwrap();
        let layout = build_layout(&spec, 0.125, 1.0).unwrap();
        let id = CoefficientField::identity(3);
        let mu = MuDensity::new(layout, &id, vec![1.0], SignMode::Verbatim).unwrap();
        let q = Quadrature::default();
        let exact = mu.mu_weak_pairing(&1.0, &q).unwrap();
        let quad = mu.weighted_pairing(&|_| 1.0, &q).unwrap();
        assert!(((quad - exact) / exact).abs() < 1e-12);
    }
}
