//! Constant coefficient matrix, induced metric and the truncated Green-kernel
//! expansion `Φ(x, y) = Σ_i C_i d^{(2-n)+(i-1)}`.
//!
//! The metric uses `A^{-1}` with `A = γ^T γ`, so that the leading term
//! `d^{2-n}` is annihilated by `∇·(A∇·)` away from the pole. The kernel is
//! left unnormalized; every consumer divides by differences of kernel values.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Metric, MAX_DIM};

/// Longest accepted expansion series.
pub const MAX_SERIES_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientMode {
    Identity,
    Constant,
}

/// Symmetric, uniformly elliptic constant matrix `γ` with `a I <= γ <= b I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    dim: usize,
    mode: CoefficientMode,
    gamma: Vec<f64>,
    gamma_inv: Vec<f64>,
    a: Vec<f64>,
    a_inv: Vec<f64>,
    det_gamma: f64,
    lower: f64,
    upper: f64,
}

fn mat_vec(m: &[f64], n: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

impl CoefficientField {
    pub fn identity(dim: usize) -> Self {
        let mut id = vec![0.0; dim * dim];
        for i in 0..dim {
            id[i * dim + i] = 1.0;
        }
        Self {
            dim,
            mode: CoefficientMode::Identity,
            gamma: id.clone(),
            gamma_inv: id.clone(),
            a: id.clone(),
            a_inv: id,
            det_gamma: 1.0,
            lower: 1.0,
            upper: 1.0,
        }
    }

    /// `gamma` is row-major `dim x dim`.
    pub fn constant(dim: usize, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != dim * dim {
            return Err(Error::Coefficient(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                gamma.len()
            )));
        }
        if gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Coefficient("non-finite entry".into()));
        }
        let scale = gamma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in 0..i {
                if (gamma[i * dim + j] - gamma[j * dim + i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::Coefficient(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let g = DMatrix::from_row_slice(dim, dim, &gamma);
        let eig = SymmetricEigen::new(g.clone());
        let lower = eig.eigenvalues.min();
        let upper = eig.eigenvalues.max();
        if lower <= 0.0 {
            return Err(Error::Coefficient(format!(
                "not uniformly elliptic: smallest eigenvalue {lower:.6e} is not positive"
            )));
        }
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Coefficient("matrix is singular".into()))?;
        let a = g.transpose() * &g;
        let a_inv = &g_inv * g_inv.transpose();
        let flat = |m: &DMatrix<f64>| -> Vec<f64> {
            let mut v = Vec::with_capacity(dim * dim);
            for i in 0..dim {
                for j in 0..dim {
                    v.push(m[(i, j)]);
                }
            }
            v
        };
        Ok(Self {
            dim,
            mode: CoefficientMode::Constant,
            gamma,
            gamma_inv: flat(&g_inv),
            a: flat(&a),
            a_inv: flat(&a_inv),
            det_gamma: eig.eigenvalues.iter().product(),
            lower,
            upper,
        })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut g = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            g[i * n + i] = *d;
        }
        Self::constant(n, g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> CoefficientMode {
        self.mode
    }

    pub fn is_identity(&self) -> bool {
        self.mode == CoefficientMode::Identity
    }

    /// Ellipticity bounds `(a, b)`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `A = γ^T γ`, row-major.
    pub fn a_matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn a_inverse(&self) -> &[f64] {
        &self.a_inv
    }

    pub fn det_gamma(&self) -> f64 {
        self.det_gamma
    }

    pub fn trace_a(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i * self.dim + i]).sum()
    }

    pub fn trace_a_inv(&self) -> f64 {
        (0..self.dim).map(|i| self.a_inv[i * self.dim + i]).sum()
    }

    pub fn apply_gamma(&self, v: &[f64], out: &mut [f64]) {
        mat_vec(&self.gamma, self.dim, v, out)
    }

    pub fn apply_gamma_inv(&self, v: &[f64], out: &mut [f64]) {
        mat_vec(&self.gamma_inv, self.dim, v, out)
    }

    pub fn apply_a(&self, v: &[f64], out: &mut [f64]) {
        mat_vec(&self.a, self.dim, v, out)
    }

    pub fn apply_a_inv(&self, v: &[f64], out: &mut [f64]) {
        mat_vec(&self.a_inv, self.dim, v, out)
    }

    /// `u^T A v`
    pub fn a_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut t = [0.0; MAX_DIM];
        self.apply_a(v, &mut t[..self.dim]);
        u.iter().zip(&t[..self.dim]).map(|(a, b)| a * b).sum()
    }

    /// The metric `d(x, y)^2 = (x - y)^T A^{-1} (x - y)`.
    pub fn metric(&self) -> Metric {
        Metric::from_tensor(self.dim, self.a_inv.clone(), self.upper)
    }
}

/// Truncated expansion of the Green kernel around its pole.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenKernel {
    coeff: CoefficientField,
    metric: Metric,
    value_series: Vec<f64>,
    gradient_series: Vec<f64>,
}

/// Gradient series obtained by differentiating the value series term by term:
/// `C'_i = ((2 - n) + (i - 1)) C_i`.
pub fn derived_gradient_series(dim: usize, value_series: &[f64]) -> Vec<f64> {
    value_series
        .iter()
        .enumerate()
        .map(|(i, c)| (2.0 - dim as f64 + i as f64) * c)
        .collect()
}

fn check_series(name: &str, s: &[f64]) -> Result<()> {
    if s.is_empty() || s.len() > MAX_SERIES_LEN {
        return Err(Error::Coefficient(format!(
            "{name} series must have between 1 and {MAX_SERIES_LEN} terms, got {}",
            s.len()
        )));
    }
    if s.iter().any(|c| !c.is_finite()) {
        return Err(Error::Coefficient(format!("{name} series has a non-finite term")));
    }
    Ok(())
}

impl GreenKernel {
    /// Leading-order kernel `d^{2-n}`.
    pub fn new(coeff: CoefficientField) -> Self {
        let n = coeff.dim();
        let metric = coeff.metric();
        Self {
            coeff,
            metric,
            value_series: vec![1.0],
            gradient_series: derived_gradient_series(n, &[1.0]),
        }
    }

    /// Kernel with explicit series. Without `gradient_series` the gradient
    /// series is the term-by-term derivative of `value_series`.
    pub fn with_series(
        coeff: CoefficientField,
        value_series: Vec<f64>,
        gradient_series: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_series("kernel value", &value_series)?;
        let gradient_series =
            gradient_series.unwrap_or_else(|| derived_gradient_series(coeff.dim(), &value_series));
        check_series("kernel gradient", &gradient_series)?;
        let metric = coeff.metric();
        Ok(Self { coeff, metric, value_series, gradient_series })
    }

    pub fn dim(&self) -> usize {
        self.coeff.dim()
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.coeff
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn value_series(&self) -> &[f64] {
        &self.value_series
    }

    pub fn gradient_series(&self) -> &[f64] {
        &self.gradient_series
    }

    /// Exponent of the first term, `2 - n`.
    fn lead(&self) -> i32 {
        2 - self.dim() as i32
    }

    pub fn metric_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.metric.distance(x, y)
    }

    /// Kernel as a function of the metric distance.
    pub fn profile(&self, d: f64) -> f64 {
        let lead = self.lead();
        self.value_series
            .iter()
            .enumerate()
            .map(|(i, c)| if *c == 0.0 { 0.0 } else { c * d.powi(lead + i as i32) })
            .sum()
    }

    /// Radial derivative of the kernel, `Σ_i C'_i d^{(1-n)+(i-1)}`.
    pub fn profile_slope(&self, d: f64) -> f64 {
        let lead = self.lead() - 1;
        self.gradient_series
            .iter()
            .enumerate()
            .map(|(i, c)| if *c == 0.0 { 0.0 } else { c * d.powi(lead + i as i32) })
            .sum()
    }

    pub fn green_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.metric_distance(x, y);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(self.profile(d))
    }

    /// Writes `profile_slope(d) * A^{-1}(x - y) / d` into `out`.
    pub fn green_gradient_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let mut diff = [0.0; MAX_DIM];
        for i in 0..n {
            diff[i] = x[i] - y[i];
        }
        let d = self.metric.norm_sq(&diff[..n]).max(0.0).sqrt();
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        self.coeff.apply_a_inv(&diff[..n], out);
        let s = self.profile_slope(d) / d;
        out[..n].iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    pub fn green_gradient(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.green_gradient_into(x, y, &mut out)?;
        Ok(out)
    }

    /// Central-difference value of `∇·(A ∇Φ(·, y))` at `x`.
    pub fn laplace_beltrami_residual(&self, x: &[f64], y: &[f64], step: f64) -> Result<f64> {
        let d = self.metric_distance(x, y);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        if !(step > 0.0 && step < d / 4.0) {
            return Err(Error::StepTooLarge { step, distance: d });
        }
        let n = self.dim();
        let a = self.coeff.a_matrix();
        let mut p = [0.0; MAX_DIM];
        p[..n].copy_from_slice(&x[..n]);
        let phi = |p: &[f64]| self.profile(self.metric.distance(p, y));
        let centre = phi(&p[..n]);
        let h2 = step * step;
        let mut total = 0.0;
        for i in 0..n {
            for j in i..n {
                let aij = a[i * n + j];
                if aij == 0.0 {
                    continue;
                }
                let second = if i == j {
                    p[i] = x[i] + step;
                    let fp = phi(&p[..n]);
                    p[i] = x[i] - step;
                    let fm = phi(&p[..n]);
                    p[i] = x[i];
                    (fp - 2.0 * centre + fm) / h2
                } else {
                    let mut corner = |si: f64, sj: f64| {
                        p[i] = x[i] + si * step;
                        p[j] = x[j] + sj * step;
                        let v = phi(&p[..n]);
                        p[i] = x[i];
                        p[j] = x[j];
                        v
                    };
                    (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                        / (4.0 * h2)
                };
                total += if i == j { aij * second } else { 2.0 * aij * second };
            }
        }
        Ok(total)
    }
}
