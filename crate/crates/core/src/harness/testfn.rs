//! Test data for the limit checks: the weight `φ_test` and the fields `v`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Cutoff, ScalarField, SharedField};
use crate::geometry::{DomainSpec, MAX_DIM};
use crate::quadrature::GaussLegendre;

/// `φ_test(x) = cutoff(x_n) · factor(x)`, required to vanish on Γ.
#[derive(Clone)]
pub struct TestFunctionSpec {
    pub cutoff: Option<Cutoff>,
    pub factor: SharedField,
    pub label: String,
}

impl fmt::Debug for TestFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunctionSpec").field("cutoff", &self.cutoff).field("label", &self.label).finish()
    }
}

impl TestFunctionSpec {
    pub fn new(cutoff: Option<Cutoff>, factor: SharedField, label: impl Into<String>) -> Self {
        Self { cutoff, factor, label: label.into() }
    }

    /// The default cutoff times one.
    pub fn cutoff_one() -> Self {
        Self::new(Some(Cutoff::default()), Arc::new(1.0), "cutoff")
    }

    pub fn zero() -> Self {
        Self::new(None, Arc::new(0.0), "0")
    }

    /// Checks that `φ_test` vanishes on a grid of points on every Γ face.
    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        let n = domain.dim();
        let ext = domain.extents();
        let per_axis = 9usize;
        let tol = 1e-12;
        let mut x = [0.0; MAX_DIM];
        for face_axis in 0..n {
            for side in [0.0, 1.0] {
                let probe_mid = {
                    let mut p = [0.0; MAX_DIM];
                    for a in 0..n {
                        p[a] = 0.5 * ext[a];
                    }
                    p[face_axis] = side * ext[face_axis];
                    p
                };
                if !domain.on_gamma(&probe_mid[..n], 1e-12) {
                    continue;
                }
                let count = per_axis.pow(n as u32 - 1);
                for j in 0..count {
                    let mut rem = j;
                    for a in 0..n {
                        if a == face_axis {
                            x[a] = side * ext[a];
                        } else {
                            x[a] = ext[a] * (rem % per_axis) as f64 / (per_axis - 1) as f64;
                            rem /= per_axis;
                        }
                    }
                    let v = self.value(&x[..n]);
                    if !v.is_finite() || v.abs() > tol {
                        return Err(Error::Problem(format!(
                            "test function `{}` is {v} at the Dirichlet point {:?}; it must vanish on Γ",
                            self.label,
                            &x[..n]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl ScalarField for TestFunctionSpec {
    fn value(&self, x: &[f64]) -> f64 {
        let c = self.cutoff.map_or(1.0, |c| c.profile(x[x.len() - 1]));
        if c == 0.0 {
            return 0.0;
        }
        c * self.factor.value(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        self.factor.gradient(x, out);
        let (c, dc) = match self.cutoff {
            Some(cut) => (cut.profile(x[n - 1]), cut.profile_slope(x[n - 1])),
            None => (1.0, 0.0),
        };
        out.iter_mut().for_each(|g| *g *= c);
        if dc != 0.0 {
            out[n - 1] += dc * self.factor.value(x);
        }
    }

    fn constant_value(&self) -> Option<f64> {
        let f = self.factor.constant_value()?;
        (f == 0.0 || self.cutoff.is_none()).then_some(f)
    }
}

/// Multiplier field `v` in the flux and coupling terms.
#[derive(Clone)]
pub enum VField {
    Zero,
    One,
    /// `1 - ω_ε`, which vanishes on the patches.
    OneMinusOmega,
    Field { field: SharedField, label: String },
}

impl fmt::Debug for VField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl VField {
    /// Value at `x` given `ω_ε(x)`.
    pub fn value(&self, x: &[f64], omega: f64) -> f64 {
        match self {
            VField::Zero => 0.0,
            VField::One => 1.0,
            VField::OneMinusOmega => 1.0 - omega,
            VField::Field { field, .. } => field.value(x),
        }
    }

    pub fn label(&self) -> String {
        match self {
            VField::Zero => "0".into(),
            VField::One => "1".into(),
            VField::OneMinusOmega => "1-omega".into(),
            VField::Field { label, .. } => label.clone(),
        }
    }

    /// Whether `v` is zero on every patch, which turns the outer-flux
    /// inequality into an equality.
    pub fn vanishes_on_patches(&self) -> bool {
        matches!(self, VField::Zero | VField::OneMinusOmega)
    }

    /// Checks `sup |v| <= bound` on a sample grid (exact for the built-in fields).
    pub fn validate(&self, domain: &DomainSpec, bound: f64) -> Result<()> {
        let VField::Field { field, label } = self else {
            return Ok(());
        };
        let n = domain.dim();
        let per_axis = 9usize;
        let mut x = [0.0; MAX_DIM];
        for j in 0..per_axis.pow(n as u32) {
            let mut rem = j;
            for a in 0..n {
                x[a] = domain.extents()[a] * (rem % per_axis) as f64 / (per_axis - 1) as f64;
                rem /= per_axis;
            }
            let v = field.value(&x[..n]);
            if !(v.abs() <= bound) {
                return Err(Error::Problem(format!(
                    "field `{label}` takes the value {v} at {:?}, above the bound {bound}",
                    &x[..n]
                )));
            }
        }
        Ok(())
    }
}

/// `∫_Σ f dS` by composite Gauss rules on the bottom face.
pub fn sigma_integral(domain: &DomainSpec, f: &dyn ScalarField, panels: usize, order: usize) -> f64 {
    let n = domain.dim();
    let m = n - 1;
    let rules: Vec<Vec<(f64, f64)>> = domain.extents()[..m]
        .iter()
        .map(|&l| {
            let gl = GaussLegendre::new(order);
            (0..panels)
                .flat_map(|p| {
                    let a = l * p as f64 / panels as f64;
                    let b = l * (p + 1) as f64 / panels as f64;
                    gl.mapped(a, b).collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    let per = panels * order;
    let count = per.pow(m as u32);
    let mut x = [0.0; MAX_DIM];
    let mut total = 0.0;
    for j in 0..count {
        let mut rem = j;
        let mut w = 1.0;
        for a in 0..m {
            let (xa, wa) = rules[a][rem % per];
            rem /= per;
            x[a] = xa;
            w *= wa;
        }
        x[m] = 0.0;
        total += w * f.value(&x[..n]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Coordinate;

    #[test]
    fn validation_follows_the_boundary_mode() {
        let slab = DomainSpec::unit_slab(3).unwrap();
        let closed = DomainSpec::unit(3).unwrap();
        let phi = TestFunctionSpec::cutoff_one();
        assert!(phi.validate(&slab).is_ok());
        assert!(phi.validate(&closed).is_err());
        assert!(TestFunctionSpec::zero().validate(&closed).is_ok());
    }

    #[test]
    fn sigma_integral_of_linear_weight() {
        let slab = DomainSpec::unit_slab(3).unwrap();
        let phi = TestFunctionSpec::new(Some(Cutoff::default()), Arc::new(Coordinate(0)), "cutoff*x1");
        assert!((sigma_integral(&slab, &phi, 4, 3) - 0.5).abs() < 1e-14);
        assert!((sigma_integral(&slab, &1.0, 2, 2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_gradient() {
        let phi = TestFunctionSpec::new(Some(Cutoff::default()), Arc::new(Coordinate(2)), "cutoff*x3");
        let x = [0.2, 0.3, 0.5];
        let mut g = [0.0; 3];
        phi.gradient(&x, &mut g);
        let c = Cutoff::default();
        assert!((g[2] - (c.profile(0.5) + 0.5 * c.profile_slope(0.5))).abs() < 1e-14);
        assert_eq!(g[0], 0.0);
    }
}
