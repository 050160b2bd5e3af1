//! Scalar fields on the box: constants, coordinates, closures, a smooth
//! cutoff in `x_n` and products of these.

use std::sync::Arc;

use crate::geometry::MAX_DIM;

/// Smooth scalar field with a gradient.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Central-difference gradient unless overridden.
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut p = [0.0; MAX_DIM];
        p[..n].copy_from_slice(x);
        for i in 0..n {
            let h = 1e-6 * (1.0 + x[i].abs());
            p[i] = x[i] + h;
            let fp = self.value(&p[..n]);
            p[i] = x[i] - h;
            let fm = self.value(&p[..n]);
            p[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    /// The value when the field is known to be constant.
    fn constant_value(&self) -> Option<f64> {
        None
    }
}

impl ScalarField for f64 {
    fn value(&self, _x: &[f64]) -> f64 {
        *self
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn constant_value(&self) -> Option<f64> {
        Some(*self)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn constant_value(&self) -> Option<f64> {
        (**self).constant_value()
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Box<T> {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn constant_value(&self) -> Option<f64> {
        (**self).constant_value()
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Arc<T> {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn constant_value(&self) -> Option<f64> {
        (**self).constant_value()
    }
}

/// The coordinate function `x_i`.
#[derive(Debug, Clone, Copy)]
pub struct Coordinate(pub usize);

impl ScalarField for Coordinate {
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0]
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().enumerate().for_each(|(i, v)| *v = if i == self.0 { 1.0 } else { 0.0 });
    }
}

/// Closure-backed field with a finite-difference gradient.
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// `C^∞` cutoff in the last coordinate: `1` for `x_n <= lower`, `0` for
/// `x_n >= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { lower: 0.25, upper: 0.75 }
    }
}

fn bump(s: f64) -> f64 {
    if s > 0.0 { (-1.0 / s).exp() } else { 0.0 }
}

fn bump_slope(s: f64) -> f64 {
    if s > 0.0 { (-1.0 / s).exp() / (s * s) } else { 0.0 }
}

impl Cutoff {
    pub fn new(lower: f64, upper: f64) -> Self {
        assert!(lower < upper, "cutoff needs lower < upper");
        Self { lower, upper }
    }

    pub fn profile(&self, t: f64) -> f64 {
        let s = (t - self.lower) / (self.upper - self.lower);
        let a = bump(1.0 - s);
        let b = bump(s);
        a / (a + b)
    }

    pub fn profile_slope(&self, t: f64) -> f64 {
        let w = self.upper - self.lower;
        let s = (t - self.lower) / w;
        let a = bump(1.0 - s);
        let b = bump(s);
        let da = -bump_slope(1.0 - s);
        let db = bump_slope(s);
        let sum = a + b;
        (da * sum - a * (da + db)) / (sum * sum) / w
    }
}

impl ScalarField for Cutoff {
    fn value(&self, x: &[f64]) -> f64 {
        self.profile(x[x.len() - 1])
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        out[n - 1] = self.profile_slope(x[n - 1]);
    }
}

/// Pointwise product of two fields.
pub struct Product<A, B>(pub A, pub B);

impl<A: ScalarField, B: ScalarField> ScalarField for Product<A, B> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) * self.1.value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut ga = [0.0; MAX_DIM];
        let mut gb = [0.0; MAX_DIM];
        self.0.gradient(x, &mut ga[..n]);
        self.1.gradient(x, &mut gb[..n]);
        let a = self.0.value(x);
        let b = self.1.value(x);
        for i in 0..n {
            out[i] = ga[i] * b + a * gb[i];
        }
    }
    fn constant_value(&self) -> Option<f64> {
        Some(self.0.constant_value()? * self.1.constant_value()?)
    }
}

/// Shared, type-erased field.
pub type SharedField = Arc<dyn ScalarField>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        let c = Cutoff::default();
        assert_eq!(c.profile(0.0), 1.0);
        assert_eq!(c.profile(0.25), 1.0);
        assert_eq!(c.profile(0.75), 0.0);
        assert!((c.profile(0.5) - 0.5).abs() < 1e-15);
        for t in [0.3, 0.5, 0.7] {
            let h = 1e-6;
            let fd = (c.profile(t + h) - c.profile(t - h)) / (2.0 * h);
            assert!((fd - c.profile_slope(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn product_gradient() {
        let f = Product(Cutoff::default(), Coordinate(0));
        let x = [0.3, 0.1, 0.4];
        let mut g = [0.0; 3];
        f.gradient(&x, &mut g);
        let fd = FnField(|x: &[f64]| Cutoff::default().value(x) * x[0]);
        let mut h = [0.0; 3];
        fd.gradient(&x, &mut h);
        for i in 0..3 {
            assert!((g[i] - h[i]).abs() < 1e-7);
        }
        assert_eq!(Product(2.0, 3.0).constant_value(), Some(6.0));
    }
}
