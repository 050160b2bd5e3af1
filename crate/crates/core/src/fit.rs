//! Log-log slopes and Richardson extrapolation with an observed order.

/// Least-squares slope of `ln y` against `ln x`. Uses absolute values, so
/// sequences of one sign are handled uniformly. `None` for fewer than two
/// points or any zero entry.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    if x.iter().chain(y).any(|v| *v == 0.0 || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.abs().ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Extrapolated limit of `values` as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub limit: f64,
    /// Observed order `p` in `value ≈ L + C eps^p`; `None` when the limit
    /// is simply the last value.
    pub order: Option<f64>,
}

/// Fits `L + C eps^p` through the last three points (observed `p`); with two
/// points assumes `p = 1`; with one point returns it. Non-monotone or
/// stagnant data fall back to the last value.
pub fn richardson(eps: &[f64], values: &[f64]) -> Extrapolation {
    assert_eq!(eps.len(), values.len());
    let m = values.len();
    let last = match values.last() {
        Some(v) => *v,
        None => return Extrapolation { limit: f64::NAN, order: None },
    };
    let plain = Extrapolation { limit: last, order: None };
    if m == 1 {
        return plain;
    }
    if m == 2 {
        return two_point(eps[0], eps[1], values[0], values[1], 1.0).unwrap_or(plain);
    }
    let (e1, e2, e3) = (eps[m - 3], eps[m - 2], eps[m - 1]);
    let (v1, v2, v3) = (values[m - 3], values[m - 2], values[m - 1]);
    let d12 = v1 - v2;
    let d23 = v2 - v3;
    if d12 == 0.0 || d23 == 0.0 || d12.signum() != d23.signum() {
        return plain;
    }
    let target = d12 / d23;
    // ratio(p) = (e1^p - e2^p) / (e2^p - e3^p) is increasing in p
    let ratio = |p: f64| (e1.powf(p) - e2.powf(p)) / (e2.powf(p) - e3.powf(p));
    let (mut lo, mut hi) = (1e-3, 12.0);
    if !(ratio(lo) <= target && target <= ratio(hi)) {
        return plain;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    two_point(e2, e3, v2, v3, 0.5 * (lo + hi)).unwrap_or(plain)
}

fn two_point(e1: f64, e2: f64, v1: f64, v2: f64, p: f64) -> Option<Extrapolation> {
    let denom = e1.powf(p) - e2.powf(p);
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    let c = (v1 - v2) / denom;
    Some(Extrapolation { limit: v2 - c * e2.powf(p), order: Some(p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [0.25, 0.125, 0.0625];
        let y: Vec<f64> = x.iter().map(|e: &f64| 7.0 * e.powi(3)).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 3.0).abs() < 1e-12);
        assert!(log_log_slope(&x[..1], &y[..1]).is_none());
    }

    #[test]
    fn richardson_recovers_limit() {
        let eps = [0.25, 0.125, 0.0625];
        let v: Vec<f64> = eps.iter().map(|e: &f64| 2.0 + 3.0 * e.powf(1.5)).collect();
        let ex = richardson(&eps, &v);
        assert!((ex.limit - 2.0).abs() < 1e-10);
        assert!((ex.order.unwrap() - 1.5).abs() < 1e-8);
        let ex = richardson(&eps[..2], &[3.0, 2.5]);
        assert!((ex.limit - 2.0).abs() < 1e-12);
        let ex = richardson(&eps, &[1.0, 2.0, 1.0]);
        assert_eq!(ex.limit, 1.0);
        assert!(ex.order.is_none());
    }
}
