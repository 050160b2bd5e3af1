//! Gauss–Legendre rules, graded radial panels and product rules on spheres
//! and hemispheres in any dimension.

use std::f64::consts::PI;

use crate::geometry::MAX_DIM;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss–Legendre order must be positive");
        let m = order;
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            // Newton iteration on P_m from the Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if m == 1 { x } else { p1 };
                let pm1 = if m == 1 { 1.0 } else { p0 };
                dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if m == 1 {
                dp = 1.0;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Composite rule on `[a, b]` with geometrically graded panels whose end
/// ratio never exceeds two, so integrands behaving like powers of the radius
/// are resolved uniformly. With `a == 0` a single panel is used.
pub fn radial_rule(a: f64, b: f64, order: usize) -> Vec<(f64, f64)> {
    assert!(b >= a && a >= 0.0);
    if b == a {
        return Vec::new();
    }
    let gl = GaussLegendre::new(order);
    if a == 0.0 {
        return gl.mapped(a, b).collect();
    }
    let panels = ((b / a).log2().ceil() as usize).max(1);
    let ratio = (b / a).powf(1.0 / panels as f64);
    let mut out = Vec::with_capacity(panels * order);
    let mut lo = a;
    for p in 0..panels {
        let hi = if p + 1 == panels { b } else { lo * ratio };
        out.extend(gl.mapped(lo, hi));
        lo = hi;
    }
    out
}

/// Surface measure of the unit sphere `S^{dim-1}` in `R^dim`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    // 2 π^{d/2} / Γ(d/2), with Γ at half-integers from the recurrence
    let half = dim as f64 / 2.0;
    let gamma_half = if dim.is_multiple_of(2) {
        (1..dim / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < half - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * PI.powf(half) / gamma_half
}

/// Volume of the unit ball in `R^dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    unit_sphere_area(dim) / dim as f64
}

/// Orthonormal frame whose first vector is `pole / |pole|`.
pub fn frame_with_pole(pole: &[f64]) -> Vec<f64> {
    let n = pole.len();
    let norm = pole.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm > 0.0);
    let mut basis: Vec<f64> = pole.iter().map(|v| v / norm).collect();
    let mut candidates: Vec<usize> = (0..n).collect();
    // try the coordinate axes least aligned with the pole first
    candidates.sort_by(|&i, &j| basis[i].abs().total_cmp(&basis[j].abs()));
    for axis in candidates {
        if basis.len() == n * n {
            break;
        }
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        for b in basis.chunks(n) {
            let dot: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 {
            basis.extend(v.iter().map(|x| x / len));
        }
    }
    assert_eq!(basis.len(), n * n);
    basis
}

/// Product rule over directions: unit vectors with weights.
#[derive(Debug, Clone)]
pub struct DirectionRule {
    dim: usize,
    dirs: Vec<f64>,
    weights: Vec<f64>,
}

impl DirectionRule {
    /// Hemisphere `{u : u·pole > 0}` in `R^dim`: Gauss in the polar angles,
    /// trapezoid in the azimuth. Weights sum to half the sphere area.
    pub fn hemisphere(pole: &[f64], polar_order: usize, azimuth_order: usize) -> Self {
        Self::build(pole, 0.5 * PI, polar_order, azimuth_order)
    }

    /// Full sphere in `R^dim` oriented along the first coordinate axis.
    pub fn sphere(dim: usize, polar_order: usize, azimuth_order: usize) -> Self {
        let mut pole = vec![0.0; dim];
        pole[0] = 1.0;
        Self::build(&pole, PI, polar_order, azimuth_order)
    }

    fn build(pole: &[f64], first_max: f64, polar_order: usize, azimuth_order: usize) -> Self {
        let m = pole.len();
        assert!((2..=MAX_DIM).contains(&m));
        let frame = frame_with_pole(pole);
        let azimuth: Vec<(f64, f64)> = (0..azimuth_order)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + 0.5) / azimuth_order as f64;
                (t, 2.0 * PI / azimuth_order as f64)
            })
            .collect();
        // local coordinates (in the frame) and weights
        let mut local: Vec<(Vec<f64>, f64)> = Vec::new();
        if m == 2 {
            assert!(first_max == PI, "half-circles are not supported");
            for &(t, w) in &azimuth {
                local.push((vec![t.cos(), t.sin()], w));
            }
        } else {
            let gl = GaussLegendre::new(polar_order);
            let first: Vec<(f64, f64)> = gl.mapped(0.0, first_max).collect();
            let middle: Vec<(f64, f64)> = gl.mapped(0.0, PI).collect();
            // angles phi_1 .. phi_{m-2} polar, phi_{m-1} azimuth
            let polar_count = m - 2;
            let mut idx = vec![0usize; polar_count];
            loop {
                let mut angles = Vec::with_capacity(polar_count);
                let mut weight = 1.0;
                for (j, &i) in idx.iter().enumerate() {
                    let (a, w) = if j == 0 { first[i] } else { middle[i] };
                    weight *= w * a.sin().powi((m - 2 - j) as i32);
                    angles.push(a);
                }
                for &(t, wa) in &azimuth {
                    let mut u = vec![0.0; m];
                    let mut s = 1.0;
                    for (j, a) in angles.iter().enumerate() {
                        u[j] = s * a.cos();
                        s *= a.sin();
                    }
                    u[m - 2] = s * t.cos();
                    u[m - 1] = s * t.sin();
                    local.push((u, weight * wa));
                }
                let mut j = 0;
                loop {
                    if j == polar_count {
                        break;
                    }
                    idx[j] += 1;
                    let lim = if j == 0 { first.len() } else { middle.len() };
                    if idx[j] < lim {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == polar_count {
                    break;
                }
            }
        }
        let mut dirs = Vec::with_capacity(local.len() * m);
        let mut weights = Vec::with_capacity(local.len());
        for (u, w) in local {
            for a in 0..m {
                let mut s = 0.0;
                for (b, ub) in u.iter().enumerate() {
                    s += ub * frame[b * m + a];
                }
                dirs.push(s);
            }
            weights.push(w);
        }
        Self { dim: m, dirs, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.dirs.chunks(self.dim).zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}
