//! Box domain, boundary partition and the periodic boundary-patch lattice.
//!
//! The domain is the box `[0, L_1] x ... x [0, L_n]`. The free boundary `Σ`
//! is the bottom face `{x_n = 0}`. In [`BoundaryMode::Closed`] every other
//! face belongs to the Dirichlet part `Γ`; in [`BoundaryMode::PeriodicSlab`]
//! only the top face does and the lateral faces are identified periodically.

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// `Σ` is the bottom face, `Γ` the union of all remaining faces.
    Closed,
    /// `Σ` is the bottom face, `Γ` the top face, lateral faces periodic.
    PeriodicSlab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    dim: usize,
    extents: Vec<f64>,
    mode: BoundaryMode,
}

impl DomainSpec {
    pub fn new(dim: usize, extents: Vec<f64>, mode: BoundaryMode) -> Result<Self> {
        if !(3..=MAX_DIM).contains(&dim) {
            return Err(Error::Domain(format!(
                "dimension must lie in 3..={MAX_DIM}, got {dim}"
            )));
        }
        if extents.len() != dim {
            return Err(Error::Domain(format!(
                "{} extents given for dimension {dim}",
                extents.len()
            )));
        }
        if let Some(bad) = extents.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Domain(format!("box extent {bad} is not positive")));
        }
        Ok(Self { dim, extents, mode })
    }

    /// Unit box with the closed boundary partition.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(dim, vec![1.0; dim], BoundaryMode::Closed)
    }

    /// Unit box with periodic lateral faces and Dirichlet data on top only.
    pub fn unit_slab(dim: usize) -> Result<Self> {
        Self::new(dim, vec![1.0; dim], BoundaryMode::PeriodicSlab)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn lateral_periodic(&self) -> bool {
        self.mode == BoundaryMode::PeriodicSlab
    }

    pub fn height(&self) -> f64 {
        self.extents[self.dim - 1]
    }

    /// (n-1)-dimensional measure of `Σ`.
    pub fn sigma_area(&self) -> f64 {
        self.extents[..self.dim - 1].iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Membership in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.extents)
            .all(|(&xi, &l)| (-1e-12..=l + 1e-12).contains(&xi))
    }

    /// Whether `x` lies on the Dirichlet part `Γ` of the boundary.
    ///
    /// In the closed mode the rim of `Σ` (its intersection with the lateral
    /// faces) is counted as `Γ`, so `Γ` is closed and `Σ` relatively open.
    pub fn on_gamma(&self, x: &[f64], tol: f64) -> bool {
        let n = self.dim;
        let top = (x[n - 1] - self.extents[n - 1]).abs() <= tol;
        match self.mode {
            BoundaryMode::PeriodicSlab => top,
            BoundaryMode::Closed => {
                top || (0..n - 1).any(|a| x[a].abs() <= tol || (x[a] - self.extents[a]).abs() <= tol)
            }
        }
    }

    pub fn on_sigma(&self, x: &[f64], tol: f64) -> bool {
        x[self.dim - 1].abs() <= tol && !self.on_gamma(x, tol)
    }
}

/// Constant metric `d(x, y) = ((x - y)^T M (x - y))^{1/2}` with `M` symmetric
/// positive definite. The kernel module supplies `M = A^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    dim: usize,
    tensor: Vec<f64>,
    /// Upper bound on the Euclidean radius of a unit metric ball.
    stretch: f64,
}

impl Metric {
    pub fn euclidean(dim: usize) -> Self {
        let mut tensor = vec![0.0; dim * dim];
        for i in 0..dim {
            tensor[i * dim + i] = 1.0;
        }
        Self { dim, tensor, stretch: 1.0 }
    }

    /// `tensor` is row-major `dim x dim`; `stretch` must bound
    /// `|v| / d(v, 0)` from above (the inverse square root of the smallest
    /// eigenvalue of `tensor`).
    pub fn from_tensor(dim: usize, tensor: Vec<f64>, stretch: f64) -> Self {
        assert_eq!(tensor.len(), dim * dim);
        Self { dim, tensor, stretch }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tensor(&self) -> &[f64] {
        &self.tensor
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn norm_sq(&self, v: &[f64]) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            let row = &self.tensor[i * n..(i + 1) * n];
            let mut t = 0.0;
            for j in 0..n {
                t += row[j] * v[j];
            }
            s += v[i] * t;
        }
        s
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut d = [0.0; MAX_DIM];
        for i in 0..self.dim {
            d[i] = x[i] - y[i];
        }
        self.norm_sq(&d[..self.dim]).max(0.0).sqrt()
    }
}

/// Per-patch reduced radii: a single value for the whole lattice or an
/// explicit list in lattice order.
#[derive(Debug, Clone, PartialEq)]
pub enum TildeR {
    Uniform(f64),
    PerPatch(Vec<f64>),
}

impl From<f64> for TildeR {
    fn from(v: f64) -> Self {
        TildeR::Uniform(v)
    }
}

impl From<Vec<f64>> for TildeR {
    fn from(v: Vec<f64>) -> Self {
        TildeR::PerPatch(v)
    }
}

impl TildeR {
    /// The common value when all patches share one reduced radius.
    pub fn uniform_value(&self) -> Option<f64> {
        match self {
            TildeR::Uniform(v) => Some(*v),
            TildeR::PerPatch(v) => {
                let first = *v.first()?;
                v.iter().all(|x| (x - first).abs() <= 1e-14 * first.abs()).then_some(first)
            }
        }
    }
}

/// Admissible interval `[c1, c2]` for the reduced radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusBounds {
    pub c1: f64,
    pub c2: f64,
}

impl Default for RadiusBounds {
    fn default() -> Self {
        Self { c1: 0.25, c2: 4.0 }
    }
}

/// Critical radius exponent `(n - 1) / (n - 2)`.
pub fn critical_exponent(dim: usize) -> f64 {
    (dim as f64 - 1.0) / (dim as f64 - 2.0)
}

/// Patch centers on `Σ` with their radii `r = tilde_r * eps^{(n-1)/(n-2)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchLayout {
    dim: usize,
    epsilon: f64,
    extents: Vec<f64>,
    periodic: bool,
    /// Lattice cells per lateral axis.
    lattice: Vec<usize>,
    centers: Vec<f64>,
    tilde_r: Vec<f64>,
    radii: Vec<f64>,
    bounds: RadiusBounds,
    metric: Metric,
}

/// Builds the periodic lattice `{2 eps (i + 1/2)}` on `Σ`.
pub fn build_layout(spec: &DomainSpec, epsilon: f64, tilde_r: impl Into<TildeR>) -> Result<PatchLayout> {
    build_layout_with(spec, epsilon, tilde_r, RadiusBounds::default())
}

pub fn build_layout_with(
    spec: &DomainSpec,
    epsilon: f64,
    tilde_r: impl Into<TildeR>,
    bounds: RadiusBounds,
) -> Result<PatchLayout> {
    let n = spec.dim();
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Layout(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(bounds.c1 > 0.0 && bounds.c1 <= bounds.c2) {
        return Err(Error::Layout(format!(
            "radius bounds must satisfy 0 < c1 <= c2, got [{}, {}]",
            bounds.c1, bounds.c2
        )));
    }
    let spacing = 2.0 * epsilon;
    let mut lattice = Vec::with_capacity(n - 1);
    for &l in &spec.extents()[..n - 1] {
        let cells = l / spacing;
        if cells < 1.0 - 1e-9 {
            return Err(Error::Layout(format!(
                "epsilon {epsilon} too large: no patch of spacing {spacing} fits in extent {l}"
            )));
        }
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::Layout(format!(
                "lattice spacing {spacing} does not divide the extent {l}"
            )));
        }
        lattice.push(rounded as usize);
    }
    if epsilon >= spec.height() {
        return Err(Error::Layout(format!(
            "epsilon {epsilon} is not below the box height {}",
            spec.height()
        )));
    }
    let count: usize = lattice.iter().product();
    let tilde_r = match tilde_r.into() {
        TildeR::Uniform(v) => vec![v; count],
        TildeR::PerPatch(v) => {
            if v.len() != count {
                return Err(Error::Layout(format!(
                    "{} reduced radii given for {count} patches",
                    v.len()
                )));
            }
            v
        }
    };
    if let Some(bad) = tilde_r.iter().find(|t| !(bounds.c1..=bounds.c2).contains(*t)) {
        return Err(Error::Layout(format!(
            "reduced radius {bad} outside [{}, {}]",
            bounds.c1, bounds.c2
        )));
    }
    let scale = epsilon.powf(critical_exponent(n));
    let radii: Vec<f64> = tilde_r.iter().map(|t| t * scale).collect();
    if let Some(bad) = radii.iter().find(|r| **r >= epsilon) {
        return Err(Error::Layout(format!(
            "patch radius {bad} is not below epsilon {epsilon}"
        )));
    }

    let mut centers = Vec::with_capacity(count * n);
    let mut idx = vec![0usize; n - 1];
    for _ in 0..count {
        for a in 0..n - 1 {
            centers.push(spacing * (idx[a] as f64 + 0.5));
        }
        centers.push(0.0);
        // lexicographic with the first axis fastest
        for a in 0..n - 1 {
            idx[a] += 1;
            if idx[a] < lattice[a] {
                break;
            }
            idx[a] = 0;
        }
    }

    Ok(PatchLayout {
        dim: n,
        epsilon,
        extents: spec.extents().to_vec(),
        periodic: spec.lateral_periodic(),
        lattice,
        centers,
        tilde_r,
        radii,
        bounds,
        metric: Metric::euclidean(n),
    })
}

impl PatchLayout {
    /// Layout without patches, for degenerate checks.
    pub fn empty(spec: &DomainSpec, epsilon: f64) -> Self {
        let n = spec.dim();
        Self {
            dim: n,
            epsilon,
            extents: spec.extents().to_vec(),
            periodic: spec.lateral_periodic(),
            lattice: vec![0; n - 1],
            centers: Vec::new(),
            tilde_r: Vec::new(),
            radii: Vec::new(),
            bounds: RadiusBounds::default(),
            metric: Metric::euclidean(n),
        }
    }

    /// Replaces the distance used for membership queries.
    pub fn with_metric(mut self, metric: Metric) -> Self {
        assert_eq!(metric.dim(), self.dim);
        self.metric = metric;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.dim..(k + 1) * self.dim]
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.radii[k]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn tilde_r(&self, k: usize) -> f64 {
        self.tilde_r[k]
    }

    pub fn tilde_radii(&self) -> &[f64] {
        &self.tilde_r
    }

    pub fn bounds(&self) -> RadiusBounds {
        self.bounds
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn lattice(&self) -> &[usize] {
        &self.lattice
    }

    pub fn min_radius(&self) -> Option<f64> {
        self.radii.iter().copied().reduce(f64::min)
    }

    pub fn sigma_area(&self) -> f64 {
        self.extents[..self.dim - 1].iter().product()
    }

    /// Patches whose lattice cell is the one containing `x` or a neighbour of it.
    pub fn candidates(&self, x: &[f64]) -> impl Iterator<Item = usize> + '_ {
        let n = self.dim;
        let spacing = 2.0 * self.epsilon;
        let mut base = [0isize; MAX_DIM];
        for a in 0..n - 1 {
            base[a] = (x[a] / spacing).floor() as isize;
        }
        let m = n - 1;
        let total = if self.is_empty() { 0 } else { 3usize.pow(m as u32) };
        (0..total).filter_map(move |code| {
            let mut c = code;
            let mut k = 0usize;
            let mut stride = 1usize;
            for a in 0..m {
                let off = (c % 3) as isize - 1;
                c /= 3;
                let i = base[a] + off;
                if i < 0 || i >= self.lattice[a] as isize {
                    return None;
                }
                k += i as usize * stride;
                stride *= self.lattice[a];
            }
            Some(k)
        })
    }

    /// Metric distance from `x` to the center of patch `k`.
    pub fn distance_to(&self, k: usize, x: &[f64]) -> f64 {
        self.metric.distance(x, self.center(k))
    }

    /// Patch whose closed ball of radius `radius_of(k)` contains `x`.
    pub fn locate(&self, x: &[f64], radius_of: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
        self.candidates(x)
            .map(|k| (k, self.distance_to(k, x)))
            .find(|&(k, d)| d <= radius_of(k))
    }

    /// Membership in `T_eps`: closed metric ball of radius `r_k` around some
    /// center, intersected with the closed box.
    pub fn in_t_eps(&self, x: &[f64]) -> bool {
        let inside = x
            .iter()
            .zip(&self.extents)
            .all(|(&xi, &l)| (-1e-12..=l + 1e-12).contains(&xi));
        inside && self.locate(x, |k| self.radii[k]).is_some()
    }

    /// Membership in `S_eps = T_eps ∩ Σ`.
    pub fn in_s_eps(&self, x: &[f64]) -> bool {
        x[self.dim - 1].abs() <= 1e-12 && self.in_t_eps(x)
    }

    /// Rows `(k, x_1..x_n, r)` as written by the layout dump.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f64], f64)> + '_ {
        (0..self.len()).map(move |k| (k, self.center(k), self.radii[k]))
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts_and_radii() {
        let spec = DomainSpec::unit(3).unwrap();
        let l = build_layout(&spec, 0.25, 1.0).unwrap();
        assert_eq!(l.len(), 4);
        assert!((l.radius(0) - 0.0625).abs() < 1e-15);
        assert_eq!(l.center(0), &[0.25, 0.25, 0.0]);
        assert_eq!(l.center(3), &[0.75, 0.75, 0.0]);

        let l = build_layout(&spec, 0.125, 1.0).unwrap();
        assert_eq!(l.len(), 16);
        assert!((l.radius(5) - 0.015625).abs() < 1e-15);
    }

    #[test]
    fn rejects_radius_reaching_epsilon() {
        let spec = DomainSpec::unit(4).unwrap();
        let err = build_layout(&spec, 0.25, 2.0).unwrap_err();
        assert!(matches!(err, Error::Layout(ref m) if m.contains("not below epsilon")), "{err}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = DomainSpec::unit(3).unwrap();
        assert!(build_layout(&spec, 0.75, 1.0).is_err());
        assert!(build_layout(&spec, 0.3, 1.0).is_err());
        assert!(build_layout(&spec, 0.25, 10.0).is_err());
        assert!(build_layout(&spec, 0.25, vec![1.0; 3]).is_err());
        assert!(DomainSpec::unit(2).is_err());
    }

    #[test]
    fn t_eps_membership_uses_closed_balls() {
        let spec = DomainSpec::unit(3).unwrap();
        let l = build_layout(&spec, 0.25, 1.0).unwrap();
        let r = l.radius(0);
        assert!(l.in_t_eps(&[0.25, 0.25, 0.0]));
        assert!(l.in_t_eps(&[0.25 + r, 0.25, 0.0]));
        assert!(l.in_t_eps(&[0.25, 0.25, r]));
        assert!(!l.in_t_eps(&[0.25 + 1.5 * r, 0.25, 0.0]));
        assert!(!l.in_t_eps(&[0.25, 0.25, 1.5 * r]));
        assert!(!l.in_t_eps(&[0.5, 0.5, 0.0]));
    }

    #[test]
    fn lattice_tiles_sigma() {
        for (n, eps) in [(3, 0.25), (3, 0.0625), (4, 0.125)] {
            let spec = DomainSpec::unit(n).unwrap();
            let l = build_layout(&spec, eps, 1.0).unwrap();
            let tiled = l.len() as f64 * (2.0 * eps).powi(n as i32 - 1);
            assert!((tiled - spec.sigma_area()).abs() < 1e-12);
        }
        let spec = DomainSpec::unit(3).unwrap();
        let a = build_layout(&spec, 0.25, 1.0).unwrap().len();
        let b = build_layout(&spec, 0.125, 1.0).unwrap().len();
        assert_eq!(b, 4 * a);
    }

    #[test]
    fn per_patch_radii() {
        let spec = DomainSpec::unit(3).unwrap();
        let l = build_layout(&spec, 0.25, vec![0.5, 1.0, 1.5, 2.0]).unwrap();
        assert!((l.radius(3) - 0.125).abs() < 1e-15);
        assert_eq!(TildeR::PerPatch(vec![1.0, 1.0]).uniform_value(), Some(1.0));
        assert_eq!(TildeR::PerPatch(vec![1.0, 2.0]).uniform_value(), None);
    }

    #[test]
    fn metric_distance_anisotropic() {
        // tensor = A^{-1} for A = diag(4, 1, 1)
        let m = Metric::from_tensor(3, vec![0.25, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 2.0);
        assert!((m.distance(&[1.0, 0.0, 0.0], &[0.0; 3]) - 0.5).abs() < 1e-15);
    }
}
