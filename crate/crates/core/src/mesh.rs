//! Structured grids of multilinear box elements with boundary tags.
//!
//! Nodes are numbered lexicographically with the first axis fastest. On
//! periodic lateral axes the node at `x_a = L_a` is identified with
//! `x_a = 0`, so those axes carry `cells` nodes instead of `cells + 1`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, PatchLayout, MAX_DIM};

/// Boundary classification of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeTag {
    Interior,
    /// Dirichlet part of the boundary.
    Gamma,
    /// On `Σ`, outside every patch.
    SigmaFree,
    /// On `Σ` within the closed metric ball of patch `k`.
    Patch(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Accept meshes coarser than half the smallest patch radius.
    pub allow_under_resolved: bool,
    pub node_cap: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { allow_under_resolved: false, node_cap: 20_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    extents: Vec<f64>,
    cells: Vec<usize>,
    spacing: Vec<f64>,
    periodic: bool,
    axis_nodes: Vec<usize>,
    strides: Vec<usize>,
    tags: Vec<NodeTag>,
    patch_counts: Vec<usize>,
}

fn cells_for(extent: f64, h: f64) -> Result<usize> {
    let c = extent / h;
    let rounded = c.round();
    if rounded < 1.0 || (c - rounded).abs() > 1e-9 * c.max(1.0) {
        return Err(Error::Domain(format!("mesh width {h} does not divide the extent {extent}")));
    }
    Ok(rounded as usize)
}

/// Uniform mesh of width `h` on every axis.
pub fn build_mesh(spec: &DomainSpec, layout: &PatchLayout, h: f64, options: MeshOptions) -> Result<Mesh> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("mesh width must be positive, got {h}")));
    }
    let cells = spec.extents().iter().map(|&l| cells_for(l, h)).collect::<Result<Vec<_>>>()?;
    build_mesh_cells(spec, layout, &cells, options)
}

/// Mesh with `cells[a]` elements along axis `a`.
pub fn build_mesh_cells(spec: &DomainSpec, layout: &PatchLayout, cells: &[usize], options: MeshOptions) -> Result<Mesh> {
    let n = spec.dim();
    if cells.len() != n || cells.contains(&0) {
        return Err(Error::Domain(format!("need {n} positive cell counts, got {cells:?}")));
    }
    if layout.dim() != n {
        return Err(Error::Domain("layout and domain dimensions differ".into()));
    }
    let periodic = spec.lateral_periodic();
    if periodic && cells[..n - 1].iter().any(|&c| c < 2) {
        return Err(Error::Domain("periodic axes need at least two cells".into()));
    }
    let spacing: Vec<f64> = spec.extents().iter().zip(cells).map(|(l, &c)| l / c as f64).collect();
    let h_max = spacing.iter().copied().fold(0.0, f64::max);
    if let Some(r_min) = layout.min_radius() {
        if !options.allow_under_resolved && h_max > 0.5 * r_min * (1.0 + 1e-12) {
            return Err(Error::Resolution { h: h_max, r_min });
        }
    }
    let axis_nodes: Vec<usize> = (0..n)
        .map(|a| if periodic && a < n - 1 { cells[a] } else { cells[a] + 1 })
        .collect();
    let total = axis_nodes.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m));
    let total = match total {
        Some(t) if t <= options.node_cap => t,
        _ => {
            return Err(Error::NodeCap {
                nodes: total.unwrap_or(usize::MAX),
                cap: options.node_cap,
            })
        }
    };
    let mut strides = vec![1usize; n];
    for a in 1..n {
        strides[a] = strides[a - 1] * axis_nodes[a - 1];
    }

    let mut mesh = Mesh {
        dim: n,
        extents: spec.extents().to_vec(),
        cells: cells.to_vec(),
        spacing,
        periodic,
        axis_nodes,
        strides,
        tags: Vec::new(),
        patch_counts: vec![0; layout.len()],
    };
    let tol = 1e-9 * mesh.spacing.iter().copied().fold(f64::INFINITY, f64::min);
    let bottom = mesh.strides[n - 1];
    let tags: Vec<NodeTag> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; MAX_DIM];
            mesh.coords(i, &mut x[..n]);
            let x = &x[..n];
            if spec.on_gamma(x, tol) {
                NodeTag::Gamma
            } else if i < bottom {
                match layout.locate(x, |k| layout.radius(k)) {
                    Some((k, _)) => NodeTag::Patch(k as u32),
                    None => NodeTag::SigmaFree,
                }
            } else {
                NodeTag::Interior
            }
        })
        .collect();
    for t in &tags[..bottom] {
        if let NodeTag::Patch(k) = t {
            mesh.patch_counts[*k as usize] += 1;
        }
    }
    if !options.allow_under_resolved {
        if let Some(k) = mesh.patch_counts.iter().position(|&c| c == 0) {
            return Err(Error::Resolution { h: h_max, r_min: layout.radius(k) });
        }
    }
    mesh.tags = tags;
    Ok(mesh)
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.tags.len()
    }

    pub fn element_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn axis_nodes(&self) -> &[usize] {
        &self.axis_nodes
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    pub fn tag(&self, i: usize) -> NodeTag {
        self.tags[i]
    }

    /// Tagged `Σ` nodes per patch.
    pub fn patch_node_counts(&self) -> &[usize] {
        &self.patch_counts
    }

    /// Nodes on the bottom face `x_n = 0` are `0..bottom_count()`.
    pub fn bottom_count(&self) -> usize {
        self.strides[self.dim - 1]
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_multi(&self, mut i: usize, out: &mut [usize]) {
        for a in 0..self.dim {
            out[a] = i % self.axis_nodes[a];
            i /= self.axis_nodes[a];
        }
    }

    pub fn coords(&self, i: usize, out: &mut [f64]) {
        let mut rem = i;
        for a in 0..self.dim {
            let m = rem % self.axis_nodes[a];
            rem /= self.axis_nodes[a];
            out[a] = m as f64 * self.spacing[a];
        }
    }

    pub fn coords_vec(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.coords(i, &mut x);
        x
    }

    /// Index of the node `base + offset` along each axis, wrapping on periodic
    /// axes; `None` if it leaves the grid.
    pub fn shifted(&self, base: &[usize], offset: &[isize]) -> Option<usize> {
        let mut idx = 0;
        for a in 0..self.dim {
            let m = self.axis_nodes[a] as isize;
            let mut j = base[a] as isize + offset[a];
            if self.periodic && a < self.dim - 1 {
                j = j.rem_euclid(m);
            } else if j < 0 || j >= m {
                return None;
            }
            idx += j as usize * self.strides[a];
        }
        Some(idx)
    }

    /// The `2^n` nodes of element `e`, local index bit `a` meaning `+1` on axis `a`.
    pub fn element_nodes(&self, e: usize, out: &mut [usize]) {
        let n = self.dim;
        let mut origin = [0usize; MAX_DIM];
        let mut rem = e;
        for a in 0..n {
            origin[a] = rem % self.cells[a];
            rem /= self.cells[a];
        }
        for (local, slot) in out.iter_mut().enumerate().take(1 << n) {
            let mut idx = 0;
            for a in 0..n {
                let mut j = origin[a] + ((local >> a) & 1);
                if j == self.axis_nodes[a] {
                    j = 0;
                }
                idx += j * self.strides[a];
            }
            *slot = idx;
        }
    }

    /// Multilinear interpolant of nodal `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let n = self.dim;
        let mut lo = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..n {
            let mut xa = x[a];
            if self.periodic && a < n - 1 {
                xa = xa.rem_euclid(self.extents[a]);
            }
            let t = xa / self.spacing[a];
            let i = (t.floor().max(0.0) as usize).min(self.cells[a] - 1);
            lo[a] = i;
            frac[a] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut total = 0.0;
        for local in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..n {
                let bit = (local >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                let mut j = lo[a] + bit;
                if j == self.axis_nodes[a] {
                    j = 0;
                }
                idx += j * self.strides[a];
            }
            if w != 0.0 {
                total += w * values[idx];
            }
        }
        total
    }

    /// Interpolates `values` living on `source` at every node of `self`.
    pub fn transfer_from(&self, source: &Mesh, values: &[f64]) -> Vec<f64> {
        (0..self.node_count())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; MAX_DIM];
                self.coords(i, &mut x[..self.dim]);
                source.interpolate(values, &x[..self.dim])
            })
            .collect()
    }

    /// Consistent-mass `L²(D)` norm of the multilinear interpolant.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        let n = self.dim;
        let nl = 1usize << n;
        let vol: f64 = self.spacing.iter().product();
        let mass = tensor_mass(n, vol);
        let sums = chunked_sum(self.element_count(), |e| {
            let mut nodes = [0usize; 1 << MAX_DIM];
            self.element_nodes(e, &mut nodes[..nl]);
            let mut s = 0.0;
            for a in 0..nl {
                let ua = values[nodes[a]];
                for b in 0..nl {
                    s += ua * mass[a * nl + b] * values[nodes[b]];
                }
            }
            s
        });
        sums.max(0.0).sqrt()
    }

    /// Consistent-mass `L²(Σ)` norm over the bottom face.
    pub fn sigma_l2_norm(&self, values: &[f64]) -> f64 {
        let m = self.dim - 1;
        let nl = 1usize << m;
        let area: f64 = self.spacing[..m].iter().product();
        let mass = tensor_mass(m, area);
        let faces: usize = self.cells[..m].iter().product();
        let sums = chunked_sum(faces, |f| {
            let mut nodes = [0usize; 1 << MAX_DIM];
            self.face_nodes(f, &mut nodes[..nl]);
            let mut s = 0.0;
            for a in 0..nl {
                for b in 0..nl {
                    s += values[nodes[a]] * mass[a * nl + b] * values[nodes[b]];
                }
            }
            s
        });
        sums.max(0.0).sqrt()
    }

    /// Number of bottom faces.
    pub fn face_count(&self) -> usize {
        self.cells[..self.dim - 1].iter().product()
    }

    /// The `2^{n-1}` nodes of bottom face `f`.
    pub fn face_nodes(&self, f: usize, out: &mut [usize]) {
        let m = self.dim - 1;
        let mut origin = [0usize; MAX_DIM];
        let mut rem = f;
        for a in 0..m {
            origin[a] = rem % self.cells[a];
            rem /= self.cells[a];
        }
        for (local, slot) in out.iter_mut().enumerate().take(1 << m) {
            let mut idx = 0;
            for a in 0..m {
                let mut j = origin[a] + ((local >> a) & 1);
                if j == self.axis_nodes[a] {
                    j = 0;
                }
                idx += j * self.strides[a];
            }
            *slot = idx;
        }
    }

    /// Lower-left corner of bottom face `f`.
    pub fn face_origin(&self, f: usize, out: &mut [f64]) {
        let m = self.dim - 1;
        let mut rem = f;
        for a in 0..m {
            out[a] = (rem % self.cells[a]) as f64 * self.spacing[a];
            rem /= self.cells[a];
        }
        out[m] = 0.0;
    }
}

/// Element mass matrix of the tensor multilinear basis, `2^m x 2^m`.
pub(crate) fn tensor_mass(m: usize, measure: f64) -> Vec<f64> {
    let nl = 1usize << m;
    let mut out = vec![0.0; nl * nl];
    for a in 0..nl {
        for b in 0..nl {
            let mut v = measure;
            for ax in 0..m {
                v *= if ((a >> ax) & 1) == ((b >> ax) & 1) { 1.0 / 3.0 } else { 1.0 / 6.0 };
            }
            out[a * nl + b] = v;
        }
    }
    out
}

/// Deterministic parallel sum of `f(0..count)`: fixed chunks, summed in order.
pub(crate) fn chunked_sum(count: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    const CHUNK: usize = 4096;
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(count)).map(&f).sum())
        .collect();
    parts.iter().sum()
}
