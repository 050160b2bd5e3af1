//! Galerkin assembly on the structured mesh: the stiffness of
//! `∫ (A∇u)·∇v` and the boundary penalty `c_n μ ∫_Σ (u - φ)_-²`.

use rayon::prelude::*;

use super::sparse::CsrMatrix;
use crate::geometry::MAX_DIM;
use crate::kernel::CoefficientField;
use crate::mesh::{chunked_sum, Mesh};
use crate::quadrature::GaussLegendre;

/// Tensor Gauss rule on `[0, 1]^m`: points (row-major, `m` coords each) and weights.
fn unit_cube_rule(m: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let gl: Vec<(f64, f64)> = GaussLegendre::new(order).mapped(0.0, 1.0).collect();
    let count = order.pow(m as u32);
    let mut pts = Vec::with_capacity(count * m);
    let mut wts = Vec::with_capacity(count);
    for q in 0..count {
        let mut rem = q;
        let mut w = 1.0;
        for _ in 0..m {
            let (x, wx) = gl[rem % order];
            rem /= order;
            pts.push(x);
            w *= wx;
        }
        wts.push(w);
    }
    (pts, wts)
}

fn shape(local: usize, xi: &[f64]) -> f64 {
    xi.iter()
        .enumerate()
        .map(|(a, &t)| if (local >> a) & 1 == 1 { t } else { 1.0 - t })
        .product()
}

/// Element stiffness `2^n x 2^n` for constant `A` on a box of widths `h`,
/// from the two-point tensor Gauss rule (exact for multilinear elements).
pub fn element_stiffness(h: &[f64], coeff: &CoefficientField) -> Vec<f64> {
    let n = h.len();
    let nl = 1usize << n;
    let a = coeff.a_matrix();
    let vol: f64 = h.iter().product();
    let (pts, wts) = unit_cube_rule(n, 2);
    let mut k = vec![0.0; nl * nl];
    let mut grads = vec![0.0; nl * n];
    for (q, w) in wts.iter().enumerate() {
        let xi = &pts[q * n..(q + 1) * n];
        for c in 0..nl {
            for ax in 0..n {
                let mut g = if (c >> ax) & 1 == 1 { 1.0 } else { -1.0 } / h[ax];
                for (b, &t) in xi.iter().enumerate() {
                    if b != ax {
                        g *= if (c >> b) & 1 == 1 { t } else { 1.0 - t };
                    }
                }
                grads[c * n + ax] = g;
            }
        }
        for c in 0..nl {
            for d in 0..nl {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += grads[c * n + i] * a[i * n + j] * grads[d * n + j];
                    }
                }
                k[c * nl + d] += w * vol * s;
            }
        }
    }
    k
}

/// Visits the elements containing node `i` as `(element corner index of i, origin)`.
fn for_each_element_of(mesh: &Mesh, i: usize, mut f: impl FnMut(usize, &[usize])) {
    let n = mesh.dim();
    let mut m = [0usize; MAX_DIM];
    mesh.node_multi(i, &mut m[..n]);
    let cells = mesh.cells();
    let periodic = mesh.is_periodic();
    let mut origin = [0usize; MAX_DIM];
    'corner: for c in 0..(1usize << n) {
        for a in 0..n {
            let bit = (c >> a) & 1;
            if periodic && a < n - 1 {
                origin[a] = (m[a] + cells[a] - bit) % cells[a];
            } else {
                if m[a] < bit || m[a] - bit >= cells[a] {
                    continue 'corner;
                }
                origin[a] = m[a] - bit;
            }
        }
        f(c, &origin[..n]);
    }
}

fn corner_node(mesh: &Mesh, origin: &[usize], local: usize) -> usize {
    let n = mesh.dim();
    let mut idx = [0usize; MAX_DIM];
    for a in 0..n {
        let mut j = origin[a] + ((local >> a) & 1);
        if j == mesh.axis_nodes()[a] {
            j = 0;
        }
        idx[a] = j;
    }
    mesh.node_index(&idx[..n])
}

/// Stiffness matrix of `∫ (A∇u)·∇v`, assembled row by row.
pub fn assemble_stiffness(mesh: &Mesh, coeff: &CoefficientField) -> CsrMatrix {
    assert_eq!(mesh.dim(), coeff.dim());
    let n = mesh.dim();
    let nl = 1usize << n;
    let kloc = element_stiffness(mesh.spacing(), coeff);
    let rows: Vec<Vec<(u32, f64)>> = (0..mesh.node_count())
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(3usize.pow(n as u32) * 2);
            for_each_element_of(mesh, i, |c, origin| {
                for d in 0..nl {
                    let j = corner_node(mesh, origin, d);
                    row.push((j as u32, kloc[c * nl + d]));
                }
            });
            row
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

/// Consistent mass matrix of `∫_D u v`.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.dim();
    let nl = 1usize << n;
    let vol: f64 = mesh.spacing().iter().product();
    let mloc = crate::mesh::tensor_mass(n, vol);
    let rows: Vec<Vec<(u32, f64)>> = (0..mesh.node_count())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for_each_element_of(mesh, i, |c, origin| {
                for d in 0..nl {
                    row.push((corner_node(mesh, origin, d) as u32, mloc[c * nl + d]));
                }
            });
            row
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

/// Order-3 tensor quadrature on the bottom faces with precomputed obstacle
/// values, for repeated penalty evaluations.
#[derive(Debug, Clone)]
pub struct SigmaQuadrature {
    m: usize,
    /// Shape values `[q][local]`.
    shapes: Vec<f64>,
    /// Weights already scaled by the face area.
    weights: Vec<f64>,
    /// Obstacle at every face quadrature point, `[face][q]`.
    phi: Vec<f64>,
}

pub const FACE_ORDER: usize = 3;

impl SigmaQuadrature {
    pub fn new(mesh: &Mesh, phi: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Self {
        let n = mesh.dim();
        let m = n - 1;
        let nl = 1usize << m;
        let (pts, wts) = unit_cube_rule(m, FACE_ORDER);
        let nq = wts.len();
        let area: f64 = mesh.spacing()[..m].iter().product();
        let mut shapes = vec![0.0; nq * nl];
        for q in 0..nq {
            for c in 0..nl {
                shapes[q * nl + c] = shape(c, &pts[q * m..(q + 1) * m]);
            }
        }
        let weights: Vec<f64> = wts.iter().map(|w| w * area).collect();
        let h = mesh.spacing();
        let phi: Vec<f64> = (0..mesh.face_count())
            .into_par_iter()
            .flat_map_iter(|f| {
                let mut origin = [0.0; MAX_DIM];
                mesh.face_origin(f, &mut origin[..n]);
                (0..nq)
                    .map(|q| {
                        let mut x = origin;
                        for a in 0..m {
                            x[a] += pts[q * m + a] * h[a];
                        }
                        phi(&x[..n])
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Self { m, shapes, weights, phi }
    }

    fn nq(&self) -> usize {
        self.weights.len()
    }

    /// `Σ_q w_q (u_h - φ)_-²` over all faces.
    pub fn negative_part_sq(&self, mesh: &Mesh, u: &[f64]) -> f64 {
        let nl = 1usize << self.m;
        let nq = self.nq();
        chunked_sum(mesh.face_count(), |f| {
            let mut nodes = [0usize; 1 << MAX_DIM];
            mesh.face_nodes(f, &mut nodes[..nl]);
            let mut s = 0.0;
            for q in 0..nq {
                let uh: f64 = (0..nl).map(|c| self.shapes[q * nl + c] * u[nodes[c]]).sum();
                let neg = (self.phi[f * nq + q] - uh).max(0.0);
                s += self.weights[q] * neg * neg;
            }
            s
        })
    }
}

/// Penalty value, gradient and generalized Hessian at `u`.
#[derive(Debug, Clone)]
pub struct PenaltyTerms {
    pub energy: f64,
    pub gradient: Vec<f64>,
    pub hessian: CsrMatrix,
    /// Face quadrature points where `u_h < φ`.
    pub active_points: usize,
}

/// `c_n μ ∫_Σ (u - φ)_-²`, its gradient `-2 c_n μ ∫ (u - φ)_- N_i` and the
/// active-region mass matrix scaled by `2 c_n μ`.
pub fn assemble_boundary_penalty(mesh: &Mesh, quad: &SigmaQuadrature, weight: f64, u: &[f64]) -> PenaltyTerms {
    let n = mesh.dim();
    let m = n - 1;
    let nl = 1usize << m;
    let nq = quad.nq();
    let total = mesh.node_count();
    let bottom = mesh.bottom_count();
    // per-face negative parts at the quadrature points
    let negs: Vec<f64> = (0..mesh.face_count())
        .into_par_iter()
        .flat_map_iter(|f| {
            let mut nodes = [0usize; 1 << MAX_DIM];
            mesh.face_nodes(f, &mut nodes[..nl]);
            (0..nq)
                .map(|q| {
                    let uh: f64 = (0..nl).map(|c| quad.shapes[q * nl + c] * u[nodes[c]]).sum();
                    (quad.phi[f * nq + q] - uh).max(0.0)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let energy = weight
        * chunked_sum(mesh.face_count(), |f| {
            (0..nq).map(|q| quad.weights[q] * negs[f * nq + q].powi(2)).sum::<f64>()
        });
    let active_points = negs.iter().filter(|v| **v > 0.0).count();

    let cells = mesh.cells();
    let periodic = mesh.is_periodic();
    let axis_nodes = mesh.axis_nodes();
    let per_row: Vec<(f64, Vec<(u32, f64)>)> = (0..bottom)
        .into_par_iter()
        .map(|i| {
            let mut mi = [0usize; MAX_DIM];
            mesh.node_multi(i, &mut mi[..n]);
            let mut grad = 0.0;
            let mut row = Vec::new();
            let mut origin = [0usize; MAX_DIM];
            'corner: for c in 0..nl {
                for a in 0..m {
                    let bit = (c >> a) & 1;
                    if periodic {
                        origin[a] = (mi[a] + cells[a] - bit) % cells[a];
                    } else {
                        if mi[a] < bit || mi[a] - bit >= cells[a] {
                            continue 'corner;
                        }
                        origin[a] = mi[a] - bit;
                    }
                }
                let mut f = 0;
                let mut stride = 1;
                for a in 0..m {
                    f += origin[a] * stride;
                    stride *= cells[a];
                }
                for q in 0..nq {
                    let neg = negs[f * nq + q];
                    if neg > 0.0 {
                        let wq = quad.weights[q];
                        let nc = quad.shapes[q * nl + c];
                        grad -= 2.0 * weight * wq * neg * nc;
                        for d in 0..nl {
                            let mut idx = [0usize; MAX_DIM];
                            for a in 0..m {
                                let mut j = origin[a] + ((d >> a) & 1);
                                if j == axis_nodes[a] {
                                    j = 0;
                                }
                                idx[a] = j;
                            }
                            let col = mesh.node_index(&idx[..n]);
                            row.push((col as u32, 2.0 * weight * wq * nc * quad.shapes[q * nl + d]));
                        }
                    }
                }
            }
            (grad, row)
        })
        .collect();
    let mut gradient = vec![0.0; total];
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(total);
    for (i, (g, row)) in per_row.into_iter().enumerate() {
        gradient[i] = g;
        rows.push(row);
    }
    rows.resize_with(total, Vec::new);
    PenaltyTerms { energy, gradient, hessian: CsrMatrix::from_rows(rows), active_points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, PatchLayout};
    use crate::mesh::{build_mesh, MeshOptions};

    #[test]
    fn element_stiffness_rows_sum_to_zero() {
        let k = element_stiffness(&[0.5, 0.25, 1.0], &CoefficientField::identity(3));
        for c in 0..8 {
            let s: f64 = (0..8).map(|d| k[c * 8 + d]).sum();
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn penalty_example() {
        let spec = DomainSpec::unit(3).unwrap();
        let layout = PatchLayout::empty(&spec, 0.25);
        let mesh = build_mesh(&spec, &layout, 0.25, MeshOptions::default()).unwrap();
        let quad = SigmaQuadrature::new(&mesh, &|_| 1.0);
        let u = vec![0.0; mesh.node_count()];
        let p = assemble_boundary_penalty(&mesh, &quad, 0.5, &u);
        assert!((p.energy - 0.5).abs() < 1e-14);
        let u = vec![2.0; mesh.node_count()];
        let p = assemble_boundary_penalty(&mesh, &quad, 0.5, &u);
        assert_eq!(p.energy, 0.0);
        assert_eq!(p.hessian.nnz(), 0);
    }
}
