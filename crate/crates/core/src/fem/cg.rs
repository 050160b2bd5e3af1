//! Jacobi-preconditioned conjugate gradients with fixed (masked) unknowns.

use std::time::Instant;

use rayon::prelude::*;

use super::problem::{SolveReport, SolverConfig};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::chunked_sum;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    chunked_sum(a.len(), |i| a[i] * b[i])
}

/// Iteration count and final relative residual of a masked solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Solves `K x = rhs` on the rows where `fixed` is false, holding the fixed
/// entries of `x` at their current values. Convergence is measured by the
/// preconditioner-free residual relative to the reduced right-hand side.
pub fn cg_masked(
    k: &CsrMatrix,
    rhs: &[f64],
    fixed: &[bool],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = k.dim();
    assert!(rhs.len() == n && fixed.len() == n && x.len() == n);
    let diag = k.diagonal();
    if let Some(i) = (0..n).find(|&i| !fixed[i] && !(diag[i] > 0.0)) {
        return Err(Error::Solver(format!("non-positive diagonal {} at free row {i}", diag[i])));
    }
    // reduced right-hand side b - K_fc x_c
    let fixed_part: Vec<f64> = x.iter().zip(fixed).map(|(v, &f)| if f { *v } else { 0.0 }).collect();
    let mut kx = vec![0.0; n];
    k.mul_into(&fixed_part, &mut kx);
    let b: Vec<f64> = (0..n).map(|i| if fixed[i] { 0.0 } else { rhs[i] - kx[i] }).collect();
    let b_norm = dot(&b, &b).sqrt();
    if b_norm == 0.0 {
        x.par_iter_mut().zip(fixed.par_iter()).for_each(|(v, &f)| {
            if !f {
                *v = 0.0
            }
        });
        return Ok(CgOutcome { iterations: 0, residual: 0.0, converged: true });
    }
    k.mul_into(x, &mut kx);
    let mut r: Vec<f64> = (0..n).map(|i| if fixed[i] { 0.0 } else { rhs[i] - kx[i] }).collect();
    let mut r_norm = dot(&r, &r).sqrt();
    if r_norm <= tol * b_norm {
        return Ok(CgOutcome { iterations: 0, residual: r_norm / b_norm, converged: true });
    }
    let inv_diag: Vec<f64> = diag.iter().zip(fixed).map(|(d, &f)| if f { 0.0 } else { 1.0 / d }).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    for it in 1..=max_iter {
        k.mul_into(&p, &mut kp);
        kp.par_iter_mut().zip(fixed.par_iter()).for_each(|(v, &f)| {
            if f {
                *v = 0.0
            }
        });
        let curv = dot(&p, &kp);
        if !(curv > 0.0) {
            return Err(Error::Solver(format!(
                "negative curvature p^T K p = {curv:.3e} at iteration {it}: operator is not positive definite on the free unknowns"
            )));
        }
        let alpha = rz / curv;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(kp.par_iter()).for_each(|(ri, kpi)| *ri -= alpha * kpi);
        r_norm = dot(&r, &r).sqrt();
        if r_norm <= tol * b_norm {
            return Ok(CgOutcome { iterations: it, residual: r_norm / b_norm, converged: true });
        }
        z.par_iter_mut()
            .zip(r.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok(CgOutcome { iterations: max_iter, residual: r_norm / b_norm, converged: false })
}

/// Unmasked solve of `K x = rhs` from a zero initial guess.
pub fn cg_solve(k: &CsrMatrix, rhs: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let mut x = vec![0.0; k.dim()];
    let fixed = vec![false; k.dim()];
    let out = cg_masked(k, rhs, &fixed, &mut x, config.tol, config.max_iter)?;
    let energy = k.quad_form(&x);
    Ok((
        x,
        SolveReport {
            iterations: out.iterations,
            residual: out.residual,
            energy,
            active_set: 0,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            converged: out.converged,
        },
    ))
}
