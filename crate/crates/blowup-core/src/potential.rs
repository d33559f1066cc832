// SPDX-License-Identifier: MIT OR Apache-2.0

//! Zeroth-order coefficients a(x) and coercivity certification of -Δ + a.
//!
//! Coercivity is decided in up to three stages, cheapest first:
//!
//! 1. variational bound: λ₁(-Δ + a) ≥ λ₁(-Δ) + min a, so a cached
//!    Laplacian eigenvalue certifies coercivity without any solve;
//! 2. inverse power iteration on -Δ + a with conjugate-gradient solves,
//!    giving a converged smallest-eigenvalue estimate;
//! 3. if CG meets a direction of non-positive curvature during stage 2,
//!    that direction is a witness that the form is not positive definite,
//!    and the operator is reported non-coercive outright.

use crate::cg::{self, CgError};
use crate::grid::{deterministic_dot, Grid};
use crate::interp::LatticeField;
use crate::tolerances;

#[derive(Debug, Clone)]
pub enum Potential {
    Constant(f64),
    /// c0 + lin·x + x·quad·x.
    Quadratic {
        c0: f64,
        lin: [f64; 3],
        quad: [[f64; 3]; 3],
    },
    /// Cubic interpolation of lattice samples.
    GridSamples(LatticeField),
}

impl Potential {
    #[must_use]
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::Quadratic { c0, lin, quad } => {
                let mut v = *c0;
                for i in 0..3 {
                    v += lin[i] * x[i];
                    for j in 0..3 {
                        v += x[i] * quad[i][j] * x[j];
                    }
                }
                v
            }
            Potential::GridSamples(f) => f.value(x),
        }
    }

    /// The potential multiplied pointwise by `factor`.
    #[must_use]
    pub fn scaled(&self, factor: f64) -> Potential {
        match self {
            Potential::Constant(c) => Potential::Constant(c * factor),
            Potential::Quadratic { c0, lin, quad } => {
                let mut l = *lin;
                let mut q = *quad;
                for i in 0..3 {
                    l[i] *= factor;
                    for j in 0..3 {
                        q[i][j] *= factor;
                    }
                }
                Potential::Quadratic {
                    c0: c0 * factor,
                    lin: l,
                    quad: q,
                }
            }
            Potential::GridSamples(f) => Potential::GridSamples(f.scaled(factor)),
        }
    }

    /// Rank-indexed samples at the active nodes of a grid.
    #[must_use]
    pub fn sample_on(&self, grid: &Grid) -> Vec<f64> {
        grid.sample(|p| self.eval(p))
    }
}

#[derive(Debug, Clone)]
pub struct CoercivityReport {
    pub coercive: bool,
    /// Smallest-eigenvalue estimate (or lower bound, or observed negative
    /// curvature, depending on `method`).
    pub lambda_min: f64,
    pub method: &'static str,
}

#[derive(Debug, thiserror::Error)]
pub enum CoercivityError {
    #[error("inverse power iteration inconclusive: {0}")]
    Inconclusive(CgError),
}

/// Deterministic full-spectrum start vector for power iterations: dense in
/// every eigenmode for generic operators, reproducible without an RNG.
fn seed_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|m| (0.37 * m as f64 + 0.11).sin() + 0.01)
        .collect()
}

/// Smallest eigenvalue of -Δ_h + diag(a) by inverse power iteration.
///
/// # Errors
///
/// Propagates CG failures; [`CgError::IndefiniteOperator`] in particular
/// certifies that the operator is not positive definite.
pub fn smallest_eigenvalue(grid: &Grid, a_diag: &[f64]) -> Result<f64, CgError> {
    let n = grid.n_inside();
    let diag = grid.diagonal(a_diag);
    let cap = cg::iteration_cap(n);
    let mut v = seed_vector(n);
    let norm = deterministic_dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= norm;
    }
    let mut lambda_prev = f64::INFINITY;
    let mut av = vec![0.0; n];
    for _ in 0..tolerances::COERCIVITY_ITERATIONS {
        let sol = cg::solve(|u, out| grid.apply(a_diag, u, out), &diag, &v, 1e-8, cap)?;
        let norm = deterministic_dot(&sol.x, &sol.x).sqrt();
        for (vi, wi) in v.iter_mut().zip(&sol.x) {
            *vi = wi / norm;
        }
        grid.apply(a_diag, &v, &mut av);
        let lambda = deterministic_dot(&v, &av);
        if (lambda - lambda_prev).abs() <= 1e-8 * lambda.abs().max(1e-12) {
            return Ok(lambda);
        }
        lambda_prev = lambda;
    }
    Ok(lambda_prev)
}

/// Certifies coercivity of -Δ_h + diag(a) on a grid.
///
/// `cached_laplacian_lambda1`, when available, enables the solve-free
/// variational bound λ₁(-Δ) + min a.
///
/// # Errors
///
/// [`CoercivityError::Inconclusive`] when the iterative stage stalls
/// without either converging or producing a curvature witness.
pub fn certify_coercivity(
    grid: &Grid,
    a_diag: &[f64],
    cached_laplacian_lambda1: Option<f64>,
) -> Result<CoercivityReport, CoercivityError> {
    let min_a = a_diag.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(lam) = cached_laplacian_lambda1 {
        let bound = lam + min_a;
        if bound > tolerances::COERCIVITY_MARGIN {
            return Ok(CoercivityReport {
                coercive: true,
                lambda_min: bound,
                method: "variational-bound",
            });
        }
    }
    match smallest_eigenvalue(grid, a_diag) {
        Ok(lambda) => Ok(CoercivityReport {
            coercive: lambda > tolerances::COERCIVITY_MARGIN,
            lambda_min: lambda,
            method: "inverse-power",
        }),
        Err(CgError::IndefiniteOperator { curvature, .. }) => Ok(CoercivityReport {
            coercive: false,
            lambda_min: curvature,
            method: "cg-negative-curvature",
        }),
        Err(e) => Err(CoercivityError::Inconclusive(e)),
    }
}
