// SPDX-License-Identifier: MIT OR Apache-2.0

//! Numerical kernels for the blow-up analysis of the critical semilinear
//! problem -Δu + a·u = u⁵ on a bounded three-dimensional domain.
//!
//! The crate is organized bottom-up:
//!
//! * [`quad`] — adaptive Gauss–Kronrod quadrature with power-law tail
//!   extrapolation for improper radial integrals.
//! * [`profiles`] — closed-form radial profiles: the standard bubble
//!   B(x) = (1 + |x|²/3)^{-1/2}, the kernel element v of the linearized
//!   operator, and the radial correction W solving -ΔW - 5WB⁴ = -B.
//! * [`grid`], [`interp`], [`cg`] — uniform-grid discretization of ball and
//!   box domains, C¹ cubic interpolation of grid fields, and a matrix-free
//!   preconditioned conjugate-gradient solver.
//! * [`potential`] — zeroth-order coefficients a(x): constants, quadratic
//!   polynomials, grid samples; coercivity certification.
//! * [`green`] — Dirichlet Green functions G_a(x,y) on grids via a
//!   regularized solve for the smooth part, Robin function φ_a and its
//!   gradient, local expansion checks, and resolvent perturbation checks.
//! * [`eigen`] — dense symmetric eigensolver (cyclic Jacobi) for the small
//!   interaction matrices.
//! * [`interaction`] — bubble interaction matrices M_a, their Perron data,
//!   Hellmann–Feynman gradients, and the Newton/continuation search for
//!   configurations with ρ_a = 0, ∇ρ_a = 0.
//! * [`linearized`] — radial modes of the operator linearized at the bubble
//!   in general dimension, log-coordinate transforms, and degree-by-degree
//!   growth certificates.
//! * [`predictor`] — limit profiles 𝒢, the singular-quadrature functional
//!   Q_V, blow-up rate predictions, and finite-ε expansion residuals.
//! * [`oracles`] — independent analytic references (method of images,
//!   radial Helmholtz solutions, exact linearized modes) used by the
//!   verification suite and the test batteries.
//! * [`verify`] — the runtime identity suite assembled from the above.

pub mod cg;
pub mod eigen;
pub mod green;
pub mod grid;
pub mod interaction;
pub mod interp;
pub mod linearized;
pub mod oracles;
pub mod predictor;
pub mod potential;
pub mod profiles;
pub mod quad;
pub mod tolerances;
