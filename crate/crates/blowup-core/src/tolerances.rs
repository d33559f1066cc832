// SPDX-License-Identifier: MIT OR Apache-2.0

//! Numerical tolerances used across the crate.
//!
//! Each constant documents why the number is what it is; solver code pulls
//! from here instead of scattering magic literals.

/// Relative residual at which the conjugate-gradient solve is declared
/// converged. The Robin-function reads downstream need ~1e-5 absolute; the
/// extra five orders keep iterative error invisible next to discretization
/// error.
pub const CG_REL_RESIDUAL: f64 = 1e-10;

/// CG iteration cap as a multiple of the cube root of the unknown count.
/// Jacobi-preconditioned CG on the 7-point Laplacian needs O(n^{1/3})
/// iterations; 20x that is a generous failure detector, not a budget.
pub const CG_ITER_FACTOR: usize = 20;

/// Margin for the smallest Ritz value in the coercivity certificate.
/// Indefiniteness shows up orders of magnitude below this; anything closer
/// to zero than 1e-8 is treated as "not provably coercive".
pub const COERCIVITY_MARGIN: f64 = 1e-8;

/// Inverse-power iterations run for the coercivity certificate.
pub const COERCIVITY_ITERATIONS: usize = 20;

/// Smallest admissible cut fraction for a boundary-cut grid arm. Smaller
/// fractions only inflate the row diagonal (the scheme stays symmetric
/// positive definite); clamping bounds the condition number at O(1/θ).
pub const MIN_CUT_FRACTION: f64 = 1e-2;

/// Absolute tolerance of the adaptive radial quadrature, relative to the
/// accumulated integral scale. Chosen so the four closed-form profile
/// integrals reproduce at 1e-8 relative with room to spare.
pub const RADIAL_QUAD_REL_TOL: f64 = 1e-12;

/// Below this radius the cancellation-prone closed forms h(r) and β(r) of
/// the correction profile switch to their Taylor series. At r = 1e-2 the
/// truncated series is accurate to ~1e-20 relative while direct evaluation
/// still carries ~1e-12; the two branches overlap safely.
pub const PROFILE_SERIES_RADIUS: f64 = 1e-2;

/// Spectral gap below which the lowest interaction eigenvalue is declared
/// numerically non-simple.
pub const SPECTRAL_GAP_MIN: f64 = 1e-10;

/// Convergence thresholds of the blow-up configuration search:
/// |ρ_a| below `RHO_TOL` and the sup norm of ∇ρ_a below `GRAD_TOL`.
pub const FIND_RHO_TOL: f64 = 1e-8;
pub const FIND_GRAD_TOL: f64 = 1e-6;

/// Forward-difference step factors for the Newton Jacobian of the
/// configuration search: points move by 1e-5 of the domain diameter,
/// the continuation parameter by 1e-5 of its magnitude.
pub const FIND_FD_POINT_FACTOR: f64 = 1e-5;
pub const FIND_FD_TAU_FACTOR: f64 = 1e-5;

/// Newton iterations that may reuse a factorized Jacobian before a fresh
/// finite-difference Jacobian is assembled.
pub const FIND_JACOBIAN_REUSE: usize = 3;

/// Hard cap on damped Newton iterations of the configuration search.
pub const FIND_MAX_ITER: usize = 40;

/// The interaction matrix counts as positive semidefinite when its lowest
/// eigenvalue stays above minus this slack.
pub const POSITIVE_SEMIDEFINITE_TOL: f64 = 1e-10;

/// Sources are memoized after rounding coordinates to this grain; Newton
/// trial points differing by less are numerically the same solve.
pub const SOURCE_ROUND: f64 = 1e-9;

/// Minimum separation of configuration points, in grid cells. Closer pairs
/// make the off-diagonal Green evaluation meaningless at this resolution.
pub const MIN_SEPARATION_CELLS: f64 = 4.0;

/// Minimum distance of any probe or source from the domain boundary, in
/// grid cells.
pub const MIN_INTERIOR_CELLS: f64 = 2.0;

/// Weights below this threshold (relative to the numerator/denominator
/// scales involved) collapse blow-up rates to their tagged sentinels.
pub const RATE_SENTINEL_EPS: f64 = 1e-12;
