// SPDX-License-Identifier: MIT OR Apache-2.0

//! Interaction matrices of multibubble configurations and the search for
//! blow-up configurations.
//!
//! For n interior points x_1..x_n the interaction matrix is
//!
//!   m_ii = φ_a(x_i),   m_ij = -G_a(x_i, x_j)  (i ≠ j),
//!
//! a symmetric matrix with strictly negative off-diagonal entries. Its
//! lowest eigenvalue ρ_a(x) is simple with an entrywise positive (Perron)
//! eigenvector Λ, normalized here to Λ_1 = 1. The position gradient of
//! ρ_a follows from first-order eigenvalue perturbation: with the
//! unit-norm eigenvector Λ̂,
//!
//!   ∂ρ_a/∂(x_i)_l = Λ̂_i (M̃^l Λ̂)_i,
//!
//! where M̃^l has diagonal ∂_l φ_a(x_i) and off-diagonal -2∂_l^x G_a(x_i, x_j).
//!
//! Blow-up configurations are zeros of the square system ρ_a = 0, ∇ρ_a = 0
//! in the 3n+1 unknowns (τ, x) with a = τ·a_base, solved by damped Newton
//! with a finite-difference Jacobian.
//!
//! Discretely, the off-diagonal entries average the two available Green
//! evaluations, m_ij = -(G(x_i; x_j) + G(x_j; x_i))/2, and the gradient
//! matrices differentiate both halves (one through the field interpolant,
//! one through source-shifted solves), so that the analytic gradient is
//! consistent with finite differences of the discrete ρ_a itself to
//! quadrature accuracy rather than only to discretization accuracy.

use crate::eigen;
use crate::green::{self, GreenContext, GreenError, GreenField};
use crate::grid::Grid;
use crate::potential::Potential;
use crate::tolerances;
use std::sync::Arc;

/// An n-point configuration with optional weights and potential samples.
#[derive(Debug, Clone)]
pub struct BubbleConfiguration {
    pub points: Vec<[f64; 3]>,
    /// Perron weights, first entry 1, when attached.
    pub weights: Option<Vec<f64>>,
    pub a_values: Vec<f64>,
    pub v_values: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum InteractionError {
    #[error("degenerate configuration: {reason}")]
    DegenerateConfiguration { reason: String },
    #[error("lowest eigenvalue is not numerically simple (gap {gap:.3e})")]
    SpectralDegeneracy { gap: f64 },
    #[error("Perron entry {index} is not strictly positive ({value:.3e})")]
    PerronNotPositive { index: usize, value: f64 },
    #[error(
        "Newton stagnated after {iterations} iterations (residual norm {residual:.3e})"
    )]
    NewtonStagnation {
        iterations: usize,
        residual: f64,
        trace: NewtonTrace,
    },
    #[error("continuation left the coercive range at tau = {tau:.6}")]
    ContinuationOutOfRange { tau: f64 },
    #[error(transparent)]
    Green(#[from] GreenError),
}

impl BubbleConfiguration {
    /// Validates pairwise distinctness and the point-count bound.
    ///
    /// # Errors
    ///
    /// [`InteractionError::DegenerateConfiguration`] on empty input,
    /// more than 16 points, or coincident points.
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, InteractionError> {
        if points.is_empty() {
            return Err(InteractionError::DegenerateConfiguration {
                reason: "no points".into(),
            });
        }
        if points.len() > 16 {
            return Err(InteractionError::DegenerateConfiguration {
                reason: format!("{} points; the dense eigensolver caps at 16", points.len()),
            });
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if dist(points[i], points[j]) == 0.0 {
                    return Err(InteractionError::DegenerateConfiguration {
                        reason: format!("points {i} and {j} coincide"),
                    });
                }
            }
        }
        Ok(Self {
            points,
            weights: None,
            a_values: Vec::new(),
            v_values: Vec::new(),
        })
    }

    /// Attaches weights, which must be strictly positive with first entry 1.
    ///
    /// # Errors
    ///
    /// [`InteractionError::DegenerateConfiguration`] on length mismatch or
    /// invalid entries.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, InteractionError> {
        if weights.len() != self.points.len() {
            return Err(InteractionError::DegenerateConfiguration {
                reason: format!(
                    "{} weights for {} points",
                    weights.len(),
                    self.points.len()
                ),
            });
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(InteractionError::DegenerateConfiguration {
                reason: "weights must be strictly positive".into(),
            });
        }
        if (weights[0] - 1.0).abs() > 1e-12 {
            return Err(InteractionError::DegenerateConfiguration {
                reason: format!("first weight must be 1, got {}", weights[0]),
            });
        }
        self.weights = Some(weights);
        Ok(self)
    }

    /// Fills the potential sample fields from `a` and `v`.
    pub fn annotate(&mut self, a: &Potential, v: &Potential) {
        self.a_values = self.points.iter().map(|&p| a.eval(p)).collect();
        self.v_values = self.points.iter().map(|&p| v.eval(p)).collect();
    }

    /// Smallest pairwise distance; infinite for a single point.
    #[must_use]
    pub fn min_separation(&self) -> f64 {
        let mut s = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                s = s.min(dist(self.points[i], self.points[j]));
            }
        }
        s
    }
}

fn dist(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Eigen-data of an interaction matrix.
#[derive(Debug, Clone)]
pub struct InteractionSpectrum {
    pub matrix: Vec<Vec<f64>>,
    /// Lowest eigenvalue ρ_a(x).
    pub rho: f64,
    /// Perron eigenvector scaled to first entry 1.
    pub perron: Vec<f64>,
    /// Position gradient of ρ_a, laid out as 3i + axis; empty until
    /// computed by [`rho_gradient`].
    pub gradient: Vec<f64>,
    /// Distance to the second eigenvalue; infinite for n = 1.
    pub spectral_gap: f64,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Matching unit eigenvectors.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl InteractionSpectrum {
    /// |MΛ - ρΛ| / |Λ| for an arbitrary scaling of the eigenvector.
    #[must_use]
    pub fn eigen_residual(&self, candidate: &[f64]) -> f64 {
        let n = candidate.len();
        let mut num = 0.0;
        for i in 0..n {
            let mut r = -self.rho * candidate[i];
            for j in 0..n {
                r += self.matrix[i][j] * candidate[j];
            }
            num += r * r;
        }
        let den: f64 = candidate.iter().map(|c| c * c).sum();
        (num / den).sqrt()
    }
}

fn check_separation(grid: &Grid, config: &BubbleConfiguration) -> Result<(), InteractionError> {
    let h_max = grid.h.iter().copied().fold(0.0, f64::max);
    let min_sep = tolerances::MIN_SEPARATION_CELLS * h_max;
    let sep = config.min_separation();
    if sep <= min_sep {
        return Err(InteractionError::DegenerateConfiguration {
            reason: format!(
                "minimum separation {sep:.4} is under {} cells ({min_sep:.4})",
                tolerances::MIN_SEPARATION_CELLS
            ),
        });
    }
    Ok(())
}

fn solve_fields(
    ctx: &GreenContext,
    config: &BubbleConfiguration,
) -> Result<Vec<Arc<GreenField>>, InteractionError> {
    config
        .points
        .iter()
        .map(|&p| ctx.solve_green(p).map_err(InteractionError::from))
        .collect()
}

/// Builds the interaction matrix of a configuration and decomposes it.
///
/// # Errors
///
/// Degenerate configurations (separation under four cells), Green-solver
/// failures, a numerically non-simple lowest eigenvalue, or a lowest
/// eigenvector that cannot be scaled entrywise positive (a numerical
/// fault for this matrix class).
pub fn build_matrix(
    ctx: &GreenContext,
    config: &BubbleConfiguration,
) -> Result<InteractionSpectrum, InteractionError> {
    check_separation(ctx.grid, config)?;
    let n = config.points.len();
    let fields = solve_fields(ctx, config)?;

    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = fields[i].robin_value;
    }
    for i in 0..n {
        for j in i + 1..n {
            let g = 0.5
                * (fields[j].g_at(config.points[i]) + fields[i].g_at(config.points[j]));
            if g <= 0.0 {
                return Err(InteractionError::DegenerateConfiguration {
                    reason: format!("nonpositive Green value {g:.3e} between points {i}, {j}"),
                });
            }
            m[i][j] = -g;
            m[j][i] = -g;
        }
    }

    let eig = eigen::symmetric_eigen(&m);
    let rho = eig.values[0];
    let spectral_gap = if n == 1 {
        f64::INFINITY
    } else {
        eig.values[1] - rho
    };
    if spectral_gap < tolerances::SPECTRAL_GAP_MIN {
        return Err(InteractionError::SpectralDegeneracy { gap: spectral_gap });
    }

    let mut perron = eig.vectors[0].clone();
    let lead = (0..n)
        .max_by(|&i, &j| perron[i].abs().total_cmp(&perron[j].abs()))
        .unwrap();
    if perron[lead] < 0.0 {
        for p in &mut perron {
            *p = -*p;
        }
    }
    if let Some(bad) = (0..n).find(|&i| perron[i] <= 0.0) {
        return Err(InteractionError::PerronNotPositive {
            index: bad,
            value: perron[bad],
        });
    }
    let first = perron[0];
    for p in &mut perron {
        *p /= first;
    }

    Ok(InteractionSpectrum {
        matrix: m,
        rho,
        perron,
        gradient: Vec::new(),
        spectral_gap,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
    })
}

/// Builds M̃^axis: diagonal ∂_axis φ_a(x_i), off-diagonal
/// -2∂_axis^x G_a(x_i, x_j). Generally not symmetric.
///
/// Each off-diagonal entry combines the interpolant gradient of the field
/// sourced at x_j with a Richardson source-shift difference of the field
/// sourced at x_i; the shifted solves coincide with the Robin-gradient
/// probes and come from cache.
///
/// # Errors
///
/// As [`build_matrix`].
pub fn build_mtilde(
    ctx: &GreenContext,
    config: &BubbleConfiguration,
    axis: usize,
) -> Result<Vec<Vec<f64>>, InteractionError> {
    assert!(axis < 3, "axis index {axis}");
    check_separation(ctx.grid, config)?;
    let n = config.points.len();
    let fields = solve_fields(ctx, config)?;
    let h = ctx.grid.h[axis];

    let mut mt = vec![vec![0.0; n]; n];
    for i in 0..n {
        mt[i][i] = ctx.robin_gradient(config.points[i])?[axis];
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let grad_interp = ctx.green_gradient_x(&fields[j], config.points[i])?[axis];
            let probe = |s: f64| -> Result<f64, GreenError> {
                let mut p = config.points[i];
                p[axis] += s;
                Ok(ctx.solve_green(p)?.g_at(config.points[j]))
            };
            let d2 = (probe(2.0 * h)? - probe(-2.0 * h)?) / (4.0 * h);
            let d4 = (probe(4.0 * h)? - probe(-4.0 * h)?) / (8.0 * h);
            let grad_source = (4.0 * d2 - d4) / 3.0;
            mt[i][j] = -(grad_interp + grad_source);
        }
    }
    Ok(mt)
}

/// First-order perturbation gradient of the lowest eigenvalue:
/// ∂ρ/∂(x_i)_l = Λ̂_i (M̃^l Λ̂)_i with the unit-norm Perron vector Λ̂.
/// Layout of the result: index 3i + l.
///
/// # Errors
///
/// [`InteractionError::SpectralDegeneracy`] when the gap is below the
/// simplicity threshold.
pub fn rho_gradient(
    spectrum: &InteractionSpectrum,
    mtildes: &[Vec<Vec<f64>>; 3],
) -> Result<Vec<f64>, InteractionError> {
    if spectrum.spectral_gap < tolerances::SPECTRAL_GAP_MIN {
        return Err(InteractionError::SpectralDegeneracy {
            gap: spectrum.spectral_gap,
        });
    }
    let n = spectrum.perron.len();
    let norm: f64 = spectrum.perron.iter().map(|p| p * p).sum::<f64>().sqrt();
    let unit: Vec<f64> = spectrum.perron.iter().map(|p| p / norm).collect();
    let mut grad = vec![0.0; 3 * n];
    for (l, mt) in mtildes.iter().enumerate() {
        for i in 0..n {
            let row: f64 = (0..n).map(|j| mt[i][j] * unit[j]).sum();
            grad[3 * i + l] = unit[i] * row;
        }
    }
    Ok(grad)
}

/// Whether the matrix is positive semidefinite up to roundoff slack.
#[must_use]
pub fn positive_semidefinite_check(spectrum: &InteractionSpectrum) -> bool {
    spectrum.rho >= -tolerances::POSITIVE_SEMIDEFINITE_TOL
}

/// One accepted Newton state of the configuration search.
#[derive(Debug, Clone)]
pub struct NewtonIterate {
    pub iteration: usize,
    pub tau: f64,
    pub rho: f64,
    /// Sup norm of ∇ρ.
    pub grad_norm: f64,
    /// Norm of the accepted update (0 for the initial state).
    pub step_norm: f64,
    /// Accepted damping factor (0 for the initial state).
    pub damping: f64,
}

#[derive(Debug, Clone, Default)]
pub struct NewtonTrace {
    pub steps: Vec<NewtonIterate>,
}

/// Result of a successful blow-up configuration search.
#[derive(Debug, Clone)]
pub struct BlowupSolution {
    pub tau: f64,
    pub config: BubbleConfiguration,
    pub spectrum: InteractionSpectrum,
    pub residual_rho: f64,
    /// Sup norm of ∇ρ at the solution.
    pub residual_grad: f64,
    pub trace: NewtonTrace,
}

struct ResidualData {
    /// [ρ, ∂ρ/∂(x_0)_0, ..., ∂ρ/∂(x_{n-1})_2].
    f: Vec<f64>,
    spectrum: InteractionSpectrum,
}

fn residual(
    ctx: &GreenContext,
    points: &[[f64; 3]],
) -> Result<ResidualData, InteractionError> {
    let config = BubbleConfiguration::new(points.to_vec())?;
    let mut spectrum = build_matrix(ctx, &config)?;
    let mtildes = [
        build_mtilde(ctx, &config, 0)?,
        build_mtilde(ctx, &config, 1)?,
        build_mtilde(ctx, &config, 2)?,
    ];
    let grad = rho_gradient(&spectrum, &mtildes)?;
    let mut f = Vec::with_capacity(1 + grad.len());
    f.push(spectrum.rho);
    f.extend_from_slice(&grad);
    spectrum.gradient = grad;
    Ok(ResidualData { f, spectrum })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Dense solve with partial pivoting; `None` when a pivot collapses.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut s = b[row];
        for k in row + 1..m {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

const ARMIJO_SLOPE: f64 = 1e-4;
const LINE_SEARCH_HALVINGS: usize = 8;

/// Solves ρ_{τ·a_base}(x) = 0, ∇ρ_{τ·a_base}(x) = 0 for (τ, x) by damped
/// Newton with a forward-difference Jacobian (reused across a few
/// iterations) and backtracking line search on the residual norm.
///
/// # Errors
///
/// [`InteractionError::ContinuationOutOfRange`] when every admissible step
/// leaves the coercive τ-range, [`InteractionError::NewtonStagnation`]
/// (carrying the trace) when the residual stops decreasing, and any
/// underlying solver error.
pub fn find_blowup_configuration(
    grid: &Grid,
    a_base: &Potential,
    init: &BubbleConfiguration,
    tau_init: f64,
) -> Result<BlowupSolution, InteractionError> {
    let n = init.points.len();
    let dim = 3 * n + 1;
    let lambda1 = green::laplacian_lambda1(grid).map_err(GreenError::from)?;
    let diam = grid.spec.shape.diameter();

    let make_ctx = |tau: f64| -> Result<GreenContext<'_>, InteractionError> {
        GreenContext::new(grid, a_base.scaled(tau), Some(lambda1)).map_err(|e| match e {
            GreenError::NotCoercive { .. } => InteractionError::ContinuationOutOfRange { tau },
            other => other.into(),
        })
    };

    let mut tau = tau_init;
    let mut points = init.points.clone();
    let mut ctx = make_ctx(tau)?;
    let mut cur = residual(&ctx, &points)?;
    let mut trace = NewtonTrace::default();
    trace.steps.push(NewtonIterate {
        iteration: 0,
        tau,
        rho: cur.f[0],
        grad_norm: sup(&cur.f[1..]),
        step_norm: 0.0,
        damping: 0.0,
    });

    let mut jacobian: Option<Vec<Vec<f64>>> = None;
    let mut jacobian_age = 0usize;

    // Converged iterates keep polishing until ρ clears the semidefiniteness
    // slack (one extra Newton step squares the residual), returning early
    // only when the line search cannot improve any further.
    let finish = |tau: f64,
                  points: Vec<[f64; 3]>,
                  cur: ResidualData,
                  ctx: &GreenContext,
                  trace: NewtonTrace|
     -> Result<BlowupSolution, InteractionError> {
        let mut config =
            BubbleConfiguration::new(points)?.with_weights(cur.spectrum.perron.clone())?;
        config.a_values = config
            .points
            .iter()
            .map(|&p| ctx.potential.eval(p))
            .collect();
        Ok(BlowupSolution {
            tau,
            residual_rho: cur.f[0],
            residual_grad: sup(&cur.f[1..]),
            config,
            spectrum: cur.spectrum,
            trace,
        })
    };
    let meets_tolerances = |f: &[f64]| {
        f[0].abs() < tolerances::FIND_RHO_TOL && sup(&f[1..]) < tolerances::FIND_GRAD_TOL
    };

    for iter in 1..=tolerances::FIND_MAX_ITER {
        if meets_tolerances(&cur.f)
            && cur.f[0].abs() <= 0.1 * tolerances::POSITIVE_SEMIDEFINITE_TOL
        {
            return finish(tau, points, cur, &ctx, trace);
        }

        if jacobian.is_none() || jacobian_age >= tolerances::FIND_JACOBIAN_REUSE {
            let mut jac = vec![vec![0.0; dim]; dim];
            let dtau = if tau == 0.0 {
                tolerances::FIND_FD_TAU_FACTOR
            } else {
                tolerances::FIND_FD_TAU_FACTOR * tau.abs()
            };
            let ctx_tau = make_ctx(tau + dtau)?;
            let f_tau = residual(&ctx_tau, &points)?.f;
            for r in 0..dim {
                jac[r][0] = (f_tau[r] - cur.f[r]) / dtau;
            }
            let dx = tolerances::FIND_FD_POINT_FACTOR * diam;
            for i in 0..n {
                for l in 0..3 {
                    let mut shifted = points.clone();
                    shifted[i][l] += dx;
                    let f_c = residual(&ctx, &shifted)?.f;
                    for r in 0..dim {
                        jac[r][1 + 3 * i + l] = (f_c[r] - cur.f[r]) / dx;
                    }
                }
            }
            jacobian = Some(jac);
            jacobian_age = 0;
        }

        let step = match solve_linear(
            jacobian.clone().unwrap(),
            cur.f.iter().map(|v| -v).collect(),
        ) {
            Some(s) => s,
            None => {
                return Err(InteractionError::NewtonStagnation {
                    iterations: iter,
                    residual: l2(&cur.f),
                    trace,
                })
            }
        };

        let f_norm = l2(&cur.f);
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut out_of_range = None;
        for _ in 0..LINE_SEARCH_HALVINGS {
            let tau_trial = tau + alpha * step[0];
            let mut pts_trial = points.clone();
            for i in 0..n {
                for l in 0..3 {
                    pts_trial[i][l] += alpha * step[1 + 3 * i + l];
                }
            }
            let attempt = make_ctx(tau_trial)
                .and_then(|c| residual(&c, &pts_trial).map(|r| (c, r)));
            match attempt {
                Ok((c, r)) if l2(&r.f) <= (1.0 - ARMIJO_SLOPE * alpha) * f_norm => {
                    accepted = Some((tau_trial, pts_trial, c, r, alpha));
                    break;
                }
                Ok(_) => {}
                Err(InteractionError::ContinuationOutOfRange { tau }) => {
                    out_of_range = Some(tau);
                }
                Err(InteractionError::DegenerateConfiguration { .. })
                | Err(InteractionError::Green(GreenError::Geometry { .. })) => {}
                Err(other) => return Err(other),
            }
            alpha *= 0.5;
        }

        match accepted {
            Some((tau_new, pts_new, ctx_new, res_new, damping)) => {
                let step_norm = damping * l2(&step);
                tau = tau_new;
                points = pts_new;
                ctx = ctx_new;
                cur = res_new;
                jacobian_age += 1;
                trace.steps.push(NewtonIterate {
                    iteration: iter,
                    tau,
                    rho: cur.f[0],
                    grad_norm: sup(&cur.f[1..]),
                    step_norm,
                    damping,
                });
            }
            None => {
                if jacobian_age > 0 {
                    // Stale quasi-Newton direction; rebuild and retry.
                    jacobian = None;
                    continue;
                }
                if meets_tolerances(&cur.f) {
                    return finish(tau, points, cur, &ctx, trace);
                }
                if let Some(t) = out_of_range {
                    return Err(InteractionError::ContinuationOutOfRange { tau: t });
                }
                return Err(InteractionError::NewtonStagnation {
                    iterations: iter,
                    residual: f_norm,
                    trace,
                });
            }
        }
    }

    if meets_tolerances(&cur.f) {
        return finish(tau, points, cur, &ctx, trace);
    }
    Err(InteractionError::NewtonStagnation {
        iterations: tolerances::FIND_MAX_ITER,
        residual: l2(&cur.f),
        trace,
    })
}
