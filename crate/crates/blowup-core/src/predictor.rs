// SPDX-License-Identifier: MIT OR Apache-2.0

//! Blow-up rate prediction from a certified bubble configuration.
//!
//! At a configuration where the lowest interaction eigenvalue and its
//! position gradient vanish, the solution family concentrates with limit
//! profile 𝒢(x) = 4π√3 Σ_i Λ_i G_a(x_i, x), where Λ is the Perron weight
//! vector scaled to Λ₁ = 1. The concentration speed at each point is
//!
//!   rate_i = 12π²√3 · Λ_i^{-2} · Σ_j a(x_j)Λ_j⁴ / ∫_Ω V𝒢² dx,
//!
//! finite when numerator and denominator are both nonzero, and degenerate
//! (zero, infinite, or indeterminate) otherwise. This module evaluates the
//! profile, the coupling functional Q_V(y) = ∫ V·𝒢·G_a(·,y), the rates,
//! and the per-point residual of the first-order matching identity
//! ε·Q_V(x_i) = -4π√3(M·λ)_i + 3π·a(x_i)λ_iμ_i.
//!
//! Integrands here carry point singularities (1/r from each profile pole,
//! 1/r² where two poles meet). Each is integrated by subtracting the local
//! model (c₂/r² + c₁/r)·χ(r/ρ) with a C² cutoff χ and adding back its
//! closed-form integral 4π(c₂ρ/2 + c₁ρ²/7); the lattice sum only ever sees
//! the bounded remainder.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::green::{GreenContext, GreenError, GreenField};
use crate::interaction::{
    self, BubbleConfiguration, InteractionError, InteractionSpectrum,
};
use crate::interp::LatticeField;
use crate::potential::Potential;
use crate::profiles::SQRT_3;
use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error(
        "configuration is not certified: |rho| = {rho:.3e} (needs < {rho_tol:.1e}), \
         |grad rho| = {grad_norm:.3e} (needs < {grad_tol:.1e})"
    )]
    NotCertified {
        rho: f64,
        grad_norm: f64,
        rho_tol: f64,
        grad_tol: f64,
    },
    #[error("evaluation point {y:?} is not a configuration point")]
    PointNotInConfiguration { y: [f64; 3] },
    #[error("invalid scaling inputs: {reason}")]
    InvalidScaling { reason: String },
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
}

/// Concentration speed at one bubble point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    /// Signed finite limit of ε·u(x_i)².
    Finite(f64),
    /// Numerator vanishes, denominator does not.
    Zero,
    /// Denominator vanishes, numerator does not.
    Infinite,
    /// Both vanish; the rate formula carries no information.
    Indeterminate,
}

/// Rate prediction at a certified configuration.
#[derive(Debug, Clone)]
pub struct BlowupPrediction {
    /// The configuration with the Perron weights attached.
    pub config: BubbleConfiguration,
    /// 4π√3·Λ_i per point.
    pub limit_profile_coefficients: Vec<f64>,
    /// Q_V(x_i) per point.
    pub qv_values: Vec<f64>,
    /// Σ_j a(x_j)Λ_j⁴.
    pub numerator: f64,
    /// ∫_Ω V𝒢² dx by direct corrected quadrature.
    pub denominator: f64,
    pub rates: Vec<Rate>,
    /// Whether the finite rates are positive, as a positive concentration
    /// speed requires; the single-bubble closed form is quoted with
    /// absolute values, so a negative signed rate is reported here rather
    /// than silently flipped.
    pub sign_consistent: bool,
}

fn dist(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn boundary_distance(ctx: &GreenContext, y: [f64; 3]) -> f64 {
    match ctx.grid.spec.shape {
        crate::grid::Shape::Ball { center, radius } => radius - dist(y, center),
        crate::grid::Shape::Box { lo, hi } => {
            let mut d = f64::INFINITY;
            for a in 0..3 {
                d = d.min(y[a] - lo[a]).min(hi[a] - y[a]);
            }
            d
        }
    }
}

fn profile_weights(config: &BubbleConfiguration) -> Vec<f64> {
    config
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0; config.points.len()])
}

fn solve_fields(
    ctx: &GreenContext,
    config: &BubbleConfiguration,
) -> Result<Vec<Arc<GreenField>>, GreenError> {
    config.points.iter().map(|&p| ctx.solve_green(p)).collect()
}

/// C² cutoff: 1 at 0, 0 from 1 on, with χ' = χ'' = 0 at both ends.
/// Moments: ∫₀¹ χ du = 1/2, ∫₀¹ uχ du = 1/7.
fn chi(u: f64) -> f64 {
    if u >= 1.0 {
        return 0.0;
    }
    1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// One point singularity of an integrand: c₂/r² + c₁/r under the cutoff
/// radius `rho`.
struct PointSingularity {
    center: [f64; 3],
    c2: f64,
    c1: f64,
    rho: f64,
}

/// Cutoff radius around one configuration point: a few cells, but inside
/// the domain and clear of the other points.
fn cutoff_radius(ctx: &GreenContext, points: &[[f64; 3]], i: usize) -> f64 {
    let h_max = ctx.grid.h.iter().copied().fold(0.0, f64::max);
    let mut rho = (8.0 * h_max).min(0.9 * boundary_distance(ctx, points[i]));
    for (j, &p) in points.iter().enumerate() {
        if j != i {
            rho = rho.min(0.45 * dist(points[i], p));
        }
    }
    rho
}

/// Lattice quadrature of `integrand` with the listed singular models
/// subtracted and restored analytically. Nodes within a quarter cell of a
/// singular center are dropped; the remainder is bounded there, so the
/// omission costs O(h³).
fn corrected_nodal_integral<F>(
    ctx: &GreenContext,
    integrand: F,
    singularities: &[PointSingularity],
) -> f64
where
    F: Fn(usize, [f64; 3]) -> f64,
{
    let grid = ctx.grid;
    let h_max = grid.h.iter().copied().fold(0.0, f64::max);
    let mut sum = 0.0;
    'nodes: for m in 0..grid.n_inside() {
        let z = grid.point_of_rank(m);
        for s in singularities {
            if dist(z, s.center) < 0.25 * h_max {
                continue 'nodes;
            }
        }
        let mut value = integrand(m, z);
        for s in singularities {
            let r = dist(z, s.center);
            value -= (s.c2 / (r * r) + s.c1 / r) * chi(r / s.rho);
        }
        sum += value;
    }
    let mut total = sum * grid.cell_volume();
    for s in singularities {
        total += 4.0 * PI * (s.c2 * s.rho / 2.0 + s.c1 * s.rho * s.rho / 7.0);
    }
    total
}

/// Regular value of 𝒢 at configuration point `i`: the pole of G_a(x_i,·)
/// is dropped, every other term is evaluated.
fn profile_regular_at(
    fields: &[Arc<GreenField>],
    weights: &[f64],
    points: &[[f64; 3]],
    i: usize,
) -> f64 {
    let mut s = -weights[i] * fields[i].robin_value;
    for j in 0..fields.len() {
        if j != i {
            s += weights[j] * fields[j].g_at(points[i]);
        }
    }
    4.0 * PI * SQRT_3 * s
}

/// Samples the limit profile 𝒢 = 4π√3 Σ_i Λ_i G_a(x_i, ·) on the grid.
///
/// The profile is singular at the configuration points; a node landing
/// within a quarter cell of one carries only the regular part there (the
/// pole of that point's own Green function is dropped). Boundary values
/// of the returned field are exactly zero.
///
/// # Errors
///
/// As the Green solver.
pub fn limit_profile(
    ctx: &GreenContext,
    config: &BubbleConfiguration,
) -> Result<LatticeField, PredictorError> {
    let weights = profile_weights(config);
    let fields = solve_fields(ctx, config)?;
    let grid = ctx.grid;
    let h_max = grid.h.iter().copied().fold(0.0, f64::max);

    let mut total = vec![0.0; grid.n_inside()];
    for (i, field) in fields.iter().enumerate() {
        let nodal = field.nodal_g(grid);
        for (m, t) in total.iter_mut().enumerate() {
            let z = grid.point_of_rank(m);
            let r = dist(z, config.points[i]);
            let g = if r < 0.25 * h_max {
                -field.h_at(z)
            } else {
                nodal[m]
            };
            *t += 4.0 * PI * SQRT_3 * weights[i] * g;
        }
    }
    Ok(LatticeField::from_rank_values(grid, &total, |_| 0.0))
}

/// Q_V(y) = ∫_Ω V·𝒢·G_a(·, y) dx for a configuration point y.
///
/// The integrand has a 1/r² singularity at y (both factors are singular
/// there) and 1/r singularities at the other configuration points; each
/// is handled by local model subtraction.
///
/// # Errors
///
/// [`PredictorError::PointNotInConfiguration`] when `y` is not one of the
/// configuration points; otherwise as the Green solver.
pub fn qv_functional(
    ctx: &GreenContext,
    v: &Potential,
    config: &BubbleConfiguration,
    y: [f64; 3],
) -> Result<f64, PredictorError> {
    let points = &config.points;
    let i0 = points
        .iter()
        .position(|&p| dist(p, y) <= tolerances::SOURCE_ROUND)
        .ok_or(PredictorError::PointNotInConfiguration { y })?;

    let weights = profile_weights(config);
    let fields = solve_fields(ctx, config)?;
    let grid = ctx.grid;
    let phi_y = fields[i0].robin_value;

    // Nodal factors: 𝒢 and G(·,y).
    let mut profile = vec![0.0; grid.n_inside()];
    for (i, field) in fields.iter().enumerate() {
        let nodal = field.nodal_g(grid);
        for (m, t) in profile.iter_mut().enumerate() {
            *t += 4.0 * PI * SQRT_3 * weights[i] * nodal[m];
        }
    }
    let g_y = fields[i0].nodal_g(grid);

    let mut singularities = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        let rho = cutoff_radius(ctx, points, i);
        if i == i0 {
            // V(y)·(√3Λ/r + 𝒢_reg)(Γ(r) - φ(y)).
            let reg = profile_regular_at(&fields, &weights, points, i0);
            singularities.push(PointSingularity {
                center: p,
                c2: v.eval(y) * SQRT_3 * weights[i0] / (4.0 * PI),
                c1: v.eval(y) * (reg / (4.0 * PI) - SQRT_3 * weights[i0] * phi_y),
                rho,
            });
        } else {
            // V(x_i)·(√3Λ_i/r)·G(x_i, y), with G(·,y) smooth at x_i.
            singularities.push(PointSingularity {
                center: p,
                c2: 0.0,
                c1: v.eval(p) * SQRT_3 * weights[i] * fields[i0].g_at(p),
                rho,
            });
        }
    }

    Ok(corrected_nodal_integral(
        ctx,
        |m, z| v.eval(z) * profile[m] * g_y[m],
        &singularities,
    ))
}

/// Smooth half-step cutoff: 1 up to u = 1/2, quintic descent to 0 at 1.
fn half_step(u: f64) -> f64 {
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let t = 2.0 * u - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Radial model of the profile around one of its poles: the pole's own
/// Green function modeled as Γ(r) - φ + a(x_i)r/(8π), scaled by 4π√3Λ_i,
/// plus the other poles' contribution frozen at x_i.
struct ProfileModel {
    center: [f64; 3],
    coef: f64,
    phi: f64,
    kink: f64,
    frozen_rest: f64,
    rho: f64,
    v_at: f64,
}

impl ProfileModel {
    fn eval(&self, r: f64) -> f64 {
        self.coef * (1.0 / (4.0 * PI * r) - self.phi + self.kink * r) + self.frozen_rest
    }
}

/// ∫_Ω V𝒢² dx by direct quadrature: around each pole the squared radial
/// model times the cutoff is subtracted from the lattice sum (leaving a
/// bounded summand) and its own integral restored by one-dimensional
/// adaptive quadrature. Deliberately a different estimator from the
/// template subtraction inside [`qv_functional`], so agreement of
/// Σ 4π√3 Λ_i Q_V(x_i) with this value is a two-path consistency check.
fn profile_square_integral(
    ctx: &GreenContext,
    v: &Potential,
    config: &BubbleConfiguration,
    fields: &[Arc<GreenField>],
    weights: &[f64],
) -> Result<f64, PredictorError> {
    let grid = ctx.grid;
    let points = &config.points;
    let h_max = grid.h.iter().copied().fold(0.0, f64::max);

    let mut profile = vec![0.0; grid.n_inside()];
    for (i, field) in fields.iter().enumerate() {
        let nodal = field.nodal_g(grid);
        for (m, t) in profile.iter_mut().enumerate() {
            *t += 4.0 * PI * SQRT_3 * weights[i] * nodal[m];
        }
    }

    let mut models = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        let mut frozen_rest = 0.0;
        for j in 0..points.len() {
            if j != i {
                frozen_rest += 4.0 * PI * SQRT_3 * weights[j] * fields[j].g_at(p);
            }
        }
        models.push(ProfileModel {
            center: p,
            coef: 4.0 * PI * SQRT_3 * weights[i],
            phi: fields[i].robin_value,
            kink: ctx.potential.eval(p) / (8.0 * PI),
            frozen_rest,
            rho: cutoff_radius(ctx, points, i),
            v_at: v.eval(p),
        });
    }

    let mut sum = 0.0;
    'nodes: for m in 0..grid.n_inside() {
        let z = grid.point_of_rank(m);
        for md in &models {
            if dist(z, md.center) < 0.25 * h_max {
                continue 'nodes;
            }
        }
        let mut value = v.eval(z) * profile[m] * profile[m];
        for md in &models {
            let r = dist(z, md.center);
            if r < md.rho {
                let s = md.eval(r);
                value -= md.v_at * s * s * half_step(r / md.rho);
            }
        }
        sum += value;
    }

    let mut total = sum * grid.cell_volume();
    for md in &models {
        let core = crate::quad::integrate(
            |r| {
                if r == 0.0 {
                    return md.v_at * md.coef * md.coef / (4.0 * PI);
                }
                let s = md.eval(r);
                4.0 * PI * r * r * md.v_at * s * s * half_step(r / md.rho)
            },
            0.0,
            md.rho,
            1e-12,
            1e-15,
        )
        .map_err(GreenError::from)?;
        total += core;
    }
    Ok(total)
}

/// Computes the per-point concentration rates at a certified configuration.
///
/// The Perron weights of the interaction matrix become the profile
/// weights Λ; the numerator is Σ_j a(x_j)Λ_j⁴ and the denominator the
/// direct quadrature of ∫V𝒢². Degenerate numerator/denominator pairs
/// produce tagged sentinel rates, never floating-point infinities.
///
/// # Errors
///
/// [`PredictorError::NotCertified`] unless |ρ| and |∇ρ| are under the
/// search tolerances; otherwise as the interaction machinery.
pub fn blowup_rate(
    ctx: &GreenContext,
    v: &Potential,
    config: &BubbleConfiguration,
) -> Result<BlowupPrediction, PredictorError> {
    let spectrum = interaction::build_matrix(ctx, config)?;
    let mtildes = [
        interaction::build_mtilde(ctx, config, 0)?,
        interaction::build_mtilde(ctx, config, 1)?,
        interaction::build_mtilde(ctx, config, 2)?,
    ];
    let grad = interaction::rho_gradient(&spectrum, &mtildes)?;
    let grad_norm = grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
    if spectrum.rho.abs() >= tolerances::FIND_RHO_TOL || grad_norm >= tolerances::FIND_GRAD_TOL {
        return Err(PredictorError::NotCertified {
            rho: spectrum.rho,
            grad_norm,
            rho_tol: tolerances::FIND_RHO_TOL,
            grad_tol: tolerances::FIND_GRAD_TOL,
        });
    }

    let weights = spectrum.perron.clone();
    let certified = BubbleConfiguration::new(config.points.clone())?
        .with_weights(weights.clone())?;
    let fields = solve_fields(ctx, &certified)?;

    let mut qv_values = Vec::with_capacity(certified.points.len());
    for &p in &certified.points {
        qv_values.push(qv_functional(ctx, v, &certified, p)?);
    }

    let mut numerator = 0.0;
    let mut numerator_scale = 0.0;
    for (j, &p) in certified.points.iter().enumerate() {
        let term = ctx.potential.eval(p) * weights[j].powi(4);
        numerator += term;
        numerator_scale += term.abs();
    }
    let denominator = profile_square_integral(ctx, v, &certified, &fields, &weights)?;
    let denominator_scale: f64 = qv_values
        .iter()
        .zip(&weights)
        .map(|(q, w)| 4.0 * PI * SQRT_3 * (q * w).abs())
        .sum();

    let eps = tolerances::RATE_SENTINEL_EPS;
    let num_zero = numerator.abs() <= eps * numerator_scale;
    let den_zero = denominator.abs() <= eps * denominator_scale;
    let rates: Vec<Rate> = match (num_zero, den_zero) {
        (false, false) => weights
            .iter()
            .map(|w| Rate::Finite(12.0 * PI * PI * SQRT_3 * numerator / (denominator * w * w)))
            .collect(),
        (true, false) => vec![Rate::Zero; weights.len()],
        (false, true) => vec![Rate::Infinite; weights.len()],
        (true, true) => vec![Rate::Indeterminate; weights.len()],
    };
    let sign_consistent = match rates[0] {
        Rate::Finite(r) => r > 0.0,
        _ => true,
    };

    Ok(BlowupPrediction {
        limit_profile_coefficients: weights
            .iter()
            .map(|w| 4.0 * PI * SQRT_3 * w)
            .collect(),
        config: certified,
        qv_values,
        numerator,
        denominator,
        rates,
        sign_consistent,
    })
}

/// Per-point residual of the first-order matching identity
/// ε·Q_V(x_i) = -4π√3(M·λ)_i + 3π·a(x_i)λ_iμ_i (higher-order terms
/// dropped), returned as LHS - RHS.
///
/// # Errors
///
/// [`PredictorError::InvalidScaling`] unless μ_i > 0, λ₁ = 1 and
/// λ_i = (μ_i/μ₁)^{1/2} to 1e-12; otherwise as the interaction machinery.
pub fn expansion_residual(
    ctx: &GreenContext,
    v: &Potential,
    config: &BubbleConfiguration,
    lambda_eps: &[f64],
    mu_eps: &[f64],
    eps: f64,
) -> Result<Vec<f64>, PredictorError> {
    let n = config.points.len();
    if lambda_eps.len() != n || mu_eps.len() != n {
        return Err(PredictorError::InvalidScaling {
            reason: format!(
                "expected {n} scaling entries, got {} lambdas and {} mus",
                lambda_eps.len(),
                mu_eps.len()
            ),
        });
    }
    for (i, &mu) in mu_eps.iter().enumerate() {
        if !(mu > 0.0) {
            return Err(PredictorError::InvalidScaling {
                reason: format!("mu[{i}] = {mu} must be positive"),
            });
        }
    }
    if (lambda_eps[0] - 1.0).abs() > 1e-12 {
        return Err(PredictorError::InvalidScaling {
            reason: format!("lambda[0] = {} must be 1", lambda_eps[0]),
        });
    }
    for i in 0..n {
        let expected = (mu_eps[i] / mu_eps[0]).sqrt();
        if (lambda_eps[i] - expected).abs() > 1e-12 {
            return Err(PredictorError::InvalidScaling {
                reason: format!(
                    "lambda[{i}] = {} inconsistent with (mu_{i}/mu_0)^(1/2) = {expected}",
                    lambda_eps[i]
                ),
            });
        }
    }

    let spectrum: InteractionSpectrum = interaction::build_matrix(ctx, config)?;
    let mut residuals = Vec::with_capacity(n);
    for i in 0..n {
        let lhs = eps * qv_functional(ctx, v, config, config.points[i])?;
        let m_lambda: f64 = (0..n).map(|j| spectrum.matrix[i][j] * lambda_eps[j]).sum();
        let rhs = -4.0 * PI * SQRT_3 * m_lambda
            + 3.0 * PI * ctx.potential.eval(config.points[i]) * lambda_eps[i] * mu_eps[i];
        residuals.push(lhs - rhs);
    }
    Ok(residuals)
}
