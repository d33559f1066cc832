// SPDX-License-Identifier: MIT OR Apache-2.0

//! Closed-form radial profiles of the critical problem -Δu = u⁵ in R³.
//!
//! The standard bubble is B(x) = (1 + |x|²/3)^{-1/2}, normalized so that
//! -ΔB = B⁵ with B(0) = 1. Linearizing the equation at B gives the radial
//! operator L[u] = u″ + (2/r)u′ + 5B⁴u; its two homogeneous solutions are
//!
//! * v(r) = (3 - r²)/(3 + r²)^{3/2}, regular at the origin, and
//! * z(r) = (-r⁴ + 18r² - 9)/(r·(3 + r²)^{3/2}), singular like -√3/r,
//!
//! with Wronskian normalized to r²(v z′ - v′ z) = 1. The correction profile
//! W is the unique solution of L[W] = B with W(0) = W′(0) = 0; by variation
//! of parameters it has the globally smooth closed form
//!
//!   W(r) = √3·h(r)·z(r) - (√3/2)·v(r)·β(r),
//!
//! where h(r) = -r + 2√3·arctan(r/√3) - 3r/(3 + r²) collects ∫₀ʳ vB s² ds
//! (so h′ = r²(3 - r²)/(3 + r²)²) and
//! β(r) = -r² + 24·ln((3 + r²)/3) + 72/(3 + r²) - 24 collects the second
//! variation integral. Every factor is smooth on (0, ∞): the apparent pole
//! of the integrand ψ at r = √3 cancels against the zero of v, so no
//! special handling is needed there. Near the origin h switches to its
//! Taylor series (five terms below r = 1e-2) because the direct formula
//! cancels three leading orders.
//!
//! Derivatives are product-rule expansions of the same closed forms; z″ is
//! obtained by the quotient rule, not from the ODE, so that residual checks
//! of L[W] = B downstream remain non-circular.

use crate::quad::{self, QuadError};
use crate::tolerances;

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProfileError {
    #[error("invalid bubble parameter: mu = {mu} (must be positive)")]
    InvalidParameter { mu: f64 },
    #[error("profile product is not integrable: {0}")]
    NonIntegrable(QuadError),
    #[error("radial quadrature failed: {0}")]
    Quadrature(QuadError),
}

/// Scale and center of a single bubble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleParams {
    pub mu: f64,
    pub center: [f64; 3],
}

/// B_{μ,x₀}(x) = μ^{1/2} / (μ² + |x - x₀|²/3)^{1/2}.
///
/// # Errors
///
/// [`ProfileError::InvalidParameter`] when `params.mu` is not positive.
pub fn eval_bubble(params: &BubbleParams, x: [f64; 3]) -> Result<f64, ProfileError> {
    if !(params.mu > 0.0) {
        return Err(ProfileError::InvalidParameter { mu: params.mu });
    }
    let dx = x[0] - params.center[0];
    let dy = x[1] - params.center[1];
    let dz = x[2] - params.center[2];
    let r2 = dx * dx + dy * dy + dz * dz;
    Ok(params.mu.sqrt() / (params.mu * params.mu + r2 / 3.0).sqrt())
}

/// Radial part of the unit bubble, B(r) = (1 + r²/3)^{-1/2}.
#[must_use]
pub fn bubble_radial(r: f64) -> f64 {
    1.0 / (1.0 + r * r / 3.0).sqrt()
}

/// 5·B(r)⁴ = 45/(3 + r²)², the potential of the linearized operator.
#[must_use]
pub fn linearized_potential(r: f64) -> f64 {
    let s = 3.0 + r * r;
    45.0 / (s * s)
}

// ─────────────────────────────────────────────────────────────────────────
// Homogeneous solutions v and z
// ─────────────────────────────────────────────────────────────────────────

/// v(r) = (3 - r²)/(3 + r²)^{3/2}; changes sign exactly at r = √3.
#[must_use]
pub fn homogeneous_v(r: f64) -> f64 {
    let s = 3.0 + r * r;
    (3.0 - r * r) / (s * s.sqrt())
}

/// (v, v′, v″) with v′ = r(r² - 15)(3 + r²)^{-5/2} and
/// v″ = (-2r⁴ + 69r² - 45)(3 + r²)^{-7/2}.
#[must_use]
pub fn homogeneous_v_derivatives(r: f64) -> (f64, f64, f64) {
    let r2 = r * r;
    let s = 3.0 + r2;
    let sq = s.sqrt();
    let s32 = s * sq;
    let v = (3.0 - r2) / s32;
    let v1 = r * (r2 - 15.0) / (s32 * s);
    let v2 = (-2.0 * r2 * r2 + 69.0 * r2 - 45.0) / (s32 * s * s);
    (v, v1, v2)
}

/// z(r) = (-r⁴ + 18r² - 9)/(r·(3 + r²)^{3/2}), the second homogeneous
/// solution, singular like -√3/r at the origin and tending to -1 at
/// infinity. Satisfies r²(v z′ - v′ z) = 1.
#[must_use]
pub fn homogeneous_z(r: f64) -> f64 {
    let r2 = r * r;
    let s = 3.0 + r2;
    (-r2 * r2 + 18.0 * r2 - 9.0) / (r * s * s.sqrt())
}

/// (z, z′, z″) by quotient rule on z = N/D with N = -r⁴ + 18r² - 9 and
/// D = r(3 + r²)^{3/2}.
#[must_use]
pub fn homogeneous_z_derivatives(r: f64) -> (f64, f64, f64) {
    let r2 = r * r;
    let s = 3.0 + r2;
    let sq = s.sqrt();

    let n = -r2 * r2 + 18.0 * r2 - 9.0;
    let n1 = -4.0 * r2 * r + 36.0 * r;
    let n2 = -12.0 * r2 + 36.0;

    let d = r * s * sq;
    let d1 = sq * (3.0 + 4.0 * r2);
    let d2 = 3.0 * r * (4.0 * r2 + 9.0) / sq;

    let z = n / d;
    let p = n1 * d - n * d1;
    let z1 = p / (d * d);
    let p1 = n2 * d - n * d2;
    let z2 = (p1 * d - 2.0 * p * d1) / (d * d * d);
    (z, z1, z2)
}

// ─────────────────────────────────────────────────────────────────────────
// The integral factors h and β
// ─────────────────────────────────────────────────────────────────────────

/// Taylor coefficients of h(r) = Σ_m (-1)^{m+1} (2m-1)/((2m+1)·3^m) r^{2m+1},
/// terms m = 1..=5 (used below r = 1e-2, truncation ~1e-22 relative there).
const H_SERIES: [f64; 5] = [
    1.0 / 9.0,
    -1.0 / 15.0,
    5.0 / 189.0,
    -7.0 / 729.0,
    1.0 / 297.0,
];

/// h(r) = -r + 2√3·arctan(r/√3) - 3r/(3 + r²) = ∫₀ʳ v(s)B(s)s² ds.
/// The closed form cancels three leading orders near zero, so small radii
/// use the series branch.
#[must_use]
pub fn integral_factor_h(r: f64) -> f64 {
    if r < tolerances::PROFILE_SERIES_RADIUS {
        let r2 = r * r;
        let mut acc = 0.0;
        let mut pw = r2 * r;
        for c in H_SERIES {
            acc += c * pw;
            pw *= r2;
        }
        return acc;
    }
    -r + 2.0 * SQRT_3 * (r / SQRT_3).atan() - 3.0 * r / (3.0 + r * r)
}

/// h′(r) = r²(3 - r²)/(3 + r²)²  (no cancellation; direct form is stable).
#[must_use]
pub fn integral_factor_h_prime(r: f64) -> f64 {
    let s = 3.0 + r * r;
    r * r * (3.0 - r * r) / (s * s)
}

/// h″(r) = 18r(1 - r²)/(3 + r²)³.
#[must_use]
pub fn integral_factor_h_second(r: f64) -> f64 {
    let s = 3.0 + r * r;
    18.0 * r * (1.0 - r * r) / (s * s * s)
}

/// β(r) = -r² + 24·ln((3 + r²)/3) + 72/(3 + r²) - 24. The log and rational
/// parts cancel each other to O(r⁴), but the surviving -r² term is exact,
/// so `ln_1p` keeps the direct evaluation stable at every radius.
#[must_use]
pub fn integral_factor_beta(r: f64) -> f64 {
    let r2 = r * r;
    let u = r2 / 3.0;
    -r2 + 24.0 * u.ln_1p() + (72.0 / (3.0 + r2) - 24.0)
}

/// β′(r) = -2r + 48r³/(3 + r²)².
#[must_use]
pub fn integral_factor_beta_prime(r: f64) -> f64 {
    let s = 3.0 + r * r;
    -2.0 * r + 48.0 * r * r * r / (s * s)
}

/// β″(r) = -2 + 48r²(9 - r²)/(3 + r²)³.
#[must_use]
pub fn integral_factor_beta_second(r: f64) -> f64 {
    let r2 = r * r;
    let s = 3.0 + r2;
    -2.0 + 48.0 * r2 * (9.0 - r2) / (s * s * s)
}

// ─────────────────────────────────────────────────────────────────────────
// Correction profile W
// ─────────────────────────────────────────────────────────────────────────

/// W(r), the unique solution of W″ + (2/r)W′ + 5B⁴W = B with
/// W(0) = W′(0) = 0. Behaves like r²/6 near zero and like
/// (√3/2)r - 3π + 24√3·ln(r)/r + O(1/r) at infinity.
#[must_use]
pub fn eval_correction_w(r: f64) -> f64 {
    assert!(r >= 0.0, "correction profile is defined on r >= 0, got {r}");
    if r == 0.0 {
        return 0.0;
    }
    SQRT_3 * integral_factor_h(r) * homogeneous_z(r)
        - 0.5 * SQRT_3 * homogeneous_v(r) * integral_factor_beta(r)
}

/// (W, W′, W″) by product rule on the closed form.
#[must_use]
pub fn correction_w_derivatives(r: f64) -> (f64, f64, f64) {
    assert!(r >= 0.0, "correction profile is defined on r >= 0, got {r}");
    if r == 0.0 {
        return (0.0, 0.0, 1.0 / 3.0);
    }
    let h = integral_factor_h(r);
    let h1 = integral_factor_h_prime(r);
    let h2 = integral_factor_h_second(r);
    let (z, z1, z2) = homogeneous_z_derivatives(r);
    let (v, v1, v2) = homogeneous_v_derivatives(r);
    let b = integral_factor_beta(r);
    let b1 = integral_factor_beta_prime(r);
    let b2 = integral_factor_beta_second(r);

    let w = SQRT_3 * h * z - 0.5 * SQRT_3 * v * b;
    let w1 = SQRT_3 * (h1 * z + h * z1) - 0.5 * SQRT_3 * (v1 * b + v * b1);
    let w2 = SQRT_3 * (h2 * z + 2.0 * h1 * z1 + h * z2)
        - 0.5 * SQRT_3 * (v2 * b + 2.0 * v1 * b1 + v * b2);
    (w, w1, w2)
}

/// ψ(r) = √3·h(r)·(3 + r²)³/(r²(3 - r²)²), the variation-of-parameters
/// integrand with W = v·∫₀ʳψ. Behaves like r/√3 near zero; has a genuine
/// double pole at r = √3 (which the closed form of W cancels against v).
#[must_use]
pub fn psi_integrand(r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let r2 = r * r;
    let d = 3.0 - r2;
    if d == 0.0 {
        return f64::INFINITY;
    }
    let s = 3.0 + r2;
    SQRT_3 * integral_factor_h(r) * s * s * s / (r2 * d * d)
}

// ─────────────────────────────────────────────────────────────────────────
// Profile dispatch and weighted radial integrals
// ─────────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Bubble,
    CorrectionW,
    HomogeneousV,
    PsiIntegrand,
}

/// A named radial profile with a total evaluator on r ≥ 0 (ψ excepted at
/// its pole r = √3, where it returns infinity).
#[derive(Debug, Clone, Copy)]
pub struct RadialProfile {
    pub kind: ProfileKind,
}

impl RadialProfile {
    #[must_use]
    pub fn new(kind: ProfileKind) -> Self {
        Self { kind }
    }

    #[must_use]
    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::Bubble => bubble_radial(r),
            ProfileKind::CorrectionW => eval_correction_w(r),
            ProfileKind::HomogeneousV => homogeneous_v(r),
            ProfileKind::PsiIntegrand => psi_integrand(r),
        }
    }
}

/// Radial weight of [`radial_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    One,
    InverseRadius,
    Radius,
}

impl Weight {
    fn apply(self, r: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::InverseRadius => 1.0 / r,
            Weight::Radius => r,
        }
    }
}

/// 4π·∫₀^∞ f(r)·w(r)·r² dr, the integral of the radial function f·w over
/// R³. The cutoff is extended adaptively until the fitted power-law tail of
/// the integrand contributes below 1e-12 relative.
///
/// # Errors
///
/// [`ProfileError::NonIntegrable`] when the tail exponent indicates a
/// divergent integral; [`ProfileError::Quadrature`] on quadrature failure.
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, weight: Weight) -> Result<f64, ProfileError> {
    let g = move |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        f(r) * weight.apply(r) * r * r
    };
    // All profiles in this module vary on the unit scale (the bubble's
    // half-width is √3); 2.0 puts the initial cutoff past it.
    match quad::improper(g, 2.0, tolerances::RADIAL_QUAD_REL_TOL) {
        Ok(v) => Ok(4.0 * std::f64::consts::PI * v),
        Err(e @ QuadError::NonIntegrable { .. }) => Err(ProfileError::NonIntegrable(e)),
        Err(e) => Err(ProfileError::Quadrature(e)),
    }
}
