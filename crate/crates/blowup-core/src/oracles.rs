// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent analytic references used to validate the grid machinery.
//!
//! Everything here is closed-form and classical: the method-of-images
//! Green function of the unit ball, radial Helmholtz Green functions from
//! the ball center for constant coefficients, and the exact symmetry modes
//! of the operator linearized at the standard bubble. The numerical
//! pipeline is tested against these; nothing here depends on the grid code.
//!
//! Sign conventions: G_a solves (-Δ + a)G_a(·, y) = δ_y with zero Dirichlet
//! data, the regular part is H_a = Γ - G_a with Γ(x, y) = 1/(4π|x - y|),
//! and the Robin function is φ_a(y) = H_a(y, y).

use std::f64::consts::PI;

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Free-space kernel Γ(x, y) = 1/(4π|x - y|).
#[must_use]
pub fn newtonian_kernel(x: [f64; 3], y: [f64; 3]) -> f64 {
    1.0 / (4.0 * PI * norm(sub(x, y)))
}

/// Laplace Green function of the unit ball by the method of images:
/// G₀(x, y) = (1/4π)·(1/|x - y| - 1/(|y|·|x - y/|y|²|)), with the radial
/// limit (1/4π)·(1/|x| - 1) when y is the center.
#[must_use]
pub fn images_green(x: [f64; 3], y: [f64; 3]) -> f64 {
    let ry = norm(y);
    debug_assert!(norm(x) < 1.0 + 1e-12 && ry < 1.0, "points must lie in the unit ball");
    let direct = 1.0 / norm(sub(x, y));
    if ry == 0.0 {
        return (direct - 1.0) / (4.0 * PI);
    }
    let image = [y[0] / (ry * ry), y[1] / (ry * ry), y[2] / (ry * ry)];
    (direct - 1.0 / (ry * norm(sub(x, image)))) / (4.0 * PI)
}

/// ∇ₓ G₀(x, y) for the method-of-images Green function.
#[must_use]
pub fn images_green_gradient_x(x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    let ry = norm(y);
    let d = sub(x, y);
    let dn = norm(d);
    let mut grad = [0.0; 3];
    if ry == 0.0 {
        let rx = norm(x);
        for i in 0..3 {
            grad[i] = -x[i] / (4.0 * PI * rx * rx * rx);
        }
        return grad;
    }
    let image = [y[0] / (ry * ry), y[1] / (ry * ry), y[2] / (ry * ry)];
    let e = sub(x, image);
    let en = norm(e);
    for i in 0..3 {
        grad[i] = (-d[i] / (dn * dn * dn) + e[i] / (ry * en * en * en)) / (4.0 * PI);
    }
    grad
}

/// Robin function of the unit ball for a = 0: φ₀(y) = 1/(4π(1 - |y|²)).
#[must_use]
pub fn images_robin(y: [f64; 3]) -> f64 {
    let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    debug_assert!(r2 < 1.0, "point must lie in the unit ball");
    1.0 / (4.0 * PI * (1.0 - r2))
}

/// ∇φ₀(y) = y/(2π(1 - |y|²)²).
#[must_use]
pub fn images_robin_gradient(y: [f64; 3]) -> [f64; 3] {
    let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    let c = 1.0 / (2.0 * PI * (1.0 - r2) * (1.0 - r2));
    [c * y[0], c * y[1], c * y[2]]
}

/// Radial Green function of (-Δ + a) on the unit ball with source at the
/// center, evaluated at radius r ∈ (0, 1]:
///
/// * a = -λ < 0: sin(√λ(1 - r)) / (4πr·sin√λ), valid for λ < π²
///   (below the first Dirichlet eigenvalue);
/// * a = 0: (1/r - 1)/(4π);
/// * a = c > 0: sinh(√c(1 - r)) / (4πr·sinh√c).
#[must_use]
pub fn ball_center_green(a: f64, r: f64) -> f64 {
    assert!(r > 0.0 && r <= 1.0, "radius {r} outside (0, 1]");
    if a == 0.0 {
        (1.0 / r - 1.0) / (4.0 * PI)
    } else if a < 0.0 {
        let sl = (-a).sqrt();
        assert!(
            sl < PI,
            "a = {a} is at or below the first Dirichlet eigenvalue -π²"
        );
        (sl * (1.0 - r)).sin() / (4.0 * PI * r * sl.sin())
    } else {
        let sc = a.sqrt();
        (sc * (1.0 - r)).sinh() / (4.0 * PI * r * sc.sinh())
    }
}

/// Robin function of (-Δ + a) on the unit ball at the center:
/// √λ·cot(√λ)/(4π) for a = -λ, 1/(4π) for a = 0, √c·coth(√c)/(4π) for
/// a = c > 0. Vanishes at a = -π²/4.
#[must_use]
pub fn ball_center_robin(a: f64) -> f64 {
    if a == 0.0 {
        1.0 / (4.0 * PI)
    } else if a < 0.0 {
        let sl = (-a).sqrt();
        assert!(sl < PI, "a = {a} below the first Dirichlet eigenvalue");
        sl * (sl.cos() / sl.sin()) / (4.0 * PI)
    } else {
        let sc = a.sqrt();
        sc * (sc.cosh() / sc.sinh()) / (4.0 * PI)
    }
}

/// ∫_B G_a(0, x)² dx for the unit ball:
///
/// * a = -λ: (1/(4π sin²√λ))·(1/2 - sin(2√λ)/(4√λ));
/// * a = 0: 1/(12π);
/// * a = c: (1/(4π sinh²√c))·(sinh(2√c)/(4√c) - 1/2).
#[must_use]
pub fn ball_center_green_squared(a: f64) -> f64 {
    if a == 0.0 {
        1.0 / (12.0 * PI)
    } else if a < 0.0 {
        let sl = (-a).sqrt();
        assert!(sl < PI, "a = {a} below the first Dirichlet eigenvalue");
        (0.5 - (2.0 * sl).sin() / (4.0 * sl)) / (4.0 * PI * sl.sin() * sl.sin())
    } else {
        let sc = a.sqrt();
        ((2.0 * sc).sinh() / (4.0 * sc) - 0.5) / (4.0 * PI * sc.sinh() * sc.sinh())
    }
}

/// Exact degree-0 mode of the operator linearized at the bubble
/// (1 + r²)^{-(n-2)/2} in dimension n: the scaling mode
/// w₀(r) = (1 - r²)/(1 + r²)^{n/2}.
#[must_use]
pub fn exact_mode_zero(n: u32, r: f64) -> f64 {
    assert!(n >= 3, "dimension must be at least 3");
    (1.0 - r * r) / (1.0 + r * r).powf(0.5 * f64::from(n))
}

/// Exact degree-1 mode: the translation mode w₁(r) = r/(1 + r²)^{n/2}.
#[must_use]
pub fn exact_mode_one(n: u32, r: f64) -> f64 {
    assert!(n >= 3, "dimension must be at least 3");
    r / (1.0 + r * r).powf(0.5 * f64::from(n))
}
