// SPDX-License-Identifier: MIT OR Apache-2.0

//! Matrix-free preconditioned conjugate gradient.
//!
//! The operator is supplied as a closure; the preconditioner is the Jacobi
//! diagonal. All inner products go through the deterministic chunked
//! reduction, so repeated solves with the same inputs are bitwise
//! reproducible at any thread count.
//!
//! CG on an indefinite matrix eventually produces a search direction of
//! non-positive curvature p·Ap ≤ 0; that direction is a witness that the
//! quadratic form is not positive definite, and the solver reports it as
//! [`CgError::IndefiniteOperator`] rather than returning garbage. Callers
//! probing coercivity rely on this.

use crate::grid::deterministic_dot;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CgError {
    #[error(
        "conjugate gradient stalled at relative residual {residual:.3e} \
         after {iterations} iterations (cap {cap})"
    )]
    Stalled {
        residual: f64,
        iterations: usize,
        cap: usize,
    },
    #[error(
        "operator is not positive definite: curvature {curvature:.3e} \
         observed at iteration {iteration}"
    )]
    IndefiniteOperator { curvature: f64, iteration: usize },
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual ‖b - Ax‖/‖b‖.
    pub residual: f64,
}

/// Iteration cap for a system of `n` unknowns: the Laplacian condition
/// number grows like the squared per-axis node count, so CG needs O(n^{1/3})
/// iterations; the factor leaves an order of magnitude of slack.
#[must_use]
pub fn iteration_cap(n: usize) -> usize {
    (crate::tolerances::CG_ITER_FACTOR as f64 * (n as f64).cbrt()).ceil() as usize
}

/// Solves A x = b with Jacobi-preconditioned CG, starting from x = 0.
///
/// `diag` must be the diagonal of A (any non-positive entry is itself a
/// certificate of indefiniteness and is reported as such).
///
/// # Errors
///
/// [`CgError::IndefiniteOperator`] on non-positive curvature;
/// [`CgError::Stalled`] when `max_iter` iterations do not reach `rel_tol`.
pub fn solve<F>(
    apply: F,
    diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgSolution, CgError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    assert_eq!(diag.len(), n);
    if let Some((i, &d)) = diag.iter().enumerate().find(|&(_, &d)| d <= 0.0) {
        let _ = i;
        return Err(CgError::IndefiniteOperator {
            curvature: d,
            iteration: 0,
        });
    }

    let b_norm = deterministic_dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }

    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = deterministic_dot(&r, &z);

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = deterministic_dot(&p, &ap);
        if pap <= 0.0 {
            return Err(CgError::IndefiniteOperator {
                curvature: pap,
                iteration: it,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = deterministic_dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            return Ok(CgSolution {
                x,
                iterations: it,
                residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = deterministic_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let res = deterministic_dot(&r, &r).sqrt() / b_norm;
    Err(CgError::Stalled {
        residual: res,
        iterations: max_iter,
        cap: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainSpec, Grid, Shape};
    use crate::tolerances;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn diagonal_system_converges_immediately() {
        let diag = vec![2.0; 10];
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let sol = solve(
            |u, out| {
                for i in 0..10 {
                    out[i] = 2.0 * u[i];
                }
            },
            &diag,
            &b,
            1e-12,
            50,
        )
        .unwrap();
        assert_eq!(sol.iterations, 1);
        for i in 0..10 {
            assert!((sol.x[i] - b[i] / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_spd_system_matches_direct_elimination() {
        const N: usize = 24;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0301);
        // A = C·Cᵀ + I is SPD.
        let mut c = [[0.0_f64; N]; N];
        for row in c.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let mut a = [[0.0_f64; N]; N];
        for i in 0..N {
            for j in 0..N {
                let mut s = 0.0;
                for k in 0..N {
                    s += c[i][k] * c[j][k];
                }
                a[i][j] = s + if i == j { 1.0 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..N).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // Direct solve by Gaussian elimination with partial pivoting.
        let mut aug = a;
        let mut rhs = b.clone();
        for col in 0..N {
            let piv = (col..N)
                .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
                .unwrap();
            aug.swap(col, piv);
            rhs.swap(col, piv);
            for row in col + 1..N {
                let f = aug[row][col] / aug[col][col];
                for k in col..N {
                    aug[row][k] -= f * aug[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
        let mut x_direct = vec![0.0; N];
        for row in (0..N).rev() {
            let mut s = rhs[row];
            for k in row + 1..N {
                s -= aug[row][k] * x_direct[k];
            }
            x_direct[row] = s / aug[row][row];
        }

        let diag: Vec<f64> = (0..N).map(|i| a[i][i]).collect();
        let sol = solve(
            |u, out| {
                for i in 0..N {
                    out[i] = (0..N).map(|j| a[i][j] * u[j]).sum();
                }
            },
            &diag,
            &b,
            1e-12,
            500,
        )
        .unwrap();
        for i in 0..N {
            assert!(
                (sol.x[i] - x_direct[i]).abs() < 1e-8,
                "component {i}: {} vs {}",
                sol.x[i],
                x_direct[i]
            );
        }
    }

    #[test]
    fn indefinite_diagonal_is_reported() {
        let diag = vec![1.0, -1.0, 1.0];
        let b = vec![1.0; 3];
        let err = solve(
            |u, out| {
                out[0] = u[0];
                out[1] = -u[1];
                out[2] = u[2];
            },
            &diag,
            &b,
            1e-10,
            50,
        )
        .unwrap_err();
        assert!(matches!(err, CgError::IndefiniteOperator { .. }));
    }

    #[test]
    fn indefinite_curvature_is_reported() {
        // Positive diagonal but an indefinite matrix: [[1, 2], [2, 1]].
        let diag = vec![1.0, 1.0];
        let b = vec![1.0, -2.0];
        let err = solve(
            |u, out| {
                out[0] = u[0] + 2.0 * u[1];
                out[1] = 2.0 * u[0] + u[1];
            },
            &diag,
            &b,
            1e-10,
            50,
        )
        .unwrap_err();
        match err {
            CgError::IndefiniteOperator { curvature, .. } => assert!(curvature <= 0.0),
            other => panic!("expected indefiniteness, got {other:?}"),
        }
    }

    #[test]
    fn ball_constants_are_reproduced_exactly() {
        // -Δu = 0 with u = 1 on the sphere: the cut-cell scheme solves this
        // exactly, so the only error is the CG tolerance.
        let g = Grid::new(DomainSpec {
            shape: Shape::Ball {
                center: [0.0; 3],
                radius: 1.0,
            },
            resolution: 32,
        })
        .unwrap();
        let m = g.n_inside();
        let a = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        g.add_boundary_data(|_| 1.0, &mut rhs);
        let sol = solve(
            |u, out| g.apply(&a, u, out),
            &g.diagonal(&a),
            &rhs,
            tolerances::CG_REL_RESIDUAL,
            iteration_cap(m),
        )
        .unwrap();
        let worst = sol
            .x
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-8, "max deviation from 1: {worst:e}");
    }

    #[test]
    fn ball_quadratic_solution_is_second_order() {
        // u* = |x|² has -Δu* = -6; boundary datum |x|² = 1 on the sphere.
        let solve_res = |res: usize| {
            let g = Grid::new(DomainSpec {
                shape: Shape::Ball {
                    center: [0.0; 3],
                    radius: 1.0,
                },
                resolution: res,
            })
            .unwrap();
            let m = g.n_inside();
            let a = vec![0.0; m];
            let mut rhs = g.sample(|_| -6.0);
            g.add_boundary_data(|_| 1.0, &mut rhs);
            let sol = solve(
                |u, out| g.apply(&a, u, out),
                &g.diagonal(&a),
                &rhs,
                tolerances::CG_REL_RESIDUAL,
                iteration_cap(m),
            )
            .unwrap();
            let mut worst = 0.0_f64;
            for (i, v) in sol.x.iter().enumerate() {
                let p = g.point_of_rank(i);
                let exact = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                worst = worst.max((v - exact).abs());
            }
            worst
        };
        let e1 = solve_res(17);
        let e2 = solve_res(33);
        assert!(e1 < 0.05, "coarse error {e1}");
        let rate = (e1 / e2).log2();
        assert!(rate > 1.0, "order {rate:.2} (errors {e1:e}, {e2:e})");
    }

    #[test]
    fn box_helmholtz_manufactured_solution() {
        // (-Δ + 5)u = (3π² + 5)·sin(πx)sin(πy)sin(πz) on the unit box.
        let g = Grid::new(DomainSpec {
            shape: Shape::Box {
                lo: [0.0; 3],
                hi: [1.0; 3],
            },
            resolution: 33,
        })
        .unwrap();
        let m = g.n_inside();
        let a = vec![5.0; m];
        let exact = |p: [f64; 3]| (PI * p[0]).sin() * (PI * p[1]).sin() * (PI * p[2]).sin();
        let rhs = g.sample(|p| (3.0 * PI * PI + 5.0) * exact(p));
        let sol = solve(
            |u, out| g.apply(&a, u, out),
            &g.diagonal(&a),
            &rhs,
            tolerances::CG_REL_RESIDUAL,
            iteration_cap(m),
        )
        .unwrap();
        let mut worst = 0.0_f64;
        for (i, v) in sol.x.iter().enumerate() {
            worst = worst.max((v - exact(g.point_of_rank(i))).abs());
        }
        assert!(worst < 0.02, "max error {worst}");
    }

    #[test]
    fn subcritical_negative_coefficient_is_caught() {
        // a = -15 is below -π², the first Dirichlet eigenvalue of the unit
        // ball, so -Δ + a is indefinite and CG must refuse.
        let g = Grid::new(DomainSpec {
            shape: Shape::Ball {
                center: [0.0; 3],
                radius: 1.0,
            },
            resolution: 16,
        })
        .unwrap();
        let m = g.n_inside();
        let a = vec![-15.0; m];
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0302);
        let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = solve(
            |u, out| g.apply(&a, u, out),
            &g.diagonal(&a),
            &rhs,
            tolerances::CG_REL_RESIDUAL,
            iteration_cap(m),
        );
        assert!(
            matches!(r, Err(CgError::IndefiniteOperator { .. })),
            "expected indefiniteness report, got {r:?}"
        );
    }
}
