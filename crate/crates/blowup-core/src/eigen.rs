// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense symmetric eigensolver for small matrices (cyclic Jacobi).
//!
//! The interaction matrices downstream have at most a dozen rows, so
//! quadratically convergent Jacobi sweeps with full eigenvector
//! accumulation are simple, deterministic, and accurate to roundoff.

/// Eigendecomposition with eigenvalues ascending; `vectors[k]` is the unit
/// eigenvector of `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps run until the off-diagonal Frobenius mass drops below 1e-28 of
/// the total, which a handful of sweeps achieves for any fixed size.
///
/// # Panics
///
/// Panics when the input is not square or not symmetric to 1e-12 relative.
#[must_use]
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Eigen {
    let n = a.len();
    let mut scale = 0.0_f64;
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "matrix must be square");
        for (j, &v) in row.iter().enumerate() {
            scale = scale.max(v.abs());
            assert!(
                (v - a[j][i]).abs() <= 1e-12 * scale.max(1.0),
                "matrix must be symmetric: ({i},{j})"
            );
        }
    }
    let mut m: Vec<f64> = a.iter().flatten().copied().collect();
    let mut v = vec![0.0_f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let total: f64 = m.iter().map(|x| x * x).sum();
    let target = 1e-28 * total.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    Eigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_closed_form() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let e = symmetric_eigen(&a);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        let v0 = &e.vectors[0];
        assert!(
            (v0[0].abs() - inv_sqrt2).abs() < 1e-14 && (v0[0] + v0[1]).abs() < 1e-14,
            "ground vector {v0:?}"
        );
    }

    #[test]
    fn diagonal_matrix_is_returned_sorted() {
        let a = vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ];
        let e = symmetric_eigen(&a);
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn random_matrices_decompose_to_roundoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0601);
        for n in [3usize, 5, 8, 12] {
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let x = rng.gen_range(-2.0..2.0);
                    a[i][j] = x;
                    a[j][i] = x;
                }
            }
            let e = symmetric_eigen(&a);
            let norm: f64 = a
                .iter()
                .flatten()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            // Spectral identities: trace and Frobenius norm.
            let tr: f64 = (0..n).map(|i| a[i][i]).sum();
            let tr_e: f64 = e.values.iter().sum();
            assert!((tr - tr_e).abs() < 1e-12 * norm.max(1.0));
            let fr: f64 = a.iter().flatten().map(|x| x * x).sum();
            let fr_e: f64 = e.values.iter().map(|x| x * x).sum();
            assert!((fr - fr_e).abs() < 1e-11 * fr.max(1.0));
            // Residuals and orthonormality.
            for k in 0..n {
                let vk = &e.vectors[k];
                for i in 0..n {
                    let av: f64 = (0..n).map(|j| a[i][j] * vk[j]).sum();
                    assert!(
                        (av - e.values[k] * vk[i]).abs() < 1e-11 * norm.max(1.0),
                        "residual at n={n}, mode {k}, row {i}"
                    );
                }
                for l in 0..=k {
                    let dot: f64 = (0..n).map(|i| e.vectors[k][i] * e.vectors[l][i]).sum();
                    let want = if k == l { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12, "orthonormality ({k},{l})");
                }
            }
            // Ascending order.
            for k in 1..n {
                assert!(e.values[k] >= e.values[k - 1]);
            }
        }
    }

    #[test]
    #[should_panic(expected = "symmetric")]
    fn asymmetric_input_panics() {
        let a = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        let _ = symmetric_eigen(&a);
    }
}
