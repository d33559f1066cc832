// SPDX-License-Identifier: MIT OR Apache-2.0

//! Uniform Cartesian grids over ball and box domains, with the cut-cell
//! Dirichlet discretization of -Δ + a.
//!
//! Nodes form a cubic lattice of `resolution` points per axis spanning the
//! shape's bounding box. A node is active when it lies strictly inside the
//! domain. Each of the six arms of an active node either reaches another
//! active node (regular 7-point coupling) or crosses the boundary; crossing
//! arms are handled by the ghost-point method: the ghost value is the
//! linear extrapolation through the node value and the Dirichlet datum at
//! the intersection point, a fraction θ ∈ (0, 1] along the arm. This folds
//! into the row as a θ-weighted diagonal entry plus a right-hand-side
//! contribution g/(θh²), keeps the matrix symmetric positive definite, and
//! reproduces constants and linear functions exactly. Fractions are clamped
//! below to keep the diagonal bounded; the intersection point itself is
//! always the exact one, so boundary data is never evaluated off-surface.
//!
//! Box domains are the degenerate case: lattice face nodes are the
//! boundary, every crossing arm has θ = 1.
//!
//! Flat node index convention: `(i·n + j)·n + k` for node (i, j, k).

use crate::tolerances;
use rayon::prelude::*;

pub const MIN_RESOLUTION: usize = 16;
pub const MAX_RESOLUTION: usize = 128;

/// Chunk length for deterministic parallel reductions: partial sums are
/// computed per fixed-size chunk and folded serially in index order, so
/// results do not depend on thread count.
const REDUCE_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Ball { center: [f64; 3], radius: f64 },
    Box { lo: [f64; 3], hi: [f64; 3] },
}

impl Shape {
    #[must_use]
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Shape::Ball { center, radius } => (
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            Shape::Box { lo, hi } => (lo, hi),
        }
    }

    /// Strict interior test.
    #[must_use]
    pub fn contains(&self, x: [f64; 3]) -> bool {
        match *self {
            Shape::Ball { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let dz = x[2] - center[2];
                dx * dx + dy * dy + dz * dz < radius * radius
            }
            Shape::Box { lo, hi } => {
                (0..3).all(|a| x[a] > lo[a] && x[a] < hi[a])
            }
        }
    }

    /// Closest boundary point to `x` along the natural projection: radial
    /// for the ball, componentwise clamping for the box. Used to extend
    /// boundary data to exterior lattice nodes.
    #[must_use]
    pub fn project_to_boundary(&self, x: [f64; 3]) -> [f64; 3] {
        match *self {
            Shape::Ball { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if n == 0.0 {
                    return [center[0] + radius, center[1], center[2]];
                }
                let s = radius / n;
                [
                    center[0] + s * d[0],
                    center[1] + s * d[1],
                    center[2] + s * d[2],
                ]
            }
            Shape::Box { lo, hi } => {
                [
                    x[0].clamp(lo[0], hi[0]),
                    x[1].clamp(lo[1], hi[1]),
                    x[2].clamp(lo[2], hi[2]),
                ]
            }
        }
    }

    #[must_use]
    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Box { lo, hi } => {
                let d = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub resolution: usize,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GridError {
    #[error("resolution {0} outside the supported range [{MIN_RESOLUTION}, {MAX_RESOLUTION}]")]
    UnsupportedResolution(usize),
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("point {point:?} does not snap to an interior grid node")]
    NotInterior { point: [f64; 3] },
}

/// An arm of an active node that crosses the domain boundary.
#[derive(Debug, Clone, Copy)]
pub struct CutArm {
    /// Rank of the active node the arm starts from.
    pub rank: u32,
    /// Arm direction: axis = dir / 2, sign = if dir % 2 == 0 { + } else { - }.
    pub dir: u8,
    /// Fraction of the arm inside the domain, clamped below.
    pub theta: f64,
    /// Exact intersection of the arm with the boundary.
    pub point: [f64; 3],
}

/// A classified grid: active-node numbering, per-row geometric diagonal of
/// the cut-cell Laplacian, and the list of boundary-crossing arms.
pub struct Grid {
    pub spec: DomainSpec,
    /// Nodes per axis.
    pub n: usize,
    pub lo: [f64; 3],
    pub h: [f64; 3],
    inside: Vec<u32>,
    rank: Vec<i32>,
    diag_geom: Vec<f64>,
    cuts: Vec<CutArm>,
}

impl Grid {
    pub fn new(spec: DomainSpec) -> Result<Self, GridError> {
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&spec.resolution) {
            return Err(GridError::UnsupportedResolution(spec.resolution));
        }
        match spec.shape {
            Shape::Ball { radius, .. } if !(radius > 0.0) => {
                return Err(GridError::DegenerateShape(format!(
                    "ball radius {radius} must be positive"
                )));
            }
            Shape::Box { lo, hi } if !(0..3).all(|a| hi[a] > lo[a]) => {
                return Err(GridError::DegenerateShape(format!(
                    "box bounds lo {lo:?} must be strictly below hi {hi:?}"
                )));
            }
            _ => {}
        }

        let n = spec.resolution;
        let (lo, hi) = spec.shape.bounding_box();
        let mut h = [0.0; 3];
        for a in 0..3 {
            h[a] = (hi[a] - lo[a]) / (n - 1) as f64;
        }

        let total = n * n * n;
        let mut rank = vec![-1_i32; total];
        let mut inside = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = [
                        lo[0] + i as f64 * h[0],
                        lo[1] + j as f64 * h[1],
                        lo[2] + k as f64 * h[2],
                    ];
                    if spec.shape.contains(p) {
                        let flat = (i * n + j) * n + k;
                        rank[flat] = inside.len() as i32;
                        inside.push(flat as u32);
                    }
                }
            }
        }

        let strides = [n * n, n, 1usize];
        let mut diag_geom = vec![0.0_f64; inside.len()];
        let mut cuts = Vec::new();
        for (m, &flat) in inside.iter().enumerate() {
            let flat = flat as usize;
            let i = flat / (n * n);
            let j = (flat / n) % n;
            let k = flat % n;
            let idx3 = [i, j, k];
            let p = [
                lo[0] + i as f64 * h[0],
                lo[1] + j as f64 * h[1],
                lo[2] + k as f64 * h[2],
            ];
            let mut diag = 0.0;
            for axis in 0..3 {
                let inv_h2 = 1.0 / (h[axis] * h[axis]);
                for (side, sign) in [(0u8, 1.0_f64), (1u8, -1.0_f64)] {
                    // An active node is never on the lattice face (strict
                    // interiority rules it out for both shapes), so the
                    // neighbor index is always in range.
                    debug_assert!(idx3[axis] > 0 && idx3[axis] < n - 1);
                    let nb = if sign > 0.0 {
                        flat + strides[axis]
                    } else {
                        flat - strides[axis]
                    };
                    if rank[nb] >= 0 {
                        diag += inv_h2;
                    } else {
                        let theta = arm_fraction(&spec.shape, p, axis, sign, h[axis]);
                        let mut point = p;
                        point[axis] += sign * theta * h[axis];
                        cuts.push(CutArm {
                            rank: m as u32,
                            dir: (2 * axis) as u8 + side,
                            theta: theta.max(tolerances::MIN_CUT_FRACTION),
                            point,
                        });
                        diag += inv_h2 / theta.max(tolerances::MIN_CUT_FRACTION);
                    }
                }
            }
            diag_geom[m] = diag;
        }

        Ok(Self {
            spec,
            n,
            lo,
            h,
            inside,
            rank,
            diag_geom,
            cuts,
        })
    }

    #[must_use]
    pub fn n_inside(&self) -> usize {
        self.inside.len()
    }

    #[must_use]
    pub fn cuts(&self) -> &[CutArm] {
        &self.cuts
    }

    #[must_use]
    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Coordinates of the active node with the given rank.
    #[must_use]
    pub fn point_of_rank(&self, m: usize) -> [f64; 3] {
        let flat = self.inside[m] as usize;
        let n = self.n;
        [
            self.lo[0] + (flat / (n * n)) as f64 * self.h[0],
            self.lo[1] + ((flat / n) % n) as f64 * self.h[1],
            self.lo[2] + (flat % n) as f64 * self.h[2],
        ]
    }

    /// Rank of the lattice node (i, j, k), if active.
    #[must_use]
    pub fn rank_of_node(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        let r = self.rank[(i * self.n + j) * self.n + k];
        (r >= 0).then_some(r as usize)
    }

    /// Nearest lattice node to `y` (componentwise rounding), required to be
    /// active.
    pub fn nearest_inside_node(&self, y: [f64; 3]) -> Result<(usize, [f64; 3]), GridError> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let t = ((y[a] - self.lo[a]) / self.h[a]).round();
            if t < 0.0 || t > (self.n - 1) as f64 {
                return Err(GridError::NotInterior { point: y });
            }
            idx[a] = t as usize;
        }
        match self.rank_of_node(idx[0], idx[1], idx[2]) {
            Some(m) => Ok((m, self.point_of_rank(m))),
            None => Err(GridError::NotInterior { point: y }),
        }
    }

    /// y = (-Δ_h + diag a)·u over active nodes, zero Dirichlet data (the
    /// boundary contribution belongs to the right-hand side).
    ///
    /// `a_diag` is the per-node zeroth-order coefficient; `u` and `out` are
    /// rank-indexed.
    pub fn apply(&self, a_diag: &[f64], u: &[f64], out: &mut [f64]) {
        let m = self.n_inside();
        assert_eq!(u.len(), m);
        assert_eq!(out.len(), m);
        assert_eq!(a_diag.len(), m);
        let n = self.n;
        let strides = [n * n, n, 1usize];
        let inv_h2 = [
            1.0 / (self.h[0] * self.h[0]),
            1.0 / (self.h[1] * self.h[1]),
            1.0 / (self.h[2] * self.h[2]),
        ];
        let rank = &self.rank;
        let inside = &self.inside;
        let diag_geom = &self.diag_geom;
        out.par_iter_mut().enumerate().for_each(|(m, o)| {
            let flat = inside[m] as usize;
            let mut acc = (diag_geom[m] + a_diag[m]) * u[m];
            for axis in 0..3 {
                let r_plus = rank[flat + strides[axis]];
                if r_plus >= 0 {
                    acc -= inv_h2[axis] * u[r_plus as usize];
                }
                let r_minus = rank[flat - strides[axis]];
                if r_minus >= 0 {
                    acc -= inv_h2[axis] * u[r_minus as usize];
                }
            }
            *o = acc;
        });
    }

    /// Rank-indexed samples of `f` at active nodes.
    #[must_use]
    pub fn sample<F: Fn([f64; 3]) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        (0..self.n_inside())
            .into_par_iter()
            .map(|m| f(self.point_of_rank(m)))
            .collect()
    }

    /// Adds the ghost-point boundary contribution Σ g(cut)/(θh²) of the
    /// Dirichlet datum `g` to `rhs`.
    pub fn add_boundary_data<F: Fn([f64; 3]) -> f64>(&self, g: F, rhs: &mut [f64]) {
        for cut in &self.cuts {
            let axis = (cut.dir / 2) as usize;
            let inv_h2 = 1.0 / (self.h[axis] * self.h[axis]);
            rhs[cut.rank as usize] += g(cut.point) * inv_h2 / cut.theta;
        }
    }

    /// Nodal quadrature Σ u·h³ over active nodes, deterministic under
    /// thread-count changes.
    #[must_use]
    pub fn integrate_nodal(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.n_inside());
        let partials: Vec<f64> = u
            .par_chunks(REDUCE_CHUNK)
            .map(|c| c.iter().sum::<f64>())
            .collect();
        partials.iter().sum::<f64>() * self.cell_volume()
    }

    /// Deterministic dot product of two rank-indexed vectors.
    #[must_use]
    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        deterministic_dot(u, v)
    }

    /// Per-row diagonal of the discrete operator with `a_diag` added, used
    /// as the Jacobi preconditioner.
    #[must_use]
    pub fn diagonal(&self, a_diag: &[f64]) -> Vec<f64> {
        self.diag_geom
            .iter()
            .zip(a_diag)
            .map(|(g, a)| g + a)
            .collect()
    }
}

/// Deterministic chunked dot product (parallel partials, serial fold).
#[must_use]
pub fn deterministic_dot(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len());
    let partials: Vec<f64> = u
        .par_chunks(REDUCE_CHUNK)
        .zip(v.par_chunks(REDUCE_CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// Fraction t ∈ (0, 1] at which the arm from inside point `p` along
/// `sign`·axis crosses the boundary. The caller guarantees that p is inside
/// and the neighbor at distance h is not.
fn arm_fraction(shape: &Shape, p: [f64; 3], axis: usize, sign: f64, h: f64) -> f64 {
    match *shape {
        Shape::Box { .. } => 1.0,
        Shape::Ball { center, radius } => {
            let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
            // |d + t·h·e|² = radius²; C < 0, so the quadratic has exactly
            // one positive root.
            let aa = h * h;
            let bb = 2.0 * h * sign * d[axis];
            let cc = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - radius * radius;
            debug_assert!(cc < 0.0);
            let disc = (bb * bb - 4.0 * aa * cc).sqrt();
            let t = (-bb + disc) / (2.0 * aa);
            debug_assert!(t > 0.0 && t <= 1.0 + 1e-12, "arm fraction {t}");
            t.min(1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit_ball(resolution: usize) -> Grid {
        Grid::new(DomainSpec {
            shape: Shape::Ball {
                center: [0.0; 3],
                radius: 1.0,
            },
            resolution,
        })
        .unwrap()
    }

    fn unit_box(resolution: usize) -> Grid {
        Grid::new(DomainSpec {
            shape: Shape::Box {
                lo: [0.0; 3],
                hi: [1.0; 3],
            },
            resolution,
        })
        .unwrap()
    }

    #[test]
    fn resolution_bounds_enforced() {
        for bad in [0, 8, 15, 129, 512] {
            let r = Grid::new(DomainSpec {
                shape: Shape::Box {
                    lo: [0.0; 3],
                    hi: [1.0; 3],
                },
                resolution: bad,
            });
            assert!(matches!(r, Err(GridError::UnsupportedResolution(_))));
        }
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(Grid::new(DomainSpec {
            shape: Shape::Ball {
                center: [0.0; 3],
                radius: 0.0
            },
            resolution: 32,
        })
        .is_err());
        assert!(Grid::new(DomainSpec {
            shape: Shape::Box {
                lo: [0.0; 3],
                hi: [1.0, 1.0, 0.0]
            },
            resolution: 32,
        })
        .is_err());
    }

    #[test]
    fn ball_volume_from_classification() {
        let g = unit_ball(64);
        let vol = g.n_inside() as f64 * g.cell_volume();
        let exact = 4.0 * PI / 3.0;
        assert!(
            (vol - exact).abs() < 0.02 * exact,
            "nodal volume {vol} vs {exact}"
        );
    }

    #[test]
    fn box_inside_count_and_cut_arms() {
        let g = unit_box(20);
        assert_eq!(g.n_inside(), 18 * 18 * 18);
        // Each of the six faces contributes one θ=1 arm per adjacent
        // interior node.
        assert_eq!(g.cuts().len(), 6 * 18 * 18);
        for cut in g.cuts() {
            assert_eq!(cut.theta, 1.0);
            let on_face = (0..3).any(|a| cut.point[a] == 0.0 || cut.point[a] == 1.0);
            assert!(on_face, "cut point {:?} not on a face", cut.point);
        }
    }

    #[test]
    fn ball_cut_points_lie_on_sphere() {
        let g = unit_ball(40);
        assert!(!g.cuts().is_empty());
        for cut in g.cuts() {
            let r = (cut.point[0] * cut.point[0]
                + cut.point[1] * cut.point[1]
                + cut.point[2] * cut.point[2])
                .sqrt();
            assert!(
                (r - 1.0).abs() < 1e-12,
                "cut point radius {r} (arm {:?})",
                cut
            );
        }
    }

    #[test]
    fn operator_is_symmetric_and_positive() {
        let g = unit_ball(16);
        let m = g.n_inside();
        let a = vec![0.3; m];
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0201);
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut au = vec![0.0; m];
        let mut av = vec![0.0; m];
        g.apply(&a, &u, &mut au);
        g.apply(&a, &v, &mut av);
        let uav = deterministic_dot(&u, &av);
        let vau = deterministic_dot(&v, &au);
        assert!(
            (uav - vau).abs() <= 1e-10 * uav.abs().max(vau.abs()),
            "asymmetry {uav} vs {vau}"
        );
        let uau = deterministic_dot(&u, &au);
        assert!(uau > 0.0, "quadratic form not positive: {uau}");
    }

    #[test]
    fn laplacian_annihilates_linear_functions_in_interior() {
        let g = unit_ball(32);
        let m = g.n_inside();
        let a = vec![0.0; m];
        let u = g.sample(|p| 1.5 * p[0] + 2.0 * p[1] - 0.5 * p[2]);
        let mut out = vec![0.0; m];
        g.apply(&a, &u, &mut out);
        // Rows that have all six neighbors active see the exact second
        // difference of a linear function: zero up to roundoff.
        let mut cut_rows = vec![false; m];
        for c in g.cuts() {
            cut_rows[c.rank as usize] = true;
        }
        let mut checked = 0;
        for i in 0..m {
            if !cut_rows[i] {
                assert!(out[i].abs() < 1e-8, "row {i}: residual {}", out[i]);
                checked += 1;
            }
        }
        assert!(checked > m / 2);
    }

    #[test]
    fn boundary_data_enters_cut_rows_only() {
        let g = unit_box(16);
        let m = g.n_inside();
        let mut rhs = vec![0.0; m];
        g.add_boundary_data(|_| 1.0, &mut rhs);
        let mut cut_rows = vec![false; m];
        for c in g.cuts() {
            cut_rows[c.rank as usize] = true;
        }
        for i in 0..m {
            if cut_rows[i] {
                assert!(rhs[i] > 0.0);
            } else {
                assert_eq!(rhs[i], 0.0);
            }
        }
    }

    #[test]
    fn nodal_integration_is_second_order_for_interior_bumps() {
        // f vanishes on the box boundary, so the h³ node sum behaves like a
        // midpoint rule: the error should drop by ~4 per mesh doubling.
        let f = |p: [f64; 3]| {
            (PI * p[0]).sin() * (PI * p[1]).sin() * (PI * p[2]).sin()
        };
        let exact = (2.0 / PI).powi(3);
        let mut errs = Vec::new();
        for res in [17, 33, 65] {
            let g = unit_box(res);
            let u = g.sample(f);
            errs.push((g.integrate_nodal(&u) - exact).abs());
        }
        let rate01 = (errs[0] / errs[1]).log2();
        let rate12 = (errs[1] / errs[2]).log2();
        assert!(
            rate01 > 1.6 && rate12 > 1.6,
            "rates {rate01:.2}, {rate12:.2} (errors {errs:?})"
        );
    }

    #[test]
    fn nearest_node_snapping() {
        let g = unit_box(21);
        let (rank, p) = g.nearest_inside_node([0.5004, 0.4996, 0.52]).unwrap();
        assert!(rank < g.n_inside());
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
        assert!((p[2] - 0.5).abs() < 1e-12 + 0.05);
        assert!(g.nearest_inside_node([1.2, 0.5, 0.5]).is_err());
        assert!(g.nearest_inside_node([0.0, 0.5, 0.5]).is_err());
        let ball = unit_ball(20);
        assert!(ball.nearest_inside_node([0.99, 0.0, 0.0]).is_err());
    }

    #[test]
    fn deterministic_reductions_are_chunk_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0202);
        let u: Vec<f64> = (0..100_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..100_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d1 = deterministic_dot(&u, &v);
        // Same inputs, same chunking: bitwise identical repeat runs.
        let d2 = deterministic_dot(&u, &v);
        assert_eq!(d1.to_bits(), d2.to_bits());
    }
}
