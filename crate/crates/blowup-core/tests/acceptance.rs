// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite: one end-to-end test per shipped guarantee, each
//! asserting its tolerance and runtime budget on the unit-ball reference
//! problem. The tests share leaked grids, eigenvalue bounds, and the
//! certified single-bubble configuration through `OnceLock` fixtures, and
//! serialize on a mutex so the measured runtimes stay meaningful on a
//! loaded machine.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Mutex, MutexGuard, OnceLock, PoisonError};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blowup_core::green::{self, GreenContext};
use blowup_core::grid::{DomainSpec, Grid, Shape};
use blowup_core::interaction::{self, BubbleConfiguration};
use blowup_core::linearized::{self, Branch};
use blowup_core::oracles;
use blowup_core::potential::Potential;
use blowup_core::predictor::{self, BlowupPrediction, Rate};
use blowup_core::profiles::{self, Weight, SQRT_3};
use blowup_core::tolerances;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(PoisonError::into_inner)
}

fn ball_grid(resolution: usize) -> &'static Grid {
    static GRIDS: OnceLock<Mutex<BTreeMap<usize, &'static Grid>>> = OnceLock::new();
    let cache = GRIDS.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut cache = cache.lock().unwrap_or_else(PoisonError::into_inner);
    cache
        .entry(resolution)
        .or_insert_with(|| {
            Box::leak(Box::new(
                Grid::new(DomainSpec {
                    shape: Shape::Ball {
                        center: [0.0; 3],
                        radius: 1.0,
                    },
                    resolution,
                })
                .expect("unit ball grid"),
            ))
        })
}

fn ball_lambda1(resolution: usize) -> f64 {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut cache = cache.lock().unwrap_or_else(PoisonError::into_inner);
    *cache.entry(resolution).or_insert_with(|| {
        green::laplacian_lambda1(ball_grid(resolution)).expect("Laplacian eigenvalue")
    })
}

struct CertifiedBall {
    tau: f64,
    points: Vec<[f64; 3]>,
}

/// Threshold search on the unit ball with base potential -1 and one bubble,
/// laddered 32 -> 48 -> 64 with warm starts.
fn certified_ball() -> &'static CertifiedBall {
    static CELL: OnceLock<CertifiedBall> = OnceLock::new();
    CELL.get_or_init(|| {
        let base = Potential::Constant(-1.0);
        let mut tau = 2.0;
        let mut points = vec![[0.0; 3]];
        for resolution in [32, 48, 64] {
            let init = BubbleConfiguration::new(points.clone()).expect("initial configuration");
            let sol =
                interaction::find_blowup_configuration(ball_grid(resolution), &base, &init, tau)
                    .expect("threshold search");
            tau = sol.tau;
            points = sol.config.points.clone();
        }
        CertifiedBall { tau, points }
    })
}

/// Rate prediction at the certified configuration with V = 1, kept with
/// its context so later tests reuse the cached solves.
fn certified_prediction() -> &'static (GreenContext<'static>, BlowupPrediction) {
    static CELL: OnceLock<(GreenContext<'static>, BlowupPrediction)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cert = certified_ball();
        let ctx = GreenContext::new(
            ball_grid(64),
            Potential::Constant(-cert.tau),
            Some(ball_lambda1(64)),
        )
        .expect("coercive context");
        let config = BubbleConfiguration::new(cert.points.clone()).expect("configuration");
        let prediction = predictor::blowup_rate(&ctx, &Potential::Constant(1.0), &config)
            .expect("certified rate");
        (ctx, prediction)
    })
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Rejection-samples `n` points with |x| <= radius_cap and pairwise
/// distance > min_sep; None when 200 draws cannot complete the tuple.
fn sample_points(
    rng: &mut ChaCha8Rng,
    n: usize,
    radius_cap: f64,
    min_sep: f64,
) -> Option<Vec<[f64; 3]>> {
    let mut points: Vec<[f64; 3]> = Vec::new();
    for _ in 0..200 {
        let cand = [
            rng.gen_range(-radius_cap..radius_cap),
            rng.gen_range(-radius_cap..radius_cap),
            rng.gen_range(-radius_cap..radius_cap),
        ];
        if dist(cand, [0.0; 3]) > radius_cap {
            continue;
        }
        if points.iter().all(|&p| dist(p, cand) > min_sep) {
            points.push(cand);
            if points.len() == n {
                return Some(points);
            }
        }
    }
    None
}

/// Least-squares slope of ln(error) against ln(h).
fn fitted_order(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, e) in samples {
        let x = h.ln();
        let y = e.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn a1_bubble_quadrature_constants() {
    let _guard = serial();
    let t0 = Instant::now();
    let b5 = profiles::radial_integral(|r| profiles::bubble_radial(r).powi(5), Weight::One)
        .expect("quintic integral");
    let b5_inv =
        profiles::radial_integral(|r| profiles::bubble_radial(r).powi(5), Weight::InverseRadius)
            .expect("quintic over radius");
    let b5_r = profiles::radial_integral(|r| profiles::bubble_radial(r).powi(5), Weight::Radius)
        .expect("quintic times radius");
    let wb4 = profiles::radial_integral(
        |r| 5.0 * profiles::eval_correction_w(r) * profiles::bubble_radial(r).powi(4),
        Weight::InverseRadius,
    )
    .expect("correction coupling");
    let elapsed = t0.elapsed();

    let cases = [
        ("int B^5", b5, 4.0 * PI * SQRT_3),
        ("int B^5/|x|", b5_inv, 4.0 * PI),
        ("int |x| B^5", b5_r, 24.0 * PI),
        ("5 int W B^4/|x|", wb4, 12.0 * PI * (PI - 1.0)),
    ];
    for (name, got, want) in cases {
        let rel = ((got - want) / want).abs();
        println!("{name} = {got:.15e}, closed form {want:.15e}, rel {rel:.3e}");
        assert!(rel <= 1e-8, "{name}: relative error {rel:.3e} exceeds 1e-8");
    }
    println!("runtime {elapsed:?}");
    assert!(
        elapsed < Duration::from_secs(1),
        "quadrature took {elapsed:?}, budget 1 s"
    );
}

#[test]
fn a2_correction_profile_ode_residual_and_far_field_asymptote() {
    let _guard = serial();
    let t0 = Instant::now();

    let mut worst = 0.0_f64;
    let mut worst_r = 0.0_f64;
    let mut r = 1e-3;
    while r <= 1e3 {
        let (w, w1, w2) = profiles::correction_w_derivatives(r);
        let b = profiles::bubble_radial(r);
        let res =
            (w2 + 2.0 * w1 / r + profiles::linearized_potential(r) * w - b).abs() / (1.0 + b.abs());
        if res > worst {
            worst = res;
            worst_r = r;
        }
        r *= 1.05;
    }

    let r_far = 1e3;
    let w_far = profiles::eval_correction_w(r_far);
    let asymptote = 0.5 * SQRT_3 * r_far - 3.0 * PI;
    let deviation = (w_far - asymptote).abs();
    let elapsed = t0.elapsed();

    println!("ODE residual sup {worst:.3e} at r = {worst_r:.3e}");
    println!(
        "W({r_far:.0e}) = {w_far:.9}, linear asymptote {asymptote:.9}, deviation {deviation:.6}"
    );
    println!("runtime {elapsed:?}");
    assert!(
        worst < 1e-7,
        "ODE residual {worst:.3e} exceeds 1e-7 (at r = {worst_r:.3e})"
    );
    assert!(
        elapsed < Duration::from_secs(1),
        "sweep took {elapsed:?}, budget 1 s"
    );
    // The exact far field is (sqrt3/2)R - 3pi + 24*sqrt3*ln(R)/R + O(1/R);
    // at R = 1e3 the log term alone is ~0.287, so the linear asymptote is
    // not reached to 1e-2 there yet.
    assert!(
        deviation < 1e-2,
        "far-field deviation {deviation:.6} exceeds 1e-2 absolute at R = 1e3"
    );
}

#[test]
fn a3_ball_robin_value_and_convergence_order() {
    let _guard = serial();
    let t0 = Instant::now();

    let ctx64 = GreenContext::new(ball_grid(64), Potential::Constant(0.0), None).expect("coercive");
    let center_64 = ctx64.robin_function([0.0; 3]).expect("center solve");
    let center_err = (center_64 - 1.0 / (4.0 * PI)).abs();

    // The order is observed on the coercive constant potential against the
    // exact ball value: with a = 0 the scheme reproduces the center value
    // to solver tolerance at every resolution (exact boundary data, zero
    // interior right side), so that error curve has no slope to fit.
    let oracle = oracles::ball_center_robin(-1.0);
    let mut samples = Vec::new();
    for resolution in [32usize, 48, 64] {
        let grid = ball_grid(resolution);
        let ctx = GreenContext::new(
            grid,
            Potential::Constant(-1.0),
            Some(ball_lambda1(resolution)),
        )
        .expect("coercive");
        let err = (ctx.robin_function([0.0; 3]).expect("center solve") - oracle).abs();
        let h = grid.h.iter().copied().fold(0.0, f64::max);
        samples.push((h, err));
        println!("resolution {resolution}: h = {h:.4e}, error vs ball value {err:.3e}");
    }
    let elapsed = t0.elapsed();

    let order = fitted_order(&samples);
    println!("center value error at 64^3 (a = 0): {center_err:.3e}");
    println!("fitted convergence order {order:.3}");
    println!("runtime {elapsed:?}");
    assert!(
        center_err < 2e-3,
        "|phi(0) - 1/(4pi)| = {center_err:.3e} exceeds 2e-3 at 64^3"
    );
    assert!(order >= 1.8, "observed order {order:.3} below 1.8");
    assert!(
        elapsed < Duration::from_secs(60),
        "solves took {elapsed:?}, budget 60 s"
    );
}

#[test]
fn a4_threshold_search_recovers_ball_eigenvalue() {
    let _guard = serial();
    let t0 = Instant::now();
    let cert = certified_ball();
    let elapsed = t0.elapsed();

    let target = PI * PI / 4.0;
    let rel = ((cert.tau - target) / target).abs();
    let off_center = dist(cert.points[0], [0.0; 3]);
    println!(
        "tau = {:.10}, pi^2/4 = {target:.10}, rel {rel:.3e}, |x0| = {off_center:.3e}",
        cert.tau
    );
    println!("runtime {elapsed:?}");
    assert!(rel < 1e-3, "threshold misses pi^2/4 by {rel:.3e} relative");
    assert!(off_center < 1e-3, "|x0| = {off_center:.3e} exceeds 1e-3");
    assert!(
        elapsed < Duration::from_secs(300),
        "search took {elapsed:?}, budget 5 min"
    );
}

#[test]
fn a5_perron_structure_on_random_configurations() {
    let _guard = serial();
    let t0 = Instant::now();
    let grid = ball_grid(32);
    let contexts = [
        GreenContext::new(grid, Potential::Constant(0.0), None).expect("coercive"),
        GreenContext::new(grid, Potential::Constant(-1.0), Some(ball_lambda1(32)))
            .expect("coercive"),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_5505);
    let mut tested = 0usize;
    while tested < 50 {
        let n = 2 + tested % 3;
        let Some(points) = sample_points(&mut rng, n, 0.7, 0.3) else {
            continue;
        };
        let config = BubbleConfiguration::new(points).expect("separated points");
        let s = interaction::build_matrix(&contexts[tested % 2], &config).expect("spectrum");

        let simple = s.spectral_gap > tolerances::SPECTRAL_GAP_MIN;
        let perron_positive = s.perron.iter().all(|&p| p > 0.0);
        let mixed = s.eigenvectors[1..]
            .iter()
            .all(|v| v.iter().any(|&c| c > 0.0) && v.iter().any(|&c| c < 0.0));
        assert!(
            simple && perron_positive && mixed,
            "configuration {tested} (n = {n}): simple {simple}, Perron positive \
             {perron_positive}, others mixed {mixed}\nmatrix {:?}",
            s.matrix
        );
        tested += 1;
    }
    let elapsed = t0.elapsed();
    println!("50/50 configurations pass; runtime {elapsed:?}");
    assert!(
        elapsed < Duration::from_secs(600),
        "suite took {elapsed:?}, budget 10 min"
    );
}

#[test]
fn a6_eigenvalue_gradient_matches_finite_differences() {
    let _guard = serial();
    let t0 = Instant::now();
    let grid = ball_grid(64);
    let ctx =
        GreenContext::new(grid, Potential::Constant(-1.0), Some(ball_lambda1(64))).expect("coercive");

    let mut rng = ChaCha8Rng::seed_from_u64(0x06ad_1e57);
    let mut tested = 0usize;
    while tested < 10 {
        let n = 2 + tested % 2;
        let Some(points) = sample_points(&mut rng, n, 0.6, 0.3) else {
            continue;
        };
        let config = BubbleConfiguration::new(points.clone()).expect("separated points");
        let s = interaction::build_matrix(&ctx, &config).expect("spectrum");
        if s.spectral_gap <= 1e-3 {
            continue;
        }
        let mtildes = [
            interaction::build_mtilde(&ctx, &config, 0).expect("x derivative"),
            interaction::build_mtilde(&ctx, &config, 1).expect("y derivative"),
            interaction::build_mtilde(&ctx, &config, 2).expect("z derivative"),
        ];
        let hf = interaction::rho_gradient(&s, &mtildes).expect("gradient");

        let delta = 1e-3;
        let mut fd = vec![0.0; 3 * n];
        for i in 0..n {
            for l in 0..3 {
                let probe = |shift: f64| -> f64 {
                    let mut pts = points.clone();
                    pts[i][l] += shift;
                    let c = BubbleConfiguration::new(pts).expect("separated points");
                    interaction::build_matrix(&ctx, &c).expect("spectrum").rho
                };
                let d1 = (probe(delta) - probe(-delta)) / (2.0 * delta);
                let d2 = (probe(2.0 * delta) - probe(-2.0 * delta)) / (4.0 * delta);
                fd[3 * i + l] = (4.0 * d1 - d2) / 3.0;
            }
        }

        let diff: f64 = hf
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        let rel = diff / scale;
        println!(
            "configuration {tested} (n = {n}): gap {:.3e}, gradient rel error {rel:.3e}",
            s.spectral_gap
        );
        assert!(
            rel < 1e-4,
            "configuration {tested}: gradient rel error {rel:.3e} exceeds 1e-4"
        );
        tested += 1;
    }
    println!("runtime {:?}", t0.elapsed());
}

#[test]
fn a7_single_bubble_reduction_and_quadrature_paths() {
    let _guard = serial();
    let reduced = 12.0 * PI * PI * SQRT_3 / (48.0 * PI * PI);
    let identity_gap = (reduced - SQRT_3 / 4.0).abs();

    let t0 = Instant::now();
    let (_, prediction) = certified_prediction();
    let direct = prediction.denominator;
    let weighted: f64 = prediction
        .limit_profile_coefficients
        .iter()
        .zip(&prediction.qv_values)
        .map(|(c, q)| c * q)
        .sum();
    let rel = ((direct - weighted) / weighted).abs();
    let elapsed = t0.elapsed();

    println!("reduction identity gap {identity_gap:.3e}");
    println!(
        "int V*G^2: direct {direct:.15e}, weighted moments {weighted:.15e}, rel {rel:.3e}"
    );
    println!("runtime {elapsed:?}");
    assert!(
        identity_gap < 1e-10,
        "12pi^2 sqrt3 / 48pi^2 != sqrt3/4 to 1e-10 (gap {identity_gap:.3e})"
    );
    assert!(
        rel < 1e-3,
        "quadrature paths disagree by {rel:.3e} relative"
    );
}

#[test]
fn a8_mode_dichotomy_and_exact_low_degree_solutions() {
    let _guard = serial();
    let t0 = Instant::now();

    for k in [2usize, 3, 4] {
        let mode = linearized::solve_mode(3, k, Branch::Regular, 1e3).expect("regular mode");
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for (j, &r) in mode.radii.iter().enumerate() {
            if !(1e-3..=1e3).contains(&r) {
                continue;
            }
            let ratio = mode.values[j] / r.powi(k as i32);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        let log = linearized::log_coordinate_check(&mode);
        let left = ((log.left_exponent.slope - mode.mu) / mode.mu).abs();
        let right = ((log.right_exponent.slope - mode.mu) / mode.mu).abs();
        println!(
            "k = {k}: v/r^k in [{lo:.4e}, {hi:.4e}], exponent fit rel err left {left:.2e} \
             right {right:.2e}"
        );
        assert!(lo > 0.0, "k = {k}: v/r^k reaches {lo:.3e}");
        assert!(
            hi / lo < 100.0,
            "k = {k}: v/r^k spans [{lo:.3e}, {hi:.3e}], ratio {:.1}",
            hi / lo
        );
        assert!(left < 0.01, "k = {k}: left exponent off by {left:.3e}");
        assert!(right < 0.01, "k = {k}: right exponent off by {right:.3e}");
    }

    let zero = linearized::solve_mode(3, 0, Branch::Regular, 1e3).expect("degree 0");
    let worst0 = zero
        .radii
        .iter()
        .zip(&zero.values)
        .fold(0.0_f64, |acc, (&r, &v)| {
            acc.max((v - oracles::exact_mode_zero(3, r)).abs())
        });

    let one = linearized::solve_mode(3, 1, Branch::Regular, 1e3).expect("degree 1");
    let norm = oracles::exact_mode_one(3, 1.0);
    let worst1 = one
        .radii
        .iter()
        .zip(&one.values)
        .filter(|(&r, _)| r <= 10.0)
        .fold(0.0_f64, |acc, (&r, &v)| {
            let want = oracles::exact_mode_one(3, r) / norm;
            acc.max((v - want).abs() / want.abs().max(1e-12))
        });
    let elapsed = t0.elapsed();

    println!("exact-solution residuals: degree 0 {worst0:.3e}, degree 1 {worst1:.3e}");
    println!("runtime {elapsed:?}");
    assert!(worst0 < 1e-9, "degree-0 residual {worst0:.3e} exceeds 1e-9");
    assert!(worst1 < 1e-9, "degree-1 residual {worst1:.3e} exceeds 1e-9");
    assert!(
        elapsed < Duration::from_secs(10),
        "mode suite took {elapsed:?}, budget 10 s"
    );
}

#[test]
fn a9_expansion_residual_sweep() {
    let _guard = serial();
    let (ctx, prediction) = certified_prediction();
    let rate = match prediction.rates[0] {
        Rate::Finite(v) => v,
        ref other => panic!("expected a finite rate, got {other:?}"),
    };
    let v = Potential::Constant(1.0);

    let sweep = [1e-2, 1e-3, 1e-4];
    let mut ratios = Vec::new();
    for &eps in &sweep {
        let mu = eps / rate.abs();
        let res =
            predictor::expansion_residual(ctx, &v, &prediction.config, &[1.0], &[mu], eps)
                .expect("expansion residual")[0];
        ratios.push(res.abs() / eps);
        println!("eps = {eps:.0e}: residual {res:.6e}, residual/eps {:.6}", res.abs() / eps);
    }
    // The first-order residual is linear in eps at a certified
    // configuration, so residual/eps tends to the constant 2*Q_V rather
    // than decaying.
    assert!(
        ratios[1] <= ratios[0] / 5.0 && ratios[2] <= ratios[1] / 5.0,
        "residual/eps must fall at least 5x per decade, got {ratios:?}"
    );
}
