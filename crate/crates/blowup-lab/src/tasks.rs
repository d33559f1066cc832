// SPDX-License-Identifier: MIT OR Apache-2.0

//! Task dispatch: one function per task kind, each returning residual
//! values and pass/fail checks while emitting its artifacts.
//!
//! Artifact formats, shared by every task:
//!
//! - Plane and volume CSVs carry `x,y,z,kind,value` rows in lexicographic
//!   node order, where `kind` is 0 for lattice nodes outside the domain,
//!   1 for interior nodes skipped by the task (too close to the boundary
//!   to place a source), and 2 for evaluated nodes. Skipped and outside
//!   rows carry value 0 so every plane has exactly resolution² rows.
//! - Mode CSVs carry `r,v,dv_dr` with a strictly increasing radius
//!   column for both the regular and the singular branch.
//! - All floats are printed in shortest round-trip form, so identical
//!   runs produce byte-identical files.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use blowup_core::green::{self, GreenContext, GreenField};
use blowup_core::grid::{Grid, Shape};
use blowup_core::interaction::{self, BubbleConfiguration};
use blowup_core::linearized::{self, Branch, LinearizedMode};
use blowup_core::oracles;
use blowup_core::potential::Potential;
use blowup_core::predictor::{self, Rate};
use blowup_core::tolerances;

use crate::report::{CheckResult, Csv, Emitter};
use crate::spec::{ProblemSpec, TaskInput};
use crate::verify;

/// Residuals and checks produced by one task run.
#[derive(Debug, Default)]
pub struct TaskOutcome {
    pub residuals: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("task {context}: {message}")]
    Numerical {
        context: &'static str,
        message: String,
    },
    #[error(transparent)]
    Artifact(#[from] anyhow::Error),
}

fn numerical<E: std::fmt::Display>(context: &'static str) -> impl FnOnce(E) -> TaskError {
    move |e| TaskError::Numerical {
        context,
        message: e.to_string(),
    }
}

fn stage<T>(timings: &mut BTreeMap<String, f64>, name: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    timings.insert(name.to_string(), t0.elapsed().as_secs_f64() * 1e3);
    out
}

/// Runs the task of a validated spec, emitting artifacts through `emitter`
/// and recording stage timings.
///
/// # Errors
///
/// Numerical failures from the solver crates or I/O failures writing
/// artifacts.
pub fn execute(
    spec: &ProblemSpec,
    emitter: &mut Emitter,
    timings: &mut BTreeMap<String, f64>,
) -> Result<TaskOutcome, TaskError> {
    match &spec.task {
        TaskInput::RobinMap => run_robin_map(spec, emitter, timings),
        TaskInput::GreenEval { sources } => run_green_eval(spec, sources, emitter, timings),
        TaskInput::FindConfig {
            initial_points,
            tau_init,
        } => run_find_config(spec, initial_points, *tau_init, emitter, timings),
        TaskInput::Predict { points, eps_sweep } => {
            run_predict(spec, points, eps_sweep, emitter, timings)
        }
        TaskInput::Linearized {
            dimension,
            degrees,
            r_max,
            liouville_tau,
        } => run_linearized(*dimension, degrees, *r_max, *liouville_tau, emitter, timings),
        TaskInput::Verify => verify::run(timings),
    }
}

fn build_grid(spec: &ProblemSpec) -> Result<Grid, TaskError> {
    Grid::new(spec.domain.to_domain()).map_err(numerical("grid"))
}

/// Context plus the grid Laplacian's smallest eigenvalue, computed once so
/// coercivity certification within the run is solve-free where possible.
fn build_context<'a>(
    grid: &'a Grid,
    potential: Potential,
    context: &'static str,
) -> Result<GreenContext<'a>, TaskError> {
    let lambda1 = green::laplacian_lambda1(grid).map_err(numerical(context))?;
    GreenContext::new(grid, potential, Some(lambda1)).map_err(numerical(context))
}

fn domain_center(grid: &Grid) -> [f64; 3] {
    match grid.spec.shape {
        Shape::Ball { center, .. } => center,
        Shape::Box { lo, hi } => [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ],
    }
}

fn boundary_distance(shape: &Shape, y: [f64; 3]) -> f64 {
    match *shape {
        Shape::Ball { center, radius } => {
            let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
            radius - (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        }
        Shape::Box { lo, hi } => {
            let mut d = f64::INFINITY;
            for a in 0..3 {
                d = d.min(y[a] - lo[a]).min(hi[a] - y[a]);
            }
            d
        }
    }
}

/// Lattice index of the z-plane closest to `z`.
fn plane_index(grid: &Grid, z: f64) -> usize {
    let t = ((z - grid.lo[2]) / grid.h[2]).round();
    (t.max(0.0) as usize).min(grid.n - 1)
}

fn node_point(grid: &Grid, i: usize, j: usize, k: usize) -> [f64; 3] {
    [
        grid.lo[0] + i as f64 * grid.h[0],
        grid.lo[1] + j as f64 * grid.h[1],
        grid.lo[2] + k as f64 * grid.h[2],
    ]
}

/// `kind,value` pair for one node under the shared CSV convention; a NaN
/// entry in `values` marks an interior node the task skipped.
fn node_row(grid: &Grid, values: &[f64], i: usize, j: usize, k: usize) -> (f64, f64) {
    match grid.rank_of_node(i, j, k) {
        None => (0.0, 0.0),
        Some(m) if values[m].is_nan() => (1.0, 0.0),
        Some(m) => (2.0, values[m]),
    }
}

fn plane_csv(grid: &Grid, values: &[f64], k_plane: usize) -> Vec<u8> {
    let mut csv = Csv::new("x,y,z,kind,value");
    for i in 0..grid.n {
        for j in 0..grid.n {
            let p = node_point(grid, i, j, k_plane);
            let (kind, value) = node_row(grid, values, i, j, k_plane);
            csv.row(&[p[0], p[1], p[2], kind, value]);
        }
    }
    csv.into_bytes()
}

fn volume_csv(grid: &Grid, values: &[f64]) -> Vec<u8> {
    let mut csv = Csv::new("x,y,z,kind,value");
    for i in 0..grid.n {
        for j in 0..grid.n {
            for k in 0..grid.n {
                let p = node_point(grid, i, j, k);
                let (kind, value) = node_row(grid, values, i, j, k);
                csv.row(&[p[0], p[1], p[2], kind, value]);
            }
        }
    }
    csv.into_bytes()
}

fn run_robin_map(
    spec: &ProblemSpec,
    emitter: &mut Emitter,
    timings: &mut BTreeMap<String, f64>,
) -> Result<TaskOutcome, TaskError> {
    let grid = build_grid(spec)?;
    let a = spec.potential_a.to_potential(&spec.domain);
    let ctx = stage(timings, "context", || {
        build_context(&grid, a, "robin_map")
    })?;

    let h_max = grid.h.iter().copied().fold(0.0, f64::max);
    let margin = tolerances::MIN_INTERIOR_CELLS * h_max;
    let values = stage(timings, "solve", || -> Result<Vec<f64>, TaskError> {
        (0..grid.n_inside())
            .into_par_iter()
            .map(|m| {
                let y = grid.point_of_rank(m);
                if boundary_distance(&grid.spec.shape, y) <= margin {
                    return Ok(f64::NAN);
                }
                ctx.robin_function(y).map_err(numerical("robin_map"))
            })
            .collect()
    })?;

    let evaluated = values.iter().filter(|v| !v.is_nan()).count();
    let nonfinite = values
        .iter()
        .filter(|v| !v.is_nan() && !v.is_finite())
        .count();

    stage(timings, "emit", || -> Result<(), TaskError> {
        emitter.write("robin_map.csv", &volume_csv(&grid, &values))?;
        let center = domain_center(&grid);
        let k_plane = plane_index(&grid, center[2]);
        emitter.write("robin_plane.csv", &plane_csv(&grid, &values, k_plane))?;
        Ok(())
    })?;

    let mut outcome = TaskOutcome::default();
    outcome
        .residuals
        .insert("robin_nodes_evaluated".into(), evaluated as f64);
    let center = domain_center(&grid);
    if let Ok((rank, _)) = grid.nearest_inside_node(center) {
        if values[rank].is_finite() {
            outcome
                .residuals
                .insert("robin_at_domain_center".into(), values[rank]);
        }
    }
    outcome.checks.push(CheckResult::flag(
        "robin_values_finite",
        nonfinite == 0 && evaluated > 0,
    ));
    Ok(outcome)
}

fn run_green_eval(
    spec: &ProblemSpec,
    sources: &[[f64; 3]],
    emitter: &mut Emitter,
    timings: &mut BTreeMap<String, f64>,
) -> Result<TaskOutcome, TaskError> {
    let grid = build_grid(spec)?;
    let a = spec.potential_a.to_potential(&spec.domain);
    let ctx = stage(timings, "context", || {
        build_context(&grid, a, "green_eval")
    })?;

    let fields = stage(
        timings,
        "solve",
        || -> Result<Vec<Arc<GreenField>>, TaskError> {
            sources
                .par_iter()
                .map(|&y| ctx.solve_green(y).map_err(numerical("green_eval")))
                .collect()
        },
    )?;

    let mut outcome = TaskOutcome::default();
    stage(timings, "emit", || -> Result<(), TaskError> {
        for (s, field) in fields.iter().enumerate() {
            let nodal = field.nodal_g(&grid);
            let k_plane = plane_index(&grid, sources[s][2]);
            emitter.write(
                &format!("green_source_{s}_plane.csv"),
                &plane_csv(&grid, &nodal, k_plane),
            )?;
            let min = nodal.iter().copied().fold(f64::INFINITY, f64::min);
            outcome
                .residuals
                .insert(format!("phi_source_{s}"), field.robin_value);
            outcome
                .residuals
                .insert(format!("green_min_source_{s}"), min);
            outcome.checks.push(CheckResult {
                name: format!("green_nonnegative_source_{s}"),
                passed: min.is_finite() && min > -1e-6,
                value: min,
                threshold: 1e-6,
            });
        }
        Ok(())
    })?;

    if fields.len() > 1 {
        let mut gap = 0.0_f64;
        for i in 0..fields.len() {
            for j in (i + 1)..fields.len() {
                let gij = fields[i].g_at(sources[j]);
                let gji = fields[j].g_at(sources[i]);
                let scale = gij.abs().max(gji.abs()).max(1e-12);
                gap = gap.max((gij - gji).abs() / scale);
            }
        }
        outcome.residuals.insert("symmetry_gap_max".into(), gap);
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct FindConfigArtifact<'a> {
    tau: f64,
    points: &'a [[f64; 3]],
    weights: &'a [f64],
    rho: f64,
    grad_norm: f64,
    eigenvalues: &'a [f64],
    matrix: &'a [Vec<f64>],
}

fn run_find_config(
    spec: &ProblemSpec,
    initial_points: &[[f64; 3]],
    tau_init: f64,
    emitter: &mut Emitter,
    timings: &mut BTreeMap<String, f64>,
) -> Result<TaskOutcome, TaskError> {
    let grid = build_grid(spec)?;
    let a = spec.potential_a.to_potential(&spec.domain);
    let init =
        BubbleConfiguration::new(initial_points.to_vec()).map_err(numerical("find_config"))?;

    let sol = stage(timings, "newton", || {
        interaction::find_blowup_configuration(&grid, &a, &init, tau_init)
            .map_err(numerical("find_config"))
    })?;

    stage(timings, "emit", || -> Result<(), TaskError> {
        let mut csv = Csv::new("iteration,tau,rho,grad_norm,step_norm,damping");
        for step in &sol.trace.steps {
            csv.row(&[
                step.iteration as f64,
                step.tau,
                step.rho,
                step.grad_norm,
                step.step_norm,
                step.damping,
            ]);
        }
        emitter.write("continuation_trace.csv", &csv.into_bytes())?;
        emitter.write_json(
            "config.json",
            &FindConfigArtifact {
                tau: sol.tau,
                points: &sol.config.points,
                weights: &sol.spectrum.perron,
                rho: sol.spectrum.rho,
                grad_norm: sol.residual_grad,
                eigenvalues: &sol.spectrum.eigenvalues,
                matrix: &sol.spectrum.matrix,
            },
        )?;
        Ok(())
    })?;

    let mut outcome = TaskOutcome::default();
    outcome.residuals.insert("tau".into(), sol.tau);
    outcome.residuals.insert("rho".into(), sol.residual_rho);
    outcome
        .residuals
        .insert("grad_norm".into(), sol.residual_grad);
    outcome
        .residuals
        .insert("newton_iterations".into(), sol.trace.steps.len() as f64);
    outcome.checks.push(CheckResult::bound(
        "rho_converged",
        sol.residual_rho,
        tolerances::FIND_RHO_TOL,
    ));
    outcome.checks.push(CheckResult::bound(
        "gradient_converged",
        sol.residual_grad,
        tolerances::FIND_GRAD_TOL,
    ));
    Ok(outcome)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RateJson {
    Finite { value: f64 },
    Zero,
    Infinite,
    Indeterminate,
}

impl From<&Rate> for RateJson {
    fn from(rate: &Rate) -> Self {
        match rate {
            Rate::Finite(v) => RateJson::Finite { value: *v },
            Rate::Zero => RateJson::Zero,
            Rate::Infinite => RateJson::Infinite,
            Rate::Indeterminate => RateJson::Indeterminate,
        }
    }
}

#[derive(Serialize)]
struct PredictionArtifact<'a> {
    points: &'a [[f64; 3]],
    matrix: &'a [Vec<f64>],
    rho: f64,
    perron: &'a [f64],
    limit_profile_coefficients: &'a [f64],
    qv_values: &'a [f64],
    numerator: f64,
    denominator: f64,
    rates: Vec<RateJson>,
    sign_consistent: bool,
}

fn run_predict(
    spec: &ProblemSpec,
    points: &[[f64; 3]],
    eps_sweep: &[f64],
    emitter: &mut Emitter,
    timings: &mut BTreeMap<String, f64>,
) -> Result<TaskOutcome, TaskError> {
    let grid = build_grid(spec)?;
    let a = spec.potential_a.to_potential(&spec.domain);
    let v = spec.potential_v.to_potential(&spec.domain);
    let ctx = stage(timings, "context", || build_context(&grid, a, "predict"))?;
    let config = BubbleConfiguration::new(points.to_vec()).map_err(numerical("predict"))?;

    let prediction = stage(timings, "rate", || {
        predictor::blowup_rate(&ctx, &v, &config).map_err(numerical("predict"))
    })?;
    let spectrum = interaction::build_matrix(&ctx, &config).map_err(numerical("predict"))?;

    stage(timings, "emit", || -> Result<(), TaskError> {
        emitter.write_json(
            "prediction.json",
            &PredictionArtifact {
                points,
                matrix: &spectrum.matrix,
                rho: spectrum.rho,
                perron: &spectrum.perron,
                limit_profile_coefficients: &prediction.limit_profile_coefficients,
                qv_values: &prediction.qv_values,
                numerator: prediction.numerator,
                denominator: prediction.denominator,
                rates: prediction.rates.iter().map(RateJson::from).collect(),
                sign_consistent: prediction.sign_consistent,
            },
        )?;
        let profile =
            predictor::limit_profile(&ctx, &prediction.config).map_err(numerical("predict"))?;
        let mut nodal = vec![0.0; grid.n_inside()];
        for i in 0..grid.n {
            for j in 0..grid.n {
                for k in 0..grid.n {
                    if let Some(m) = grid.rank_of_node(i, j, k) {
                        nodal[m] = profile.lattice_value(i, j, k);
                    }
                }
            }
        }
        let k_plane = plane_index(&grid, points[0][2]);
        emitter.write("profile_plane.csv", &plane_csv(&grid, &nodal, k_plane))?;
        Ok(())
    })?;

    let mut outcome = TaskOutcome::default();
    outcome.residuals.insert("rho".into(), spectrum.rho);
    outcome
        .residuals
        .insert("numerator".into(), prediction.numerator);
    outcome
        .residuals
        .insert("denominator".into(), prediction.denominator);
    for (i, rate) in prediction.rates.iter().enumerate() {
        if let Rate::Finite(value) = rate {
            outcome
                .residuals
                .insert(format!("rate_point_{i}"), *value);
        }
    }

    if !eps_sweep.is_empty() {
        let rates: Vec<f64> = prediction
            .rates
            .iter()
            .map(|r| match r {
                Rate::Finite(v) => Ok(v.abs()),
                other => Err(TaskError::Numerical {
                    context: "predict",
                    message: format!("ε-sweep requires finite rates, found {other:?}"),
                }),
            })
            .collect::<Result<_, _>>()?;
        let sweep = stage(timings, "eps_sweep", || -> Result<Vec<u8>, TaskError> {
            let mut csv = Csv::new("eps,point,residual,residual_over_eps");
            for &eps in eps_sweep {
                let mu: Vec<f64> = rates.iter().map(|r| eps / r).collect();
                let lambda: Vec<f64> = mu.iter().map(|&m| (m / mu[0]).sqrt()).collect();
                let residuals =
                    predictor::expansion_residual(&ctx, &v, &prediction.config, &lambda, &mu, eps)
                        .map_err(numerical("predict"))?;
                for (i, &res) in residuals.iter().enumerate() {
                    csv.row(&[eps, i as f64, res, res / eps]);
                }
            }
            Ok(csv.into_bytes())
        })?;
        emitter.write("expansion_residuals.csv", &sweep)?;
    }
    Ok(outcome)
}

struct ModeBundle {
    degree: usize,
    regular: LinearizedMode,
    singular: LinearizedMode,
    log: linearized::LogCoordinateReport,
    wronskian: Vec<f64>,
}

#[derive(Serialize)]
struct ExclusionJson {
    degree: usize,
    fitted_origin_exponent: Option<f64>,
    reason: String,
}

#[derive(Serialize)]
struct LiouvilleArtifact {
    tau: f64,
    only_trivial: bool,
    exclusions: Vec<ExclusionJson>,
}

fn mode_csv(mode: &LinearizedMode) -> Vec<u8> {
    let mut csv = Csv::new("r,v,dv_dr");
    for j in 0..mode.radii.len() {
        csv.row(&[mode.radii[j], mode.values[j], mode.derivatives[j]]);
    }
    csv.into_bytes()
}

fn run_linearized(
    dimension: usize,
    degrees: &[usize],
    r_max: f64,
    liouville_tau: Option<f64>,
    emitter: &mut Emitter,
    timings: &mut BTreeMap<String, f64>,
) -> Result<TaskOutcome, TaskError> {
    let bundles = stage(timings, "modes", || -> Result<Vec<ModeBundle>, TaskError> {
        degrees
            .par_iter()
            .map(|&degree| {
                let regular = linearized::solve_mode(dimension, degree, Branch::Regular, r_max)
                    .map_err(numerical("linearized"))?;
                let singular = linearized::solve_mode(dimension, degree, Branch::Singular, r_max)
                    .map_err(numerical("linearized"))?;
                let log = linearized::log_coordinate_check(&regular);
                let wronskian = linearized::wronskian_samples(&regular, &singular);
                Ok(ModeBundle {
                    degree,
                    regular,
                    singular,
                    log,
                    wronskian,
                })
            })
            .collect()
    })?;

    let mut outcome = TaskOutcome::default();
    stage(timings, "emit", || -> Result<(), TaskError> {
        for b in &bundles {
            let k = b.degree;
            emitter.write(
                &format!("mode_n{dimension}_k{k}_regular.csv"),
                &mode_csv(&b.regular),
            )?;
            emitter.write(
                &format!("mode_n{dimension}_k{k}_singular.csv"),
                &mode_csv(&b.singular),
            )?;
        }
        Ok(())
    })?;

    for b in &bundles {
        let k = b.degree;
        let mu = b.regular.mu;
        outcome.residuals.insert(
            format!("mode_k{k}_log_residual_max"),
            b.log.max_relative_residual,
        );
        outcome
            .residuals
            .insert(format!("mode_k{k}_left_exponent"), b.log.left_exponent.slope);
        outcome.residuals.insert(
            format!("mode_k{k}_right_exponent"),
            b.log.right_exponent.slope,
        );
        outcome.checks.push(CheckResult::bound(
            format!("mode_k{k}_log_roundtrip"),
            b.log.transform_roundtrip_error,
            1e-12,
        ));

        let mid = b.wronskian[b.wronskian.len() / 2];
        outcome
            .residuals
            .insert(format!("mode_k{k}_wronskian_mid"), mid);

        // Degrees 0 and 1 are the scaling and translation zero modes: the
        // branch decaying at infinity coincides with the regular one, so
        // the exponent fit and the Wronskian constancy are only
        // meaningful gates from degree 2 upward.
        if k >= 2 {
            outcome.checks.push(CheckResult::bound(
                format!("mode_k{k}_left_exponent_fit"),
                (b.log.left_exponent.slope - mu) / mu,
                0.01,
            ));
            outcome.checks.push(CheckResult::bound(
                format!("mode_k{k}_right_exponent_fit"),
                (b.log.right_exponent.slope - mu) / mu,
                0.01,
            ));
            let drift = b
                .wronskian
                .iter()
                .fold(0.0_f64, |acc, &w| acc.max((w - mid).abs()));
            outcome.checks.push(CheckResult::bound(
                format!("mode_k{k}_wronskian_constant"),
                drift / mid.abs().max(f64::MIN_POSITIVE),
                1e-6,
            ));
        }

        if k == 0 {
            let worst = b
                .regular
                .radii
                .iter()
                .zip(&b.regular.values)
                .fold(0.0_f64, |acc, (&r, &v)| {
                    acc.max((v - oracles::exact_mode_zero(dimension as u32, r)).abs())
                });
            outcome.checks.push(CheckResult::bound(
                format!("mode_k{k}_exact_residual"),
                worst,
                1e-7,
            ));
        }
        if k == 1 {
            let norm = oracles::exact_mode_one(dimension as u32, 1.0);
            let worst = b
                .regular
                .radii
                .iter()
                .zip(&b.regular.values)
                .filter(|(&r, _)| r <= 10.0)
                .fold(0.0_f64, |acc, (&r, &v)| {
                    let want = oracles::exact_mode_one(dimension as u32, r) / norm;
                    acc.max((v - want).abs() / want.abs().max(1e-12))
                });
            outcome.checks.push(CheckResult::bound(
                format!("mode_k{k}_exact_residual"),
                worst,
                1e-7,
            ));
        }
    }

    if let Some(tau) = liouville_tau {
        let max_degree = degrees.iter().copied().max().unwrap_or(0);
        let report = stage(timings, "liouville", || {
            linearized::liouville_certificate(dimension, tau, max_degree)
                .map_err(numerical("linearized"))
        })?;
        emitter.write_json(
            "liouville.json",
            &LiouvilleArtifact {
                tau: report.tau,
                only_trivial: report.only_trivial,
                exclusions: report
                    .exclusions
                    .iter()
                    .map(|e| ExclusionJson {
                        degree: e.degree,
                        fitted_origin_exponent: e.fitted_origin_exponent,
                        reason: e.reason.clone(),
                    })
                    .collect(),
            },
        )?;
        outcome
            .residuals
            .insert("liouville_exclusions".into(), report.exclusions.len() as f64);
        outcome
            .checks
            .push(CheckResult::flag("liouville_only_trivial", report.only_trivial));
    }
    Ok(outcome)
}
