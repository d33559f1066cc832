// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON problem specifications: schema, validation, and conversion to
//! solver-side types.
//!
//! A spec file is the only input channel; everything that affects the
//! numbers lives in it, so a spec plus a binary version pins a run
//! exactly. Parsing is strict (unknown fields are rejected), validation
//! errors carry the path of the offending field, and re-serializing a
//! parsed spec is idempotent.

use serde::{Deserialize, Serialize};

use blowup_core::grid::{DomainSpec, Shape, MAX_RESOLUTION, MIN_RESOLUTION};
use blowup_core::interp::LatticeField;
use blowup_core::potential::Potential;
use blowup_core::tolerances;

/// Current spec schema. Bumped on any incompatible field change.
pub const SCHEMA_VERSION: u32 = 1;

/// Validation failure, pointing at the offending field.
#[derive(Debug, thiserror::Error)]
#[error("spec error at `{path}`: {message}")]
pub struct SpecError {
    pub path: String,
    pub message: String,
}

fn fail(path: impl Into<String>, message: impl Into<String>) -> Result<(), SpecError> {
    Err(SpecError {
        path: path.into(),
        message: message.into(),
    })
}

/// One reproducible numerical experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub schema_version: u32,
    pub domain: DomainInput,
    /// Zeroth-order coefficient of the operator -Δ + a.
    #[serde(default)]
    pub potential_a: PotentialInput,
    /// Perturbation potential entering the rate denominator ∫V𝒢².
    #[serde(rename = "potential_V", default)]
    pub potential_v: PotentialInput,
    pub task: TaskInput,
    #[serde(default)]
    pub output: OutputInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainInput {
    pub shape: ShapeInput,
    /// Grid nodes per axis, shared by all three axes.
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeInput {
    Ball { center: [f64; 3], radius: f64 },
    Box { lo: [f64; 3], hi: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialInput {
    /// The same value everywhere.
    Constant { value: f64 },
    /// constant + linear·x + x·quadratic·x.
    Polynomial {
        constant: f64,
        #[serde(default)]
        linear: [f64; 3],
        #[serde(default)]
        quadratic: [[f64; 3]; 3],
    },
    /// Samples on the full resolution³ lattice (x index slowest, z index
    /// fastest), evaluated between nodes with the solver's cubic kernel.
    GridSamples { values: Vec<f64> },
}

impl Default for PotentialInput {
    fn default() -> Self {
        PotentialInput::Constant { value: 0.0 }
    }
}

fn default_tau_init() -> f64 {
    1.0
}

fn default_dimension() -> usize {
    3
}

fn default_r_max() -> f64 {
    1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskInput {
    /// Robin function at every interior grid node far enough from the
    /// boundary for a source placement (one linear solve per node; meant
    /// for coarse grids).
    RobinMap,
    /// Green fields for a list of interior source points.
    GreenEval { sources: Vec<[f64; 3]> },
    /// Newton continuation in the potential scale to a configuration
    /// where the lowest interaction eigenvalue and its position gradient
    /// both vanish. `potential_a` is the continuation base.
    FindConfig {
        initial_points: Vec<[f64; 3]>,
        #[serde(default = "default_tau_init")]
        tau_init: f64,
    },
    /// Blow-up rates at an already certified configuration, with an
    /// optional ε-sweep of the first-order matching residual.
    Predict {
        points: Vec<[f64; 3]>,
        #[serde(default)]
        eps_sweep: Vec<f64>,
    },
    /// Radial linearized modes (both branches per degree) and, when
    /// `liouville_tau` is set, a kernel-exclusion certificate.
    Linearized {
        #[serde(default = "default_dimension")]
        dimension: usize,
        degrees: Vec<usize>,
        #[serde(default = "default_r_max")]
        r_max: f64,
        #[serde(default)]
        liouville_tau: Option<f64>,
    },
    /// Built-in identity suite against closed-form references. Runs on
    /// fixed internal domains (the spec's domain and potentials are
    /// echoed but not used); any failed check exits with code 4.
    Verify,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputInput {
    /// Report file name inside --out-dir. Default `report.json`.
    #[serde(default)]
    pub report: Option<String>,
    /// Prefix prepended to every artifact file name.
    #[serde(default)]
    pub prefix: Option<String>,
}

impl ShapeInput {
    fn to_shape(self) -> Shape {
        match self {
            ShapeInput::Ball { center, radius } => Shape::Ball { center, radius },
            ShapeInput::Box { lo, hi } => Shape::Box { lo, hi },
        }
    }
}

impl DomainInput {
    #[must_use]
    pub fn to_domain(&self) -> DomainSpec {
        DomainSpec {
            shape: self.shape.to_shape(),
            resolution: self.resolution,
        }
    }

    /// Largest grid spacing of the discretized domain.
    fn h_max(&self) -> f64 {
        let (lo, hi) = self.shape.to_shape().bounding_box();
        let n = (self.resolution - 1) as f64;
        (0..3)
            .map(|a| (hi[a] - lo[a]) / n)
            .fold(0.0, f64::max)
    }

    /// Distance from `y` to the boundary, negative outside.
    fn boundary_distance(&self, y: [f64; 3]) -> f64 {
        match self.shape {
            ShapeInput::Ball { center, radius } => {
                let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
                radius - (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            }
            ShapeInput::Box { lo, hi } => {
                let mut d = f64::INFINITY;
                for a in 0..3 {
                    d = d.min(y[a] - lo[a]).min(hi[a] - y[a]);
                }
                d
            }
        }
    }
}

impl PotentialInput {
    /// Solver-side potential; `grid_n` and the lattice geometry are taken
    /// from the already validated domain.
    #[must_use]
    pub fn to_potential(&self, domain: &DomainInput) -> Potential {
        match self {
            PotentialInput::Constant { value } => Potential::Constant(*value),
            PotentialInput::Polynomial {
                constant,
                linear,
                quadratic,
            } => Potential::Quadratic {
                c0: *constant,
                lin: *linear,
                quad: *quadratic,
            },
            PotentialInput::GridSamples { values } => {
                let (lo, hi) = domain.shape.to_shape().bounding_box();
                let n = domain.resolution;
                let span = (n - 1) as f64;
                let h = [
                    (hi[0] - lo[0]) / span,
                    (hi[1] - lo[1]) / span,
                    (hi[2] - lo[2]) / span,
                ];
                Potential::GridSamples(LatticeField::from_lattice(n, lo, h, values.clone()))
            }
        }
    }
}

fn check_finite3(v: [f64; 3], path: &str) -> Result<(), SpecError> {
    if v.iter().any(|x| !x.is_finite()) {
        return fail(path, "coordinates must be finite");
    }
    Ok(())
}

fn check_file_name(name: &str, path: &str) -> Result<(), SpecError> {
    if name.is_empty() {
        return fail(path, "file name must not be empty");
    }
    if name.contains('/') || name.contains('\\') || name == "." || name == ".." {
        return fail(path, "file name must not contain path separators");
    }
    Ok(())
}

impl ProblemSpec {
    /// Full field-level validation; the returned error names the field.
    ///
    /// # Errors
    ///
    /// [`SpecError`] with the JSON path of the first offending field.
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.schema_version != SCHEMA_VERSION {
            return fail(
                "schema_version",
                format!(
                    "unsupported version {} (this binary reads {SCHEMA_VERSION})",
                    self.schema_version
                ),
            );
        }
        self.validate_domain()?;
        self.validate_potential(&self.potential_a, "potential_a")?;
        self.validate_potential(&self.potential_v, "potential_V")?;
        self.validate_task()?;
        if let Some(name) = &self.output.report {
            check_file_name(name, "output.report")?;
        }
        if let Some(prefix) = &self.output.prefix {
            if !prefix
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            {
                return fail(
                    "output.prefix",
                    "prefix may only contain ASCII letters, digits, '-', '_', '.'",
                );
            }
        }
        Ok(())
    }

    fn validate_domain(&self) -> Result<(), SpecError> {
        let res = self.domain.resolution;
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&res) {
            return fail(
                "domain.resolution",
                format!("resolution {res} outside the supported range [{MIN_RESOLUTION}, {MAX_RESOLUTION}]"),
            );
        }
        match self.domain.shape {
            ShapeInput::Ball { center, radius } => {
                check_finite3(center, "domain.shape.center")?;
                if !(radius.is_finite() && radius > 0.0) {
                    return fail("domain.shape.radius", "radius must be finite and positive");
                }
            }
            ShapeInput::Box { lo, hi } => {
                check_finite3(lo, "domain.shape.lo")?;
                check_finite3(hi, "domain.shape.hi")?;
                if (0..3).any(|a| hi[a] <= lo[a]) {
                    return fail("domain.shape", "hi must strictly dominate lo on every axis");
                }
            }
        }
        Ok(())
    }

    fn validate_potential(&self, p: &PotentialInput, path: &str) -> Result<(), SpecError> {
        match p {
            PotentialInput::Constant { value } => {
                if !value.is_finite() {
                    return fail(format!("{path}.value"), "value must be finite");
                }
            }
            PotentialInput::Polynomial {
                constant,
                linear,
                quadratic,
            } => {
                if !constant.is_finite() {
                    return fail(format!("{path}.constant"), "coefficient must be finite");
                }
                check_finite3(*linear, &format!("{path}.linear"))?;
                if quadratic.iter().flatten().any(|c| !c.is_finite()) {
                    return fail(format!("{path}.quadratic"), "coefficients must be finite");
                }
            }
            PotentialInput::GridSamples { values } => {
                let want = self.domain.resolution.pow(3);
                if values.len() != want {
                    return fail(
                        format!("{path}.values"),
                        format!("expected resolution³ = {want} samples, got {}", values.len()),
                    );
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return fail(format!("{path}.values"), "samples must be finite");
                }
            }
        }
        Ok(())
    }

    /// Interior check with the same source margin the solver enforces:
    /// strictly more than two grid cells from the boundary.
    fn check_interior(&self, y: [f64; 3], path: &str) -> Result<(), SpecError> {
        check_finite3(y, path)?;
        let margin = tolerances::MIN_INTERIOR_CELLS * self.domain.h_max();
        let d = self.domain.boundary_distance(y);
        if d <= margin {
            return fail(
                path,
                format!(
                    "point must be interior with more than {:.0} grid cells of clearance \
                     (boundary distance {d:.4e}, needs > {margin:.4e})",
                    tolerances::MIN_INTERIOR_CELLS
                ),
            );
        }
        Ok(())
    }

    fn validate_task(&self) -> Result<(), SpecError> {
        match &self.task {
            TaskInput::RobinMap | TaskInput::Verify => Ok(()),
            TaskInput::GreenEval { sources } => {
                if sources.is_empty() {
                    return fail("task.sources", "at least one source point is required");
                }
                for (s, &y) in sources.iter().enumerate() {
                    self.check_interior(y, &format!("task.sources[{s}]"))?;
                }
                Ok(())
            }
            TaskInput::FindConfig {
                initial_points,
                tau_init,
            } => {
                if initial_points.is_empty() {
                    return fail("task.initial_points", "at least one point is required");
                }
                for (i, &y) in initial_points.iter().enumerate() {
                    self.check_interior(y, &format!("task.initial_points[{i}]"))?;
                }
                if !tau_init.is_finite() {
                    return fail("task.tau_init", "must be finite");
                }
                Ok(())
            }
            TaskInput::Predict { points, eps_sweep } => {
                if points.is_empty() {
                    return fail("task.points", "at least one point is required");
                }
                for (i, &y) in points.iter().enumerate() {
                    self.check_interior(y, &format!("task.points[{i}]"))?;
                }
                for (i, &eps) in eps_sweep.iter().enumerate() {
                    if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
                        return fail(
                            format!("task.eps_sweep[{i}]"),
                            "each ε must lie strictly between 0 and 1",
                        );
                    }
                }
                Ok(())
            }
            TaskInput::Linearized {
                dimension,
                degrees,
                r_max,
                liouville_tau,
            } => {
                if !(3..=12).contains(dimension) {
                    return fail("task.dimension", "dimension must lie in [3, 12]");
                }
                if degrees.is_empty() {
                    return fail("task.degrees", "at least one degree is required");
                }
                if let Some(&k) = degrees.iter().find(|&&k| k > 12) {
                    return fail("task.degrees", format!("degree {k} exceeds the cap of 12"));
                }
                if !(r_max.is_finite() && (1e3..=1e12).contains(r_max)) {
                    return fail("task.r_max", "r_max must lie in [1e3, 1e12]");
                }
                if let Some(tau) = liouville_tau {
                    if !(tau.is_finite() && *tau > 1.0) {
                        return fail("task.liouville_tau", "τ must be finite and exceed 1");
                    }
                    if tau.fract() == 0.0 {
                        return fail(
                            "task.liouville_tau",
                            "integer τ is resonant; the certificate requires a non-integer decay exponent",
                        );
                    }
                }
                Ok(())
            }
        }
    }
}

fn allowed_keys(
    path: &str,
    obj: &serde_json::Map<String, serde_json::Value>,
    allowed: &[&str],
) -> Result<(), SpecError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(SpecError {
                path: if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                },
                message: "unknown field".into(),
            });
        }
    }
    Ok(())
}

/// Rejects unknown keys inside the kind-tagged objects, which serde's
/// internally tagged enums accept silently. Missing or mistyped fields are
/// left for the typed deserialization pass, which reports them with paths.
fn strict_keys(root: &serde_json::Value) -> Result<(), SpecError> {
    use serde_json::Value;
    let Some(obj) = root.as_object() else {
        return Ok(());
    };
    allowed_keys(
        "",
        obj,
        &["schema_version", "domain", "potential_a", "potential_V", "task", "output"],
    )?;
    if let Some(domain) = obj.get("domain").and_then(Value::as_object) {
        allowed_keys("domain", domain, &["shape", "resolution"])?;
        if let Some(shape) = domain.get("shape").and_then(Value::as_object) {
            match shape.get("kind").and_then(Value::as_str) {
                Some("ball") => allowed_keys("domain.shape", shape, &["kind", "center", "radius"])?,
                Some("box") => allowed_keys("domain.shape", shape, &["kind", "lo", "hi"])?,
                _ => {}
            }
        }
    }
    for name in ["potential_a", "potential_V"] {
        if let Some(p) = obj.get(name).and_then(Value::as_object) {
            match p.get("kind").and_then(Value::as_str) {
                Some("constant") => allowed_keys(name, p, &["kind", "value"])?,
                Some("polynomial") => {
                    allowed_keys(name, p, &["kind", "constant", "linear", "quadratic"])?;
                }
                Some("grid_samples") => allowed_keys(name, p, &["kind", "values"])?,
                _ => {}
            }
        }
    }
    if let Some(task) = obj.get("task").and_then(Value::as_object) {
        match task.get("kind").and_then(Value::as_str) {
            Some("robin_map" | "verify") => allowed_keys("task", task, &["kind"])?,
            Some("green_eval") => allowed_keys("task", task, &["kind", "sources"])?,
            Some("find_config") => {
                allowed_keys("task", task, &["kind", "initial_points", "tau_init"])?;
            }
            Some("predict") => allowed_keys("task", task, &["kind", "points", "eps_sweep"])?,
            Some("linearized") => allowed_keys(
                "task",
                task,
                &["kind", "dimension", "degrees", "r_max", "liouville_tau"],
            )?,
            _ => {}
        }
    }
    if let Some(output) = obj.get("output").and_then(Value::as_object) {
        allowed_keys("output", output, &["report", "prefix"])?;
    }
    Ok(())
}

/// Parses a spec from JSON, reporting the field path on schema errors.
///
/// # Errors
///
/// [`SpecError`] naming the offending field for both deserialization and
/// validation failures.
pub fn parse(json: &str) -> Result<ProblemSpec, SpecError> {
    let value: serde_json::Value = serde_json::from_str(json).map_err(|e| SpecError {
        path: "(document)".into(),
        message: e.to_string(),
    })?;
    strict_keys(&value)?;
    let spec: ProblemSpec = serde_path_to_error::deserialize(value).map_err(|e| SpecError {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}
