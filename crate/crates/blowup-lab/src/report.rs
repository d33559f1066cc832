// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run reports and artifact emission.
//!
//! The report body (spec echo, residuals, checks, artifact manifest) is
//! serialized once in compact form and hashed; two runs of the same spec
//! with the same binary produce byte-identical artifacts and equal
//! payload hashes. Wall-clock timings live next to the payload, outside
//! the hash, so reruns stay comparable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::spec::{ProblemSpec, SCHEMA_VERSION};

/// One named pass/fail gate: `value` is the measured quantity, `threshold`
/// the bound it was compared against.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl CheckResult {
    /// Gate on a magnitude: passes when |value| < threshold.
    pub fn bound(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            passed: value.is_finite() && value.abs() < threshold,
            value,
            threshold,
        }
    }

    /// Gate on a predicate evaluated elsewhere; `value` is reported as an
    /// indicator (1 = satisfied).
    pub fn flag(name: impl Into<String>, satisfied: bool) -> Self {
        CheckResult {
            name: name.into(),
            passed: satisfied,
            value: if satisfied { 1.0 } else { 0.0 },
            threshold: 0.5,
        }
    }
}

/// Manifest entry for one emitted file.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Checksummed, timing-free body of a run report.
#[derive(Debug, Serialize)]
pub struct ReportPayload {
    pub spec: ProblemSpec,
    pub residuals: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Everything `run` writes about one execution. The report file itself is
/// not part of the manifest (it cannot carry its own hash).
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub payload: ReportPayload,
    /// SHA-256 of the compact JSON serialization of `payload`.
    pub payload_sha256: String,
    /// Stage timings in milliseconds; excluded from the hash.
    pub timings_ms: BTreeMap<String, f64>,
}

#[must_use]
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Writes artifacts under one directory and accumulates their manifest.
pub struct Emitter {
    out_dir: PathBuf,
    prefix: String,
    pub records: Vec<ArtifactRecord>,
}

impl Emitter {
    /// # Errors
    ///
    /// I/O failure creating the output directory.
    pub fn new(out_dir: &Path, prefix: Option<&str>) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Emitter {
            out_dir: out_dir.to_path_buf(),
            prefix: prefix.unwrap_or("").to_string(),
            records: Vec::new(),
        })
    }

    /// Writes one artifact and records it in the manifest.
    ///
    /// # Errors
    ///
    /// I/O failure writing the file.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<String> {
        let file = format!("{}{name}", self.prefix);
        let path = self.out_dir.join(&file);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.records.push(ArtifactRecord {
            path: file.clone(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents),
        });
        Ok(file)
    }

    /// Serializes one artifact as pretty JSON and records it.
    ///
    /// # Errors
    ///
    /// I/O failure writing the file.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String> {
        let mut bytes =
            serde_json::to_vec_pretty(value).context("serializing JSON artifact")?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// # Errors
    ///
    /// I/O failure writing the report file.
    pub fn write_report(
        &self,
        report_name: &str,
        spec: &ProblemSpec,
        residuals: BTreeMap<String, f64>,
        checks: Vec<CheckResult>,
        timings_ms: BTreeMap<String, f64>,
    ) -> Result<RunReport> {
        let payload = ReportPayload {
            spec: spec.clone(),
            residuals,
            checks,
            artifacts: self.records.clone(),
        };
        let canonical =
            serde_json::to_vec(&payload).context("serializing report payload")?;
        let report = RunReport {
            schema_version: SCHEMA_VERSION,
            payload,
            payload_sha256: sha256_hex(&canonical),
            timings_ms,
        };
        let mut bytes =
            serde_json::to_vec_pretty(&report).context("serializing report")?;
        bytes.push(b'\n');
        let file = format!("{}{report_name}", self.prefix);
        let path = self.out_dir.join(&file);
        fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(report)
    }
}

/// Incremental CSV assembly with shortest-round-trip float formatting,
/// so emitted tables are both plotter-friendly and bit-reproducible.
pub struct Csv {
    buf: String,
}

impl Csv {
    #[must_use]
    pub fn new(header: &str) -> Self {
        let mut buf = String::with_capacity(4096);
        buf.push_str(header);
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, fields: &[f64]) {
        for (i, x) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{x}");
        }
        self.buf.push('\n');
    }

    #[must_use]
    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
