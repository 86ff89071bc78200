//! Machine-readable run reports: a versioned JSON document with one entry
//! per check, the effective tolerances, and a timings block that is the
//! only nondeterministic part of the output.

use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub observed: Value,
    pub target: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn pass(name: &str, observed: impl Into<Value>, target: impl Into<Value>) -> Self {
        Check {
            name: name.into(),
            status: Status::Pass,
            observed: observed.into(),
            target: target.into(),
            tolerance: None,
            detail: String::new(),
        }
    }

    /// Pass/fail on |observed| <= tolerance.
    pub fn bounded(name: &str, observed: f64, tolerance: f64, detail: &str) -> Self {
        Check {
            name: name.into(),
            status: if observed.is_finite() && observed.abs() <= tolerance {
                Status::Pass
            } else {
                Status::Fail
            },
            observed: json_num(observed),
            target: Value::from(0.0),
            tolerance: Some(tolerance),
            detail: detail.into(),
        }
    }

    /// Pass/fail on a plain predicate.
    pub fn holds(name: &str, ok: bool, observed: impl Into<Value>, detail: &str) -> Self {
        Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            observed: observed.into(),
            target: Value::Null,
            tolerance: None,
            detail: detail.into(),
        }
    }

    pub fn not_applicable(name: &str, detail: &str) -> Self {
        Check {
            name: name.into(),
            status: Status::NotApplicable,
            observed: Value::Null,
            target: Value::Null,
            tolerance: None,
            detail: detail.into(),
        }
    }

    pub fn with_detail(mut self, detail: &str) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self
    }
}

/// Serializes non-finite floats as strings so the report never silently
/// nulls them (serde_json turns bare infinities into null).
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(format!("{x}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_ms: f64,
    pub checks_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub spec_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub passed: bool,
    /// Wall-clock data; excluded from determinism comparisons.
    pub timings: Timings,
}

impl Report {
    pub fn new(command: &str, suite: Option<&str>, spec_path: &Path, sigma: Option<f64>, seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("fracext".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("schema".into(), "1".into());
        Report {
            schema: 1,
            command: command.into(),
            suite: suite.map(String::from),
            spec_path: spec_path.display().to_string(),
            sigma,
            seed,
            versions,
            tolerances: BTreeMap::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            passed: true,
            timings: Timings {
                total_ms: 0.0,
                checks_ms: BTreeMap::new(),
            },
        }
    }

    pub fn push(&mut self, check: Check) {
        if check.status == Status::Fail {
            self.passed = false;
        }
        self.checks.push(check);
    }

    /// Writes report.json into the output directory and returns its path.
    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("report.json");
        let text = serde_json::to_string_pretty(self).expect("reports always serialize");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Effective tolerance set: defaults overlaid with `--tol` overrides.
/// Unknown override names are rejected so typos cannot silently loosen runs.
pub fn resolve_tolerances(
    defaults: &[(&str, f64)],
    overrides: &[(String, f64)],
) -> Result<BTreeMap<String, f64>, String> {
    let mut map: BTreeMap<String, f64> = defaults
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    for (name, value) in overrides {
        if !map.contains_key(name) {
            let known: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
            return Err(format!(
                "unknown tolerance '{name}' (this run accepts: {})",
                known.join(", ")
            ));
        }
        map.insert(name.clone(), *value);
    }
    Ok(map)
}
