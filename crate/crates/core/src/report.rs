//! Versioned JSON reports written by the runner.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::SpaceSpec;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Passes when `value <= tol`.
    AtMost,
    /// Passes when `value >= tol`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    fn build(name: &str, value: f64, tol: f64, relation: Relation) -> Self {
        let finite = value.is_finite();
        let passed = finite
            && match relation {
                Relation::AtMost => value <= tol,
                Relation::AtLeast => value >= tol,
            };
        Check { name: name.into(), value: if finite { value } else { f64::MAX }, tol, relation, passed }
    }

    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        Self::build(name, value, tol, Relation::AtMost)
    }

    pub fn at_least(name: &str, value: f64, tol: f64) -> Self {
        Self::build(name, value, tol, Relation::AtLeast)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub notes: Vec<String>,
}

impl Suite {
    pub fn new(name: &str) -> Self {
        Suite { name: name.into(), passed: true, ..Default::default() }
    }

    pub fn check(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.into(), if v.is_finite() { v } else { f64::MAX });
    }

    pub fn series(&mut self, key: &str, v: Vec<f64>) {
        self.series.insert(key.into(), v.into_iter().map(|x| if x.is_finite() { x } else { f64::MAX }).collect());
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Records an error as a failed check.
    pub fn fail(&mut self, what: &str, err: &Error) {
        self.passed = false;
        self.notes.push(format!("{what}: {err}"));
    }

    pub fn get(&self, check: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == check)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: String,
    pub task: String,
    pub seed: u64,
    pub space: SpaceSpec,
    pub function: String,
    pub passed: bool,
    pub suites: Vec<Suite>,
    /// File names written next to the report.
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(task: &str, seed: u64, space: SpaceSpec, function: &str, suites: Vec<Suite>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION.into(),
            task: task.into(),
            seed,
            space,
            function: function.into(),
            passed: suites.iter().all(|s| s.passed),
            suites,
            artifacts: vec![],
        }
    }

    pub fn suite(&self, name: &str) -> Option<&Suite> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// JSON schema of [`Report`].
pub fn report_schema() -> serde_json::Value {
    let mut v = serde_json::to_value(schemars::schema_for!(Report)).expect("schema serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.insert("$id".into(), format!("mforge-report-v{SCHEMA_VERSION}").into());
    }
    v
}

/// Parses a report and checks its schema version.
pub fn validate_report(text: &str) -> Result<Report> {
    let r: Report = serde_json::from_str(text).map_err(|e| Error::Config(format!("report does not match schema: {e}")))?;
    if r.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            r.schema_version
        )));
    }
    Ok(r)
}
