//! Foundry integration: project scaffolding, `forge build` / `forge test`
//! subprocesses, output parsing and outcome classification.

mod classify;
mod parse;
mod process;
mod scaffold;

use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{classify_outcome, OutcomeClass, RevertHeuristics};
pub use parse::{parse_build_output, parse_test_output, ParsedBuild, ParsedTests};
pub use process::{ForgeToolchain, ProcessOutput, FORGE_BIN_ENV, OUTPUT_CAP_BYTES};
pub use scaffold::{foundry_toml, scaffold_project, ProjectLayout, ScaffoldOptions};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("forge executable not found: {0}")]
    ForgeNotInstalled(PathBuf),
    #[error("process timed out after {after_s:.1}s")]
    Timeout { after_s: f64, partial_output: String },
    #[error("failed to spawn {program}: {source}")]
    SpawnFailure {
        program: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("required template or library missing: {0}")]
    TemplateMissing(PathBuf),
    #[error("project directory {0} is already scaffolded")]
    AlreadyScaffolded(PathBuf),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Option<String>,
    pub message: String,
    pub file: Option<String>,
    pub line: Option<u32>,
    pub column: Option<u32>,
}

/// Build outcome without the raw log; stored with each attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub duration_s: f64,
    pub parse_degraded: bool,
    #[serde(default)]
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub summary: BuildSummary,
    pub raw_output: String,
}

impl Deref for BuildReport {
    type Target = BuildSummary;

    fn deref(&self) -> &BuildSummary {
        &self.summary
    }
}

impl BuildReport {
    pub fn from_output(raw_output: String, exit_code: Option<i32>, duration_s: f64) -> Self {
        let parsed = parse_build_output(&raw_output);
        let success = if parsed.degraded {
            exit_code == Some(0)
        } else {
            parsed.success
        };
        BuildReport {
            summary: BuildSummary {
                success,
                diagnostics: parsed.diagnostics,
                duration_s,
                parse_degraded: parsed.degraded,
                timed_out: false,
            },
            raw_output,
        }
    }

    pub fn timed_out(partial_output: String, duration_s: f64) -> Self {
        let parsed = parse_build_output(&partial_output);
        BuildReport {
            summary: BuildSummary {
                success: false,
                diagnostics: parsed.diagnostics,
                duration_s,
                parse_degraded: parsed.degraded,
                timed_out: true,
            },
            raw_output: partial_output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub status: TestStatus,
    pub revert_reason: Option<String>,
    /// `Contract::function` frames that reverted in the failure trace.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reverted_frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub ran: bool,
    pub tests: Vec<TestRecord>,
    pub duration_s: f64,
    /// Forge reported that no tests matched.
    pub no_tests: bool,
    pub parse_degraded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub summary: TestSummary,
    pub raw_output: String,
}

impl Deref for TestReport {
    type Target = TestSummary;

    fn deref(&self) -> &TestSummary {
        &self.summary
    }
}

impl TestReport {
    pub fn from_output(raw_output: String, duration_s: f64) -> Self {
        let parsed = parse_test_output(&raw_output);
        TestReport {
            summary: TestSummary {
                ran: true,
                tests: parsed.tests,
                duration_s,
                no_tests: parsed.no_tests,
                parse_degraded: parsed.degraded,
            },
            raw_output,
        }
    }

    /// A run killed at its deadline: `ran` is false and nothing is classified.
    pub fn timed_out(partial_output: String, duration_s: f64) -> Self {
        TestReport {
            summary: TestSummary {
                ran: false,
                tests: Vec::new(),
                duration_s,
                no_tests: false,
                parse_degraded: false,
            },
            raw_output: partial_output,
        }
    }
}

/// Compiles and tests a scaffolded project.
///
/// Output is written verbatim to `log`.
pub trait Toolchain: Send + Sync {
    fn build(&self, project: &Path, log: &Path, timeout: Duration)
        -> Result<BuildReport, HarnessError>;
    fn test(&self, project: &Path, log: &Path, timeout: Duration)
        -> Result<TestReport, HarnessError>;
}
