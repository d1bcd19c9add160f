//! Dataset manifest, vulnerability taxonomy, per-case records and the
//! append-only results log.

mod manifest;
mod store;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::Attempt;
use crate::soltx::SolTxError;

pub use manifest::{load_manifest, CampaignConfig, Manifest, DEFAULT_SOLC_VERSION};
pub use store::{replay, Replay, ResultStore};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("schema violation at `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("duplicate case_id {0:?}")]
    DuplicateCaseId(String),
    #[error("unknown vulnerability class {0:?}")]
    UnknownVulnClass(String),
    #[error("source of case {case_id:?} does not lex: {source}")]
    UnlexableSource {
        case_id: String,
        #[source]
        source: SolTxError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error("result store {path} is corrupt: {bad_lines} interior lines unparsable")]
    CorruptStore { path: PathBuf, bad_lines: usize },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}

/// The eight vulnerability classes of the evaluation taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VulnClass {
    Reentrancy,
    AccessControl,
    Arithmetic,
    BadRandomness,
    FrontRunning,
    DoS,
    TimeManipulation,
    UncheckedLowLevelCalls,
}

impl VulnClass {
    pub const ALL: [VulnClass; 8] = [
        VulnClass::Reentrancy,
        VulnClass::AccessControl,
        VulnClass::Arithmetic,
        VulnClass::BadRandomness,
        VulnClass::FrontRunning,
        VulnClass::DoS,
        VulnClass::TimeManipulation,
        VulnClass::UncheckedLowLevelCalls,
    ];

    /// Human-readable row label, e.g. "Unchecked Low Level Calls".
    pub fn label(self) -> &'static str {
        match self {
            VulnClass::Reentrancy => "Reentrancy",
            VulnClass::AccessControl => "Access Control",
            VulnClass::Arithmetic => "Arithmetic",
            VulnClass::BadRandomness => "Bad Randomness",
            VulnClass::FrontRunning => "Front Running",
            VulnClass::DoS => "DoS",
            VulnClass::TimeManipulation => "Time Manipulation",
            VulnClass::UncheckedLowLevelCalls => "Unchecked Low Level Calls",
        }
    }

    pub fn snake_name(self) -> &'static str {
        match self {
            VulnClass::Reentrancy => "reentrancy",
            VulnClass::AccessControl => "access_control",
            VulnClass::Arithmetic => "arithmetic",
            VulnClass::BadRandomness => "bad_randomness",
            VulnClass::FrontRunning => "front_running",
            VulnClass::DoS => "dos",
            VulnClass::TimeManipulation => "time_manipulation",
            VulnClass::UncheckedLowLevelCalls => "unchecked_low_level_calls",
        }
    }
}

impl fmt::Display for VulnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for VulnClass {
    type Err = CorpusError;

    /// Accepts the variant name, the row label or the snake_case name,
    /// ignoring case, spaces, dashes and underscores.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        VulnClass::ALL
            .into_iter()
            .find(|c| format!("{c:?}").to_lowercase() == norm)
            .ok_or_else(|| CorpusError::UnknownVulnClass(s.to_string()))
    }
}

/// A preprocessing step applied to a case's source before prompting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Directive {
    StripComments,
    MigratePragma,
    WrapUnchecked(Vec<String>),
}

impl FromStr for Directive {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "strip_comments" => Ok(Directive::StripComments),
            None if s == "migrate_pragma" => Ok(Directive::MigratePragma),
            Some(("wrap_unchecked", names)) => {
                let names: Vec<String> = names
                    .split(',')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .map(String::from)
                    .collect();
                if names.is_empty() {
                    Err("wrap_unchecked needs at least one function name".into())
                } else if let Some(bad) = names.iter().find(|n| !crate::soltx::is_identifier(n)) {
                    Err(format!("{bad:?} is not a function name"))
                } else {
                    Ok(Directive::WrapUnchecked(names))
                }
            }
            _ => Err(format!("unknown directive {s:?}")),
        }
    }
}

impl TryFrom<String> for Directive {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Directive> for String {
    fn from(d: Directive) -> Self {
        d.to_string()
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::StripComments => f.write_str("strip_comments"),
            Directive::MigratePragma => f.write_str("migrate_pragma"),
            Directive::WrapUnchecked(names) => write!(f, "wrap_unchecked:{}", names.join(",")),
        }
    }
}

/// One vulnerable contract under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractCase {
    pub case_id: String,
    /// Path as written in the manifest.
    pub source: PathBuf,
    /// `source` resolved against the manifest directory.
    pub source_path: PathBuf,
    pub source_text: String,
    pub vuln_class: VulnClass,
    pub preprocess: Vec<Directive>,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseStatus {
    Success,
    SuccessByRevertHeuristic,
    FailedCompile,
    FailedTest,
    RetryExhausted,
    BackendError,
    HarnessError,
}

impl CaseStatus {
    pub fn is_success(self) -> bool {
        matches!(self, CaseStatus::Success | CaseStatus::SuccessByRevertHeuristic)
    }

    pub fn is_error(self) -> bool {
        matches!(self, CaseStatus::BackendError | CaseStatus::HarnessError)
    }
}

/// Full per-case history and final classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub vuln_class: VulnClass,
    pub status: CaseStatus,
    pub attempts: Vec<Attempt>,
    pub wall_clock_s: f64,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
