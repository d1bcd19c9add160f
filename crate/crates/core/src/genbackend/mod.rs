//! Prompt construction, generation backends and script extraction.

mod extract;
mod http;
mod prompt;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VulnClass;

pub use extract::{extract_scripts, render_pair};
pub use http::{api_key_env_var, HttpChatBackend, HttpChatConfig};
pub use prompt::{build_exploit_prompt, build_repair_prompt, PromptTemplates, ERROR_EXCERPT_BYTES, TIMEOUT_NOTICE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("rate limited{}", retry_after_s.map(|s| format!(", retry after {s}s")).unwrap_or_default())]
    RateLimited { retry_after_s: Option<u64> },
    #[error("no fixture for case {case_id:?} attempt {attempt}")]
    FixtureMissing { case_id: String, attempt: u32 },
    #[error("backend refused the request: {0}")]
    BackendRefused(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
    #[error("response contains no fenced code blocks")]
    NoCodeBlocks,
    #[error("response contains only one script")]
    OnlyOneScript,
    #[error("{which} script does not lex: {reason}")]
    UnlexableScript { which: ScriptKind, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptKind {
    Exploit,
    Test,
}

impl std::fmt::Display for ScriptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScriptKind::Exploit => "exploit",
            ScriptKind::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
    pub attempt_no: u32,
    pub case_id: String,
}

impl Prompt {
    /// Markdown rendering persisted as `prompt.md`.
    pub fn to_markdown(&self) -> String {
        format!(
            "<!-- case {} attempt {} -->\n## system\n\n{}\n\n## user\n\n{}\n",
            self.case_id, self.attempt_no, self.system_text, self.user_text
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptPair {
    pub exploit_source: String,
    pub test_source: String,
}

/// A case after preprocessing: what the prompts and the project see.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedCase {
    pub case_id: String,
    pub vuln_class: VulnClass,
    pub source: String,
    pub solc_version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Scripted,
    Null,
}

/// A text-generation service. Implementations must tolerate concurrent calls.
pub trait GenBackend: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> BackendKind;
    fn generate(&self, prompt: &Prompt) -> Result<String, GenError>;
}

/// Replays `<dir>/<case_id>/attempt<k>.md`.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    dir: PathBuf,
}

impl ScriptedBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn fixture_path(&self, case_id: &str, attempt: u32) -> PathBuf {
        self.dir.join(case_id).join(format!("attempt{attempt}.md"))
    }
}

impl GenBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn generate(&self, prompt: &Prompt) -> Result<String, GenError> {
        let path = self.fixture_path(&prompt.case_id, prompt.attempt_no);
        std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => GenError::FixtureMissing {
                case_id: prompt.case_id.clone(),
                attempt: prompt.attempt_no,
            },
            _ => GenError::TransportError(format!("{}: {e}", path.display())),
        })
    }
}

/// Refuses every request.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullBackend;

impl GenBackend for NullBackend {
    fn id(&self) -> &str {
        "null"
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Null
    }

    fn generate(&self, _prompt: &Prompt) -> Result<String, GenError> {
        Err(GenError::BackendRefused("null backend".into()))
    }
}
