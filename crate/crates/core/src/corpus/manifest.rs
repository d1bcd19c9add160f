use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ContractCase, CorpusError, Directive, VulnClass};
use crate::soltx;

pub const DEFAULT_SOLC_VERSION: &str = "0.8.26";
const MANIFEST_VERSION: u32 = 1;

/// Campaign-wide settings from the manifest's `config` object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub backend_id: String,
    pub model_name: String,
    /// Repair iterations after the first attempt.
    pub max_retries: u32,
    pub parallelism: usize,
    pub build_timeout_s: f64,
    pub test_timeout_s: f64,
    pub workdir_root: PathBuf,
    pub apply_optimizations: bool,
    pub solc_version: String,
    /// Asset pack with `lib/forge-std`, decoys and templates.
    pub assets_dir: Option<PathBuf>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            backend_id: "scripted".to_string(),
            model_name: String::new(),
            max_retries: 4,
            parallelism: 1,
            build_timeout_s: 300.0,
            test_timeout_s: 300.0,
            workdir_root: PathBuf::from("runs"),
            apply_optimizations: true,
            solc_version: DEFAULT_SOLC_VERSION.to_string(),
            assets_dir: None,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let violation = |field: &str, reason: &str| {
            Err(CorpusError::SchemaViolation {
                field: format!("config.{field}"),
                reason: reason.to_string(),
            })
        };
        if self.parallelism == 0 {
            return violation("parallelism", "must be at least 1");
        }
        if !(self.build_timeout_s > 0.0 && self.build_timeout_s.is_finite()) {
            return violation("build_timeout_s", "must be a positive number of seconds");
        }
        if !(self.test_timeout_s > 0.0 && self.test_timeout_s.is_finite()) {
            return violation("test_timeout_s", "must be a positive number of seconds");
        }
        if self.backend_id.is_empty() {
            return violation("backend_id", "must not be empty");
        }
        let parts: Vec<_> = self.solc_version.split('.').collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit())) {
            return violation("solc_version", "must be major.minor.patch");
        }
        Ok(())
    }
}

/// A loaded and validated manifest.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    pub config: CampaignConfig,
    pub cases: Vec<ContractCase>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    version: u32,
    #[serde(default)]
    config: CampaignConfig,
    cases: Vec<RawCase>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    case_id: String,
    source: PathBuf,
    vuln_class: String,
    #[serde(default)]
    preprocess: Vec<String>,
    #[serde(default)]
    provenance: String,
}

fn valid_case_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

/// Loads a manifest, resolving paths relative to its directory.
///
/// Case order is the order in the file.
pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CorpusError::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(CorpusError::io(path, e)),
    };
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    let raw: RawManifest = serde_path_to_error::deserialize(de).map_err(|e| {
        CorpusError::SchemaViolation {
            field: e.path().to_string(),
            reason: e.inner().to_string(),
        }
    })?;

    if raw.version != MANIFEST_VERSION {
        return Err(CorpusError::SchemaViolation {
            field: "version".into(),
            reason: format!("unsupported version {}, expected {MANIFEST_VERSION}", raw.version),
        });
    }
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let base = std::path::absolute(base).map_err(|e| CorpusError::io(base, e))?;

    let mut config = raw.config;
    config.validate()?;
    config.workdir_root = base.join(&config.workdir_root);
    config.assets_dir = config.assets_dir.map(|a| base.join(a));

    let mut seen = HashSet::new();
    let mut cases = Vec::with_capacity(raw.cases.len());
    for (i, rc) in raw.cases.into_iter().enumerate() {
        if !valid_case_id(&rc.case_id) {
            return Err(CorpusError::SchemaViolation {
                field: format!("cases[{i}].case_id"),
                reason: "must be non-empty and use only [A-Za-z0-9._-]".into(),
            });
        }
        if !seen.insert(rc.case_id.clone()) {
            return Err(CorpusError::DuplicateCaseId(rc.case_id));
        }
        let vuln_class: VulnClass = rc.vuln_class.parse()?;
        let preprocess = rc
            .preprocess
            .iter()
            .enumerate()
            .map(|(j, d)| {
                d.parse::<Directive>().map_err(|reason| CorpusError::SchemaViolation {
                    field: format!("cases[{i}].preprocess[{j}]"),
                    reason,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let source_path = base.join(&rc.source);
        let source_text = match std::fs::read_to_string(&source_path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CorpusError::MissingFile(source_path))
            }
            Err(e) => return Err(CorpusError::io(source_path, e)),
        };
        if source_text.trim().is_empty() {
            return Err(CorpusError::SchemaViolation {
                field: format!("cases[{i}].source"),
                reason: "source file is empty".into(),
            });
        }
        soltx::lex(&source_text).map_err(|source| CorpusError::UnlexableSource {
            case_id: rc.case_id.clone(),
            source,
        })?;

        cases.push(ContractCase {
            case_id: rc.case_id,
            source: rc.source,
            source_path,
            source_text,
            vuln_class,
            preprocess,
            provenance: rc.provenance,
        });
    }

    Ok(Manifest {
        path: std::path::absolute(path).map_err(|e| CorpusError::io(path, e))?,
        config,
        cases,
    })
}
