use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::Utc;
use log::{error, info};
use serde::{Deserialize, Serialize};

use super::{run_case, write_atomic, CaseContext};
use crate::analytics::{aggregate_success, SuccessTable};
use crate::corpus::{
    load_manifest, CampaignConfig, CaseResult, CaseStatus, CorpusError, ResultStore, VulnClass,
};
use crate::genbackend::{GenBackend, PromptTemplates};
use crate::harness::{RevertHeuristics, Toolchain};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const CAMPAIGN_FILE: &str = "campaign.json";
pub const SUMMARY_FILE: &str = "campaign.summary.json";

/// Command-line adjustments layered over the manifest's config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignOverrides {
    pub max_retries: Option<u32>,
    pub parallelism: Option<usize>,
    pub workdir_root: Option<PathBuf>,
    pub apply_optimizations: Option<bool>,
    pub build_timeout_s: Option<f64>,
    pub test_timeout_s: Option<f64>,
}

impl CampaignOverrides {
    fn apply(&self, c: &mut CampaignConfig) {
        if let Some(v) = self.max_retries {
            c.max_retries = v;
        }
        if let Some(v) = self.parallelism {
            c.parallelism = v;
        }
        if let Some(v) = &self.workdir_root {
            c.workdir_root = v.clone();
        }
        if let Some(v) = self.apply_optimizations {
            c.apply_optimizations = v;
        }
        if let Some(v) = self.build_timeout_s {
            c.build_timeout_s = v;
        }
        if let Some(v) = self.test_timeout_s {
            c.test_timeout_s = v;
        }
    }
}

/// The shared services a campaign runs against.
pub struct Engine<'a> {
    pub backend: &'a dyn GenBackend,
    pub toolchain: &'a dyn Toolchain,
    pub templates: PromptTemplates,
    pub heuristics: RevertHeuristics,
    pub forge_std: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub total: usize,
    pub success: usize,
    pub success_by_revert_heuristic: usize,
    pub failed_compile: usize,
    pub failed_test: usize,
    pub retry_exhausted: usize,
    pub backend_error: usize,
    pub harness_error: usize,
}

impl ClassCounts {
    fn add(&mut self, status: CaseStatus) {
        self.total += 1;
        let slot = match status {
            CaseStatus::Success => &mut self.success,
            CaseStatus::SuccessByRevertHeuristic => &mut self.success_by_revert_heuristic,
            CaseStatus::FailedCompile => &mut self.failed_compile,
            CaseStatus::FailedTest => &mut self.failed_test,
            CaseStatus::RetryExhausted => &mut self.retry_exhausted,
            CaseStatus::BackendError => &mut self.backend_error,
            CaseStatus::HarnessError => &mut self.harness_error,
        };
        *slot += 1;
    }
}

#[derive(Debug, Clone)]
pub struct CampaignSummary {
    pub workdir_root: PathBuf,
    pub total_cases: usize,
    /// Cases skipped because the log already held their result.
    pub already_done: usize,
    /// Cases executed by this invocation.
    pub ran: usize,
    /// All results for manifest cases, in manifest order.
    pub results: Vec<CaseResult>,
    pub per_class: BTreeMap<VulnClass, ClassCounts>,
    pub max_in_flight: usize,
}

impl CampaignSummary {
    pub fn error_count(&self) -> usize {
        self.results.iter().filter(|r| r.status.is_error()).count()
    }

    pub fn table(&self) -> SuccessTable {
        aggregate_success(&self.results, &VulnClass::ALL)
    }
}

/// Contents of `campaign.json`: what a later resume needs to start over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub manifest: PathBuf,
    pub overrides: CampaignOverrides,
}

pub fn read_campaign_record(workdir_root: &Path) -> Result<CampaignRecord, CorpusError> {
    let path = workdir_root.join(CAMPAIGN_FILE);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CorpusError::MissingFile(path)),
        Err(e) => return Err(CorpusError::io(&path, e)),
    };
    serde_json::from_slice(&bytes).map_err(|e| CorpusError::SchemaViolation {
        field: CAMPAIGN_FILE.into(),
        reason: e.to_string(),
    })
}

#[derive(Serialize)]
struct SummaryFile {
    total_cases: usize,
    completed: usize,
    errors: usize,
    per_class: BTreeMap<&'static str, ClassCounts>,
    average_success_rate: Option<f64>,
    written_at: chrono::DateTime<Utc>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Runs every case of the manifest that has no recorded result yet.
///
/// A relative `workdir_root` in the manifest is taken relative to the
/// manifest's directory.
pub fn run_campaign(
    manifest_path: &Path,
    overrides: &CampaignOverrides,
    engine: &Engine<'_>,
) -> Result<CampaignSummary, CorpusError> {
    let manifest = load_manifest(manifest_path)?;
    let manifest_dir = manifest.path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut config = manifest.config.clone();
    if let Some(w) = &overrides.workdir_root {
        config.workdir_root = std::path::absolute(w).map_err(|e| CorpusError::io(w, e))?;
    }
    let mut rest = overrides.clone();
    rest.workdir_root = None;
    rest.apply(&mut config);
    config.validate()?;
    config.workdir_root = resolve(&manifest_dir, &config.workdir_root);
    let root = config.workdir_root.clone();
    std::fs::create_dir_all(&root).map_err(|e| CorpusError::io(&root, e))?;

    let record = CampaignRecord {
        manifest: std::path::absolute(&manifest.path).map_err(|e| CorpusError::io(&manifest.path, e))?,
        overrides: CampaignOverrides {
            workdir_root: Some(root.clone()),
            ..overrides.clone()
        },
    };
    let record_path = root.join(CAMPAIGN_FILE);
    write_atomic(&record_path, &serde_json::to_vec_pretty(&record)?)
        .map_err(|e| CorpusError::io(&record_path, e))?;

    let store = ResultStore::open(root.join(RESULTS_FILE))?;
    let prior = store.replay()?;
    if prior.dropped_torn_tail {
        info!("dropped a torn trailing record; that case will run again");
    }
    let done: HashSet<String> = prior.results.iter().map(|r| r.case_id.clone()).collect();
    let pending: Vec<_> = manifest.cases.iter().filter(|c| !done.contains(&c.case_id)).collect();
    info!(
        "{} cases, {} already done, {} pending, parallelism {}",
        manifest.cases.len(),
        manifest.cases.len() - pending.len(),
        pending.len(),
        config.parallelism
    );

    let ctx = CaseContext {
        config: &config,
        backend: engine.backend,
        toolchain: engine.toolchain,
        templates: &engine.templates,
        heuristics: &engine.heuristics,
        forge_std: engine.forge_std.as_deref(),
        workdir: &root,
    };
    let next = AtomicUsize::new(0);
    let in_flight = AtomicUsize::new(0);
    let max_in_flight = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let store_error: Mutex<Option<CorpusError>> = Mutex::new(None);
    let fresh: Mutex<Vec<CaseResult>> = Mutex::new(Vec::new());

    std::thread::scope(|s| {
        for _ in 0..config.parallelism.min(pending.len()) {
            s.spawn(|| {
                while !abort.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(case) = pending.get(i) else { break };
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_in_flight.fetch_max(now, Ordering::SeqCst);
                    let started_at = Utc::now();
                    let result = catch_unwind(AssertUnwindSafe(|| run_case(case, &ctx))).unwrap_or_else(|p| {
                        let msg = p
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into());
                        CaseResult {
                            case_id: case.case_id.clone(),
                            vuln_class: case.vuln_class,
                            status: CaseStatus::HarnessError,
                            attempts: Vec::new(),
                            wall_clock_s: 0.0,
                            started_at,
                            finished_at: Utc::now(),
                            error: Some(format!("internal error: {msg}")),
                        }
                    });
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                    info!("{}: {:?} after {} attempt(s)", result.case_id, result.status, result.attempts.len());
                    if let Err(e) = store.append(&result) {
                        error!("cannot record {}: {e}", result.case_id);
                        abort.store(true, Ordering::SeqCst);
                        store_error.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e);
                        break;
                    }
                    fresh.lock().unwrap_or_else(|p| p.into_inner()).push(result);
                }
            });
        }
    });
    if let Some(e) = store_error.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }

    let fresh = fresh.into_inner().unwrap_or_else(|p| p.into_inner());
    let ran = fresh.len();
    let mut by_id: BTreeMap<String, CaseResult> = prior
        .results
        .into_iter()
        .chain(fresh)
        .map(|r| (r.case_id.clone(), r))
        .collect();
    let results: Vec<CaseResult> = manifest
        .cases
        .iter()
        .filter_map(|c| by_id.remove(&c.case_id))
        .collect();
    let mut per_class: BTreeMap<VulnClass, ClassCounts> = BTreeMap::new();
    for r in &results {
        per_class.entry(r.vuln_class).or_default().add(r.status);
    }
    let summary = CampaignSummary {
        workdir_root: root.clone(),
        total_cases: manifest.cases.len(),
        already_done: manifest.cases.len() - pending.len(),
        ran,
        results,
        per_class,
        max_in_flight: max_in_flight.load(Ordering::SeqCst),
    };
    write_summary(&root, &summary)?;
    Ok(summary)
}

fn write_summary(root: &Path, s: &CampaignSummary) -> Result<(), CorpusError> {
    let file = SummaryFile {
        total_cases: s.total_cases,
        completed: s.results.len(),
        errors: s.error_count(),
        per_class: s.per_class.iter().map(|(c, n)| (c.snake_name(), *n)).collect(),
        average_success_rate: s.table().average,
        written_at: Utc::now(),
    };
    let path = root.join(SUMMARY_FILE);
    write_atomic(&path, &serde_json::to_vec_pretty(&file)?).map_err(|e| CorpusError::io(&path, e))
}

/// Continues the campaign recorded in `workdir_root/campaign.json`.
pub fn resume_campaign(workdir_root: &Path, engine: &Engine<'_>) -> Result<CampaignSummary, CorpusError> {
    let mut record = read_campaign_record(workdir_root)?;
    record.overrides.workdir_root = Some(workdir_root.to_path_buf());
    run_campaign(&record.manifest, &record.overrides, engine)
}
