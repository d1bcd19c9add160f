use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::Utc;
use log::{debug, info, warn};

use super::{write_atomic, Attempt, CaseState, Optimizations, Phase};
use crate::corpus::{CampaignConfig, CaseResult, CaseStatus, ContractCase, Directive};
use crate::genbackend::{
    build_exploit_prompt, build_repair_prompt, extract_scripts, GenBackend, PreparedCase, Prompt,
    PromptTemplates, ScriptPair,
};
use crate::harness::{
    classify_outcome, scaffold_project, BuildReport, HarnessError, OutcomeClass, RevertHeuristics,
    ScaffoldOptions, TestReport, Toolchain,
};
use crate::soltx::{self, SolTxError};

/// Everything a case run needs besides the case itself.
pub struct CaseContext<'a> {
    pub config: &'a CampaignConfig,
    pub backend: &'a dyn GenBackend,
    pub toolchain: &'a dyn Toolchain,
    pub templates: &'a PromptTemplates,
    pub heuristics: &'a RevertHeuristics,
    pub forge_std: Option<&'a Path>,
    /// Per-case directories are created below this.
    pub workdir: &'a Path,
}

/// Applies the case's directives in manifest order.
pub fn preprocess(case: &ContractCase, solc_version: &str) -> Result<String, SolTxError> {
    let mut src = case.source_text.clone();
    for d in &case.preprocess {
        src = match d {
            Directive::StripComments => soltx::strip_comments(&src)?,
            Directive::MigratePragma => soltx::migrate_pragma(&src, solc_version)?,
            Directive::WrapUnchecked(names) => soltx::wrap_unchecked(&src, names)?,
        };
    }
    Ok(src)
}

enum Abort {
    Backend(String),
    Harness(String),
}

impl From<HarnessError> for Abort {
    fn from(e: HarnessError) -> Self {
        Abort::Harness(e.to_string())
    }
}

fn io_abort(path: &Path, e: std::io::Error) -> Abort {
    Abort::Harness(format!("{}: {e}", path.display()))
}

fn read_lossy(path: &Path) -> String {
    std::fs::read(path)
        .map(|b| String::from_utf8_lossy(&b).into_owned())
        .unwrap_or_default()
}

fn advance(state: &mut CaseState, to: Phase) {
    state
        .advance(to)
        .unwrap_or_else(|e| panic!("case state machine: {e}"));
}

struct Runner<'a, 'c> {
    ctx: &'a CaseContext<'c>,
    prepared: PreparedCase,
    case_dir: PathBuf,
    state: CaseState,
}

impl Runner<'_, '_> {
    fn attempt_dir(&self, n: u32) -> PathBuf {
        self.case_dir.join(format!("attempt-{n}"))
    }

    /// Log text that explains why attempt `a` failed.
    fn feedback(&self, a: &Attempt) -> String {
        let dir = self.attempt_dir(a.attempt_no);
        match a.outcome {
            OutcomeClass::FailedCompile => read_lossy(&dir.join("build.log")),
            _ => read_lossy(&dir.join("test.log")),
        }
    }

    /// A finished attempt left by an interrupted run.
    fn recorded(&mut self, n: u32) -> Option<Attempt> {
        let path = self.attempt_dir(n).join("attempt.json");
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice::<Attempt>(&bytes) {
            Ok(a) if a.attempt_no == n => {
                info!("{}: reusing recorded attempt {n}", self.prepared.case_id);
                advance(&mut self.state, Phase::Generated);
                advance(&mut self.state, Phase::Optimized);
                advance(&mut self.state, Phase::Built);
                if a.test.is_some() {
                    advance(&mut self.state, Phase::Tested);
                }
                Some(a)
            }
            _ => {
                warn!("{}: ignoring unreadable {}", self.prepared.case_id, path.display());
                None
            }
        }
    }

    fn run_attempt(&mut self, prompt: &Prompt) -> Result<Attempt, Abort> {
        let ctx = self.ctx;
        let n = prompt.attempt_no;
        let dir = self.attempt_dir(n);
        std::fs::create_dir_all(&dir).map_err(|e| io_abort(&dir, e))?;
        let prompt_path = dir.join("prompt.md");
        write_atomic(&prompt_path, prompt.to_markdown().as_bytes()).map_err(|e| io_abort(&prompt_path, e))?;

        let response_path = dir.join("response.md");
        let response = match std::fs::read_to_string(&response_path) {
            Ok(saved) => {
                info!("{}: reusing saved response for attempt {n}", prompt.case_id);
                saved
            }
            Err(_) => {
                let text = ctx.backend.generate(prompt).map_err(|e| Abort::Backend(e.to_string()))?;
                write_atomic(&response_path, text.as_bytes()).map_err(|e| io_abort(&response_path, e))?;
                text
            }
        };
        advance(&mut self.state, Phase::Generated);

        let raw = extract_scripts(&response).map_err(|e| Abort::Backend(e.to_string()))?;
        for (name, text) in [("exploit.raw.sol", &raw.exploit_source), ("test.raw.sol", &raw.test_source)] {
            let p = dir.join(name);
            write_atomic(&p, text.as_bytes()).map_err(|e| io_abort(&p, e))?;
        }

        let (scripts, optimizations) = if ctx.config.apply_optimizations {
            optimize(&raw).map_err(|e| Abort::Backend(format!("fix pass: {e}")))?
        } else {
            (raw, Optimizations::default())
        };
        advance(&mut self.state, Phase::Optimized);

        let project = dir.join("project");
        if project.exists() {
            // Left by a run killed mid-build; the attempt never finished.
            std::fs::remove_dir_all(&project).map_err(|e| io_abort(&project, e))?;
        }
        let opts = ScaffoldOptions {
            solc_version: self.prepared.solc_version.clone(),
            forge_std: ctx.forge_std.map(Path::to_path_buf),
        };
        scaffold_project(&project, &self.prepared.source, &scripts, &opts)?;

        let build_timeout = Duration::from_secs_f64(ctx.config.build_timeout_s);
        let build = match ctx.toolchain.build(&project, &dir.join("build.log"), build_timeout) {
            Ok(r) => r,
            Err(HarnessError::Timeout {
                after_s,
                partial_output,
            }) => BuildReport::timed_out(partial_output, after_s),
            Err(e) => return Err(e.into()),
        };
        advance(&mut self.state, Phase::Built);

        let test = if build.success {
            let test_timeout = Duration::from_secs_f64(ctx.config.test_timeout_s);
            let report = match ctx.toolchain.test(&project, &dir.join("test.log"), test_timeout) {
                Ok(r) => r,
                Err(HarnessError::Timeout {
                    after_s,
                    partial_output,
                }) => TestReport::timed_out(partial_output, after_s),
                Err(e) => return Err(e.into()),
            };
            advance(&mut self.state, Phase::Tested);
            Some(report.summary)
        } else {
            None
        };

        let outcome = classify_outcome(self.prepared.vuln_class, &build, test.as_ref(), ctx.heuristics);
        let attempt = Attempt {
            attempt_no: n,
            scripts,
            optimizations_applied: optimizations,
            build: build.summary,
            test,
            outcome,
        };
        let record = dir.join("attempt.json");
        let json = serde_json::to_vec_pretty(&attempt).map_err(|e| Abort::Harness(e.to_string()))?;
        write_atomic(&record, &json).map_err(|e| io_abort(&record, e))?;
        debug!("{}: attempt {n} -> {outcome:?}", prompt.case_id);
        Ok(attempt)
    }
}

fn optimize(raw: &ScriptPair) -> Result<(ScriptPair, Optimizations), SolTxError> {
    let mut counts = Optimizations::default();
    let mut fix = |src: &str| -> Result<String, SolTxError> {
        let (s, a) = soltx::normalize_addresses(src)?;
        let (s, p) = soltx::insert_payable_casts(&s)?;
        counts.addresses_fixed += a;
        counts.payable_casts += p;
        Ok(s)
    };
    let pair = ScriptPair {
        exploit_source: fix(&raw.exploit_source)?,
        test_source: fix(&raw.test_source)?,
    };
    Ok((pair, counts))
}

/// Runs one case to a final status. Errors become statuses, never panics.
pub fn run_case(case: &ContractCase, ctx: &CaseContext<'_>) -> CaseResult {
    let started_at = Utc::now();
    let clock = Instant::now();
    let mut attempts = Vec::new();
    let finish = |status: CaseStatus, attempts: Vec<Attempt>, error: Option<String>| CaseResult {
        case_id: case.case_id.clone(),
        vuln_class: case.vuln_class,
        status,
        attempts,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        started_at,
        finished_at: Utc::now(),
        error,
    };

    let mut state = CaseState::new();
    let source = match preprocess(case, &ctx.config.solc_version) {
        Ok(s) => s,
        Err(e) => return finish(CaseStatus::HarnessError, attempts, Some(format!("preprocess: {e}"))),
    };
    advance(&mut state, Phase::Preprocessed);
    let case_dir = ctx.workdir.join(&case.case_id);
    if let Err(e) = std::fs::create_dir_all(&case_dir)
        .and_then(|()| write_atomic(&case_dir.join("Target.sol"), source.as_bytes()))
    {
        return finish(CaseStatus::HarnessError, attempts, Some(format!("{}: {e}", case_dir.display())));
    }

    let mut runner = Runner {
        ctx,
        prepared: PreparedCase {
            case_id: case.case_id.clone(),
            vuln_class: case.vuln_class,
            source,
            solc_version: ctx.config.solc_version.clone(),
        },
        case_dir,
        state,
    };
    let mut prompt = build_exploit_prompt(&runner.prepared, ctx.templates);
    loop {
        let n = prompt.attempt_no;
        let attempt = match runner.recorded(n) {
            Some(a) => a,
            None => match runner.run_attempt(&prompt) {
                Ok(a) => a,
                Err(Abort::Backend(msg)) => return finish(CaseStatus::BackendError, attempts, Some(msg)),
                Err(Abort::Harness(msg)) => return finish(CaseStatus::HarnessError, attempts, Some(msg)),
            },
        };
        let outcome = attempt.outcome;
        let feedback = (!outcome.is_success()).then(|| runner.feedback(&attempt));
        let prior = attempt.scripts.clone();
        attempts.push(attempt);
        info!("{}: attempt {n} {outcome:?}", case.case_id);

        let status = match outcome {
            OutcomeClass::Success => Some(CaseStatus::Success),
            OutcomeClass::SuccessByRevertHeuristic => Some(CaseStatus::SuccessByRevertHeuristic),
            _ if n <= ctx.config.max_retries => None,
            // With no repair budget the single attempt's failure is the result.
            OutcomeClass::FailedCompile if ctx.config.max_retries == 0 => Some(CaseStatus::FailedCompile),
            OutcomeClass::FailedTest if ctx.config.max_retries == 0 => Some(CaseStatus::FailedTest),
            _ => Some(CaseStatus::RetryExhausted),
        };
        if let Some(status) = status {
            advance(&mut runner.state, Phase::Done);
            return finish(status, attempts, None);
        }
        prompt = build_repair_prompt(
            &runner.prepared,
            &prior,
            feedback.as_deref().unwrap_or_default(),
            n,
            ctx.templates,
        );
    }
}
