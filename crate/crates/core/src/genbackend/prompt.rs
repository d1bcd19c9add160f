use std::path::Path;

use super::{PreparedCase, Prompt, ScriptPair};
use crate::template::render;

/// Repair prompts embed at most this many trailing bytes of the failure log.
pub const ERROR_EXCERPT_BYTES: usize = 4000;
/// Stands in for an empty failure log.
pub const TIMEOUT_NOTICE: &str = "no compiler output; process timed out";

/// Plain-text prompt templates with `{{placeholder}}` slots.
///
/// Slots: `source`, `vuln_class`, `solc_version`, and for repairs also
/// `prior_exploit`, `prior_test`, `error_excerpt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub system: String,
    pub exploit: String,
    pub repair: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            system: include_str!("../../templates/system.txt").to_string(),
            exploit: include_str!("../../templates/exploit.txt").to_string(),
            repair: include_str!("../../templates/repair.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Defaults, replaced by `system.txt`, `exploit.txt` or `repair.txt`
    /// where present in `dir`.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        for (name, slot) in [
            ("system.txt", &mut t.system),
            ("exploit.txt", &mut t.exploit),
            ("repair.txt", &mut t.repair),
        ] {
            match std::fs::read_to_string(dir.join(name)) {
                Ok(text) => *slot = text,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(t)
    }
}

fn trim_fence_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

pub fn build_exploit_prompt(case: &PreparedCase, templates: &PromptTemplates) -> Prompt {
    let vars = [
        ("source", trim_fence_newline(&case.source)),
        ("vuln_class", case.vuln_class.label()),
        ("solc_version", case.solc_version.as_str()),
    ];
    Prompt {
        system_text: render(&templates.system, &vars),
        user_text: render(&templates.exploit, &vars),
        attempt_no: 1,
        case_id: case.case_id.clone(),
    }
}

/// The last `max` bytes of `log`, starting on a char boundary.
fn tail(log: &str, max: usize) -> &str {
    if log.len() <= max {
        return log;
    }
    let mut start = log.len() - max;
    while !log.is_char_boundary(start) {
        start += 1;
    }
    &log[start..]
}

pub fn build_repair_prompt(
    case: &PreparedCase,
    prior: &ScriptPair,
    error_log: &str,
    prior_attempt_no: u32,
    templates: &PromptTemplates,
) -> Prompt {
    let excerpt = if error_log.trim().is_empty() {
        TIMEOUT_NOTICE
    } else {
        trim_fence_newline(tail(error_log, ERROR_EXCERPT_BYTES))
    };
    let vars = [
        ("source", trim_fence_newline(&case.source)),
        ("vuln_class", case.vuln_class.label()),
        ("solc_version", case.solc_version.as_str()),
        ("prior_exploit", trim_fence_newline(&prior.exploit_source)),
        ("prior_test", trim_fence_newline(&prior.test_source)),
        ("error_excerpt", excerpt),
    ];
    Prompt {
        system_text: render(&templates.system, &vars),
        user_text: render(&templates.repair, &vars),
        attempt_no: prior_attempt_no + 1,
        case_id: case.case_id.clone(),
    }
}
