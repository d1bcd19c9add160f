use serde::{Deserialize, Serialize};

use super::{BuildSummary, TestStatus, TestSummary};
use crate::corpus::VulnClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    Success,
    SuccessByRevertHeuristic,
    FailedCompile,
    FailedTest,
}

impl OutcomeClass {
    pub fn is_success(self) -> bool {
        matches!(self, OutcomeClass::Success | OutcomeClass::SuccessByRevertHeuristic)
    }
}

/// Failure signatures that still count as a working exploit.
///
/// Only DoS, Reentrancy and Arithmetic cases are eligible. Matching is a
/// case-insensitive substring test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevertHeuristics {
    /// Revert reasons that show an arithmetic overflow was triggered.
    pub arithmetic_reasons: Vec<String>,
    /// Revert reasons that show a DoS/reentrancy exploit exhausted gas.
    pub dos_reentrancy_reasons: Vec<String>,
    /// Functions whose reverting frame marks a disrupted victim.
    pub victim_functions: Vec<String>,
    /// Contracts containing these words are attacker-side, never victims.
    pub attacker_contracts: Vec<String>,
}

impl Default for RevertHeuristics {
    fn default() -> Self {
        Self {
            arithmetic_reasons: vec![
                "(0x11)".into(),
                "arithmetic underflow or overflow".into(),
                "arithmetic over/underflow".into(),
            ],
            dos_reentrancy_reasons: vec!["outofgas".into(), "out of gas".into()],
            victim_functions: vec!["withdraw".into()],
            attacker_contracts: vec!["exploit".into(), "attack".into(), "test".into()],
        }
    }
}

fn contains_any(haystack: &str, needles: &[String]) -> bool {
    let h = haystack.to_ascii_lowercase();
    needles.iter().any(|n| h.contains(&n.to_ascii_lowercase()))
}

impl RevertHeuristics {
    fn matches(&self, class: VulnClass, reason: Option<&str>, frames: &[String]) -> bool {
        match class {
            VulnClass::Arithmetic => reason.is_some_and(|r| contains_any(r, &self.arithmetic_reasons)),
            VulnClass::DoS | VulnClass::Reentrancy => {
                reason.is_some_and(|r| contains_any(r, &self.dos_reentrancy_reasons))
                    || frames.iter().any(|f| {
                        let (contract, func) = f.split_once("::").unwrap_or(("", f));
                        contains_any(func, &self.victim_functions)
                            && !contains_any(contract, &self.attacker_contracts)
                    })
            }
            _ => false,
        }
    }
}

/// Precedence: FailedCompile > Success > SuccessByRevertHeuristic > FailedTest.
pub fn classify_outcome(
    vuln_class: VulnClass,
    build: &BuildSummary,
    test: Option<&TestSummary>,
    heuristics: &RevertHeuristics,
) -> OutcomeClass {
    if !build.success {
        return OutcomeClass::FailedCompile;
    }
    let Some(test) = test.filter(|t| t.ran) else {
        return OutcomeClass::FailedTest;
    };
    if !test.tests.is_empty() && test.tests.iter().all(|t| t.status == TestStatus::Pass) {
        return OutcomeClass::Success;
    }
    let heuristic_hit = test.tests.iter().any(|t| {
        t.status == TestStatus::Fail
            && heuristics.matches(vuln_class, t.revert_reason.as_deref(), &t.reverted_frames)
    });
    if heuristic_hit {
        OutcomeClass::SuccessByRevertHeuristic
    } else {
        OutcomeClass::FailedTest
    }
}
