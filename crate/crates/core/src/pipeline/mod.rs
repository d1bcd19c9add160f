//! Per-case generate/fix/build/test loop and campaign scheduling.

mod campaign;
mod case;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::genbackend::ScriptPair;
use crate::harness::{BuildSummary, OutcomeClass, TestSummary};

pub use campaign::{
    read_campaign_record, resume_campaign, run_campaign, CampaignOverrides, CampaignRecord, CampaignSummary, ClassCounts, Engine,
    CAMPAIGN_FILE, RESULTS_FILE, SUMMARY_FILE,
};
pub use case::{preprocess, run_case, CaseContext};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Optimizations {
    pub addresses_fixed: usize,
    pub payable_casts: usize,
}

/// One generate, fix, build, test cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub attempt_no: u32,
    /// Scripts as compiled, after the optional fix pass.
    pub scripts: ScriptPair,
    pub optimizations_applied: Optimizations,
    pub build: BuildSummary,
    pub test: Option<TestSummary>,
    pub outcome: OutcomeClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Init,
    Preprocessed,
    Generated,
    Optimized,
    Built,
    Tested,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal phase transition {from:?} -> {to:?}")]
pub struct IllegalTransition {
    pub from: Phase,
    pub to: Phase,
}

/// Where a case is in its loop. Entering `Generated` starts a new attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseState {
    pub phase: Phase,
    pub current_attempt: u32,
}

impl Default for CaseState {
    fn default() -> Self {
        Self::new()
    }
}

impl CaseState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Init,
            current_attempt: 0,
        }
    }

    pub fn can_advance(from: Phase, to: Phase) -> bool {
        use Phase::*;
        matches!(
            (from, to),
            (Init, Preprocessed)
                | (Preprocessed, Generated)
                | (Generated, Optimized)
                | (Optimized, Built)
                | (Built, Tested)
                | (Built, Generated)
                | (Tested, Generated)
        ) || (to == Done && from != Done)
    }

    pub fn advance(&mut self, to: Phase) -> Result<(), IllegalTransition> {
        if !Self::can_advance(self.phase, to) {
            return Err(IllegalTransition { from: self.phase, to });
        }
        if to == Phase::Generated {
            self.current_attempt += 1;
        }
        self.phase = to;
        Ok(())
    }
}

/// Writes via a temporary sibling and rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}
