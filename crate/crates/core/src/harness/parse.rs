//! Parsers for `forge build` and `forge test -vvvv` output.
//!
//! Both are total: unknown text yields an empty result with `degraded` set.

use std::sync::LazyLock;

use regex::Regex;

use super::{Diagnostic, Severity, TestRecord, TestStatus};

static ANSI: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\x1b\[[0-9;?]*[A-Za-z]").unwrap());
// `Error (2314): Expected ';' but got '}'`
static DIAG_PAREN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(Error|Warning|Info|Note)\s*\((\d+)\)\s*:\s*(.*?)\s*$").unwrap()
});
// `error[2314]: ParserError: Expected ';' but got '}'`
static DIAG_BRACKET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(error|warning|info|note)\[(\d+)\]\s*:\s*(.*?)\s*$").unwrap()
});
// `ParserError: Expected ';' but got '}'` (solc without error code)
static DIAG_BARE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*([A-Z][A-Za-z]*Error|Warning)\s*:\s*(.*?)\s*$").unwrap());
// ` --> src/Exploit.sol:12:5:`
static LOCATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*-->\s*(.+?):(\d+):(\d+):?\s*$").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedBuild {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
    /// No recognizable marker or diagnostic was found.
    pub degraded: bool,
}

fn severity(word: &str) -> Severity {
    match word.to_ascii_lowercase().as_str() {
        "warning" => Severity::Warning,
        "info" | "note" => Severity::Info,
        _ => Severity::Error,
    }
}

pub fn parse_build_output(raw: &str) -> ParsedBuild {
    let text = ANSI.replace_all(raw, "");
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    let mut saw_success = false;
    let mut saw_failure = false;
    // Index of the diagnostic still waiting for its `-->` location.
    let mut pending: Option<usize> = None;

    for line in text.lines() {
        if line.contains("Compiler run successful")
            || line.contains("No files changed, compilation skipped")
            || line.contains("Nothing to compile")
        {
            saw_success = true;
            continue;
        }
        if line.contains("Compiler run failed") {
            saw_failure = true;
            continue;
        }
        if let Some(c) = LOCATION.captures(line) {
            if let Some(d) = pending.take().and_then(|i| diagnostics.get_mut(i)) {
                d.file = Some(c[1].to_string());
                d.line = c[2].parse().ok();
                d.column = c[3].parse().ok();
            }
            continue;
        }
        let diag = if let Some(c) = DIAG_PAREN.captures(line).or_else(|| DIAG_BRACKET.captures(line)) {
            Some(Diagnostic {
                severity: severity(&c[1]),
                code: Some(c[2].to_string()),
                message: c[3].to_string(),
                file: None,
                line: None,
                column: None,
            })
        } else {
            DIAG_BARE.captures(line).map(|c| Diagnostic {
                severity: severity(if &c[1] == "Warning" { "warning" } else { "error" }),
                code: None,
                message: format!("{}: {}", &c[1], &c[2]),
                file: None,
                line: None,
                column: None,
            })
        };
        if let Some(d) = diag {
            diagnostics.push(d);
            pending = Some(diagnostics.len() - 1);
        }
    }

    let has_error = diagnostics.iter().any(|d| d.severity == Severity::Error);
    let degraded = !saw_success && !saw_failure && diagnostics.is_empty();
    ParsedBuild {
        success: !degraded && !has_error && !saw_failure,
        diagnostics,
        degraded,
    }
}

static PASS_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\[PASS\]\s+([A-Za-z_$][\w$]*)\s*\(").unwrap());
static FAIL_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\[FAIL(.*)\]\s+([A-Za-z_$][\w$]*)\s*\(").unwrap());
static REVERTED_WITH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)reverted with:?\s*(.+?)\s*$").unwrap());
static TRACE_CALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^([\s│├└─]*)\[\d+\]\s+([A-Za-z_$][\w$]*)::([A-Za-z_$][\w$]*)").unwrap()
});
static TRACE_RETURN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([\s│├└─]*)←\s*(.*)$").unwrap());
static PANIC_CODE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(0x([0-9a-fA-F]{1,2})\)").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTests {
    pub tests: Vec<TestRecord>,
    pub no_tests: bool,
    pub degraded: bool,
}

/// Canonical spelling of a failure reason; panics are normalized by code.
fn normalize_reason(reason: &str) -> String {
    let r = reason.trim();
    let lower = r.to_ascii_lowercase();
    let code = PANIC_CODE
        .captures(r)
        .and_then(|c| u8::from_str_radix(&c[1], 16).ok());
    if (lower.contains("panic") && code == Some(0x11))
        || lower.contains("arithmetic underflow or overflow")
        || lower.contains("arithmetic over/underflow")
    {
        return "panic: arithmetic overflow (0x11)".to_string();
    }
    if lower.contains("panic") && code == Some(0x01) {
        return "panic: assertion failed (0x01)".to_string();
    }
    r.to_string()
}

fn fail_reason(bracket: &str) -> Option<String> {
    let mut r = bracket.trim_start_matches([':', '.']).trim();
    if let Some(rest) = r.strip_prefix("Reason:") {
        r = rest.trim();
    }
    if r.is_empty() {
        None
    } else {
        Some(normalize_reason(r))
    }
}

/// Tracks call frames in a `-vvvv` trace to find the ones that reverted.
#[derive(Default)]
struct TraceWalker {
    // (column of this frame's children, "Contract::function")
    stack: Vec<(usize, String)>,
    reverted: Vec<String>,
}

fn connector_column(prefix: &str) -> usize {
    prefix
        .chars()
        .position(|c| c == '├' || c == '└')
        .unwrap_or_else(|| prefix.chars().count())
}

impl TraceWalker {
    fn line(&mut self, line: &str) {
        if let Some(c) = TRACE_CALL.captures(line) {
            let prefix = &c[1];
            let col = connector_column(prefix);
            let has_connector = prefix.contains('├') || prefix.contains('└');
            let children = if has_connector { col + 4 } else { col + 2 };
            while self.stack.last().is_some_and(|(cc, _)| *cc > col) {
                self.stack.pop();
            }
            self.stack.push((children, format!("{}::{}", &c[2], &c[3])));
        } else if let Some(c) = TRACE_RETURN.captures(line) {
            let col = connector_column(&c[1]);
            while self.stack.last().is_some_and(|(cc, _)| *cc > col) {
                self.stack.pop();
            }
            if self.stack.last().is_some_and(|(cc, _)| *cc == col) {
                let (_, frame) = self.stack.pop().expect("checked non-empty");
                let status = &c[2];
                let reverted = ["[Revert]", "[OutOfGas]", "EvmError", "revert:", "Revert"]
                    .iter()
                    .any(|m| status.contains(m));
                if reverted && !self.reverted.contains(&frame) {
                    self.reverted.push(frame);
                }
            }
        }
    }
}

pub fn parse_test_output(raw: &str) -> ParsedTests {
    let text = ANSI.replace_all(raw, "");
    let mut tests: Vec<TestRecord> = Vec::new();
    let mut no_tests = false;
    let mut recognized = false;
    let mut walker: Option<TraceWalker> = None;
    // Forge repeats failing `[FAIL]` lines in a closing recap.
    let mut in_recap = false;

    let finish = |walker: &mut Option<TraceWalker>, tests: &mut Vec<TestRecord>| {
        if let (Some(w), Some(last)) = (walker.take(), tests.last_mut()) {
            if last.status == TestStatus::Fail {
                last.reverted_frames = w.reverted;
            }
        }
    };

    for line in text.lines() {
        if line.trim_start().starts_with("Failing tests:") {
            finish(&mut walker, &mut tests);
            in_recap = true;
            continue;
        }
        if in_recap && !line.trim_start().starts_with("Ran ") {
            continue;
        }
        in_recap = false;
        if let Some(c) = PASS_LINE.captures(line) {
            finish(&mut walker, &mut tests);
            tests.push(TestRecord {
                name: c[1].to_string(),
                status: TestStatus::Pass,
                revert_reason: None,
                reverted_frames: Vec::new(),
            });
            walker = Some(TraceWalker::default());
            recognized = true;
            continue;
        }
        if let Some(c) = FAIL_LINE.captures(line) {
            finish(&mut walker, &mut tests);
            tests.push(TestRecord {
                name: c[2].to_string(),
                status: TestStatus::Fail,
                revert_reason: fail_reason(&c[1]),
                reverted_frames: Vec::new(),
            });
            walker = Some(TraceWalker::default());
            recognized = true;
            continue;
        }
        if line.contains("No tests found")
            || line.contains("No tests to run")
            || line.contains("No tests match")
        {
            no_tests = true;
            recognized = true;
            continue;
        }
        if line.trim_start().starts_with("Suite result:") || line.trim_start().starts_with("Ran ") {
            finish(&mut walker, &mut tests);
            recognized = true;
            continue;
        }
        if let Some(w) = walker.as_mut() {
            w.line(line);
            if let Some(last) = tests.last_mut() {
                if last.status == TestStatus::Fail && last.revert_reason.is_none() {
                    if let Some(c) = REVERTED_WITH.captures(line) {
                        last.revert_reason = Some(normalize_reason(&c[1]));
                    }
                }
            }
        }
    }
    finish(&mut walker, &mut tests);

    ParsedTests {
        degraded: !recognized,
        tests,
        no_tests,
    }
}
