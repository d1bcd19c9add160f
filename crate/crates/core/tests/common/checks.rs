//! Self-contained checks shared by the focused tests and the acceptance run.
//! Each returns a short detail string on success.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use sha3::Digest;

use rex_core::analytics::{chi_squared, cramers_v, ContingencyTable, SuccessTable};
use rex_core::corpus::{CaseStatus, VulnClass};
use rex_core::genbackend::PromptTemplates;
use rex_core::harness::{
    classify_outcome, parse_build_output, parse_test_output, BuildSummary, OutcomeClass,
    RevertHeuristics, TestRecord, TestStatus, TestSummary,
};
use rex_core::pipeline::{resume_campaign, run_campaign, CampaignOverrides, Engine, RESULTS_FILE};
use rex_core::soltx::{
    functions, insert_payable_casts, keccak256, lex, normalize_addresses, strip_comments,
    to_eip55, wrap_unchecked, CallableKind, TokenKind,
};

use super::{forge_fixture, scenario, FakeForge, CORPUS};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn keccak_matches_oracle() -> Check {
    let known = [
        ("", "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"),
        ("abc", "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"),
    ];
    for (input, want) in known {
        let got = keccak256(input.as_bytes()).to_hex();
        ensure!(got == want, "keccak({input:?}) = {got}");
    }
    let mut rng = StdRng::seed_from_u64(0x6b656363);
    for i in 0..100 {
        let len = rng.gen_range(0..=1024);
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let oracle = hex(&sha3::Keccak256::digest(&data));
        let got = keccak256(&data).to_hex();
        ensure!(got == oracle, "random input #{i} (len {len}) differs");
    }
    Ok("2 known vectors, 100 random inputs".into())
}

pub const EIP55_VECTORS: [&str; 4] = [
    "0x5aAeb6053F3E94C9b9A09f33669435E7Ef1BeAed",
    "0xfB6916095ca1df60bB79Ce92cE3Ea74c37c5d359",
    "0xdbF03B407c01E7cD3CBea99509d93f8DDDC8C6FB",
    "0xD1220A0cf47c7B9Be7A2E6BA89F429762e7b9aDb",
];

/// Reference checksum built straight from the definition with the sha3 crate.
fn eip55_oracle(lower_digits: &str) -> String {
    let hash = sha3::Keccak256::digest(lower_digits.as_bytes());
    let mut out = String::from("0x");
    for (i, c) in lower_digits.chars().enumerate() {
        let nibble = if i % 2 == 0 { hash[i / 2] >> 4 } else { hash[i / 2] & 0x0f };
        out.push(if c.is_ascii_alphabetic() && nibble >= 8 { c.to_ascii_uppercase() } else { c });
    }
    out
}

pub fn eip55_vectors_and_properties() -> Check {
    for v in EIP55_VECTORS {
        let lower = v.to_ascii_lowercase();
        let got = to_eip55(&lower).map_err(|e| e.to_string())?;
        ensure!(got == v, "{lower} -> {got}");
    }
    let mut rng = StdRng::seed_from_u64(55);
    for _ in 0..1000 {
        let bytes: [u8; 20] = rng.gen();
        let lower = hex(&bytes);
        let mixed: String = lower
            .chars()
            .map(|c| if rng.gen() { c.to_ascii_uppercase() } else { c })
            .collect();
        let once = to_eip55(&format!("0x{lower}")).map_err(|e| e.to_string())?;
        ensure!(once == eip55_oracle(&lower), "{lower}: oracle mismatch");
        let twice = to_eip55(&once).map_err(|e| e.to_string())?;
        ensure!(twice == once, "{lower}: not idempotent");
        for variant in [lower.clone(), format!("0X{lower}"), mixed.clone(), format!("0x{mixed}")] {
            let got = to_eip55(&variant).map_err(|e| e.to_string())?;
            ensure!(got == once, "{variant}: prefix/case form changes result");
        }
    }
    Ok("4 vectors, 1000 random addresses".into())
}

/// Texts of string literals and comments, in order.
fn protected(source: &str, with_comments: bool) -> Result<Vec<String>, String> {
    let ts = lex(source).map_err(|e| e.to_string())?;
    Ok(ts
        .iter()
        .filter(|t| t.kind == TokenKind::StringLiteral || (with_comments && t.kind.is_comment()))
        .map(|t| t.text.to_string())
        .collect())
}

fn unique_function_names(source: &str) -> Result<Vec<String>, String> {
    let ts = lex(source).map_err(|e| e.to_string())?;
    let sites = functions(&ts);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in sites.iter().filter(|s| s.kind == CallableKind::Function) {
        *counts.entry(s.name.clone()).or_default() += 1;
    }
    Ok(sites
        .iter()
        .filter(|s| s.kind == CallableKind::Function && s.body.is_some() && counts[&s.name] == 1)
        .map(|s| s.name.clone())
        .collect())
}

pub fn lexer_and_transform_properties() -> Check {
    ensure!(CORPUS.len() >= 12, "corpus has only {} sources", CORPUS.len());
    let mut wrapped = 0;
    for (name, src) in CORPUS {
        let err = |e: rex_core::soltx::SolTxError| format!("{name}: {e}");
        let ts = lex(src).map_err(err)?;
        let joined: String = ts.iter().map(|t| t.text).collect();
        ensure!(joined == *src, "{name}: lexing is lossy");

        let stripped = strip_comments(src).map_err(err)?;
        ensure!(strip_comments(&stripped).map_err(err)? == stripped, "{name}: strip_comments not idempotent");
        ensure!(
            protected(&stripped, false)? == protected(src, false)?,
            "{name}: strip_comments touched a string"
        );

        let (fixed, _) = normalize_addresses(src).map_err(err)?;
        let (again, n) = normalize_addresses(&fixed).map_err(err)?;
        ensure!(again == fixed && n == 0, "{name}: normalize_addresses not idempotent");
        ensure!(
            protected(&fixed, true)? == protected(src, true)?,
            "{name}: normalize_addresses touched a string or comment"
        );

        let (cast, _) = insert_payable_casts(src).map_err(err)?;
        let (again, n) = insert_payable_casts(&cast).map_err(err)?;
        ensure!(again == cast && n == 0, "{name}: insert_payable_casts not idempotent");
        ensure!(
            protected(&cast, true)? == protected(src, true)?,
            "{name}: insert_payable_casts touched a string or comment"
        );

        let names = unique_function_names(src)?;
        if !names.is_empty() {
            let once = wrap_unchecked(src, &names).map_err(err)?;
            ensure!(wrap_unchecked(&once, &names).map_err(err)? == once, "{name}: wrap_unchecked not idempotent");
            ensure!(
                protected(&once, true)? == protected(src, true)?,
                "{name}: wrap_unchecked touched a string or comment"
            );
            wrapped += names.len();
        }
    }
    Ok(format!("{} sources, {wrapped} functions wrapped", CORPUS.len()))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn statistics() -> Check {
    for (cells, want) in [
        (vec![vec![5, 5], vec![5, 5]], 0.0),
        (vec![vec![10, 0], vec![0, 10]], 1.0),
        (vec![vec![4, 1], vec![1, 4]], 0.6),
    ] {
        let t = ContingencyTable::from_rows(cells.clone()).map_err(|e| e.to_string())?;
        let v = cramers_v(&t).map_err(|e| e.to_string())?.v;
        ensure!(close(v, want, 1e-9), "V{cells:?} = {v}");
    }
    let mut rng = StdRng::seed_from_u64(2);
    let mut done = 0;
    while done < 50 {
        let [a, b, c, d]: [u64; 4] = [rng.gen_range(0..40), rng.gen_range(0..40), rng.gen_range(0..40), rng.gen_range(0..40)];
        let margins = [a + b, c + d, a + c, b + d];
        if margins.contains(&0) {
            continue;
        }
        let n = (a + b + c + d) as f64;
        let det = a as f64 * d as f64 - b as f64 * c as f64;
        let closed = n * det * det / margins.iter().map(|&m| m as f64).product::<f64>();
        let t = ContingencyTable::from_rows(vec![vec![a, b], vec![c, d]]).map_err(|e| e.to_string())?;
        let chi2 = chi_squared(&t).map_err(|e| e.to_string())?;
        ensure!(close(chi2, closed, 1e-9 * closed.max(1.0)), "chi2 [[{a},{b}],[{c},{d}]] = {chi2}, want {closed}");
        done += 1;
    }
    Ok("3 reference tables, 50 random 2x2 tables".into())
}

/// Per-class (successes, total) for each model column of the results table.
pub const MODEL_COUNTS: [(&str, [(usize, usize); 8]); 5] = [
    ("Gemini", [(18, 30), (10, 18), (13, 14), (5, 7), (3, 4), (4, 6), (3, 5), (17, 30)]),
    ("GPT-4.1", [(18, 30), (9, 18), (12, 14), (4, 7), (1, 4), (4, 6), (4, 5), (12, 30)]),
    ("Claude", [(19, 30), (10, 18), (12, 14), (4, 7), (1, 4), (6, 6), (4, 5), (12, 30)]),
    ("DeepSeek", [(10, 30), (9, 18), (11, 14), (1, 7), (2, 4), (3, 6), (3, 5), (15, 30)]),
    ("Qwen", [(6, 30), (4, 18), (5, 14), (1, 7), (1, 4), (2, 6), (2, 5), (12, 30)]),
];
pub const MODEL_AVERAGES: [f64; 5] = [67.3, 58.1, 63.3, 48.3, 28.8];

pub fn model_tables() -> Vec<(&'static str, SuccessTable)> {
    MODEL_COUNTS
        .iter()
        .map(|(model, counts)| {
            let rows: Vec<_> = VulnClass::ALL.iter().zip(counts).map(|(&c, &(s, t))| (c, s, t)).collect();
            (*model, SuccessTable::from_counts(&rows))
        })
        .collect()
}

pub fn model_averages() -> Check {
    let mut shown = Vec::new();
    for ((model, table), want) in model_tables().iter().zip(MODEL_AVERAGES) {
        let avg = table.average.ok_or_else(|| format!("{model}: no average"))?;
        ensure!(close(avg, want, 0.05), "{model}: {avg:.3} vs {want}");
        ensure!(table.average_cell() == format!("{want:.1}%"), "{model}: cell {}", table.average_cell());
        shown.push(format!("{avg:.1}"));
    }
    Ok(shown.join(" / "))
}

fn engine<'a>(backend: &'a dyn rex_core::genbackend::GenBackend, forge: &'a FakeForge) -> Engine<'a> {
    Engine {
        backend,
        toolchain: forge,
        templates: PromptTemplates::default(),
        heuristics: RevertHeuristics::default(),
        forge_std: None,
    }
}

pub fn pipeline_scenarios() -> Check {
    let s = scenario(
        &[
            ("good", &["pass"]),
            ("repair", &["build-fail", "pass"]),
            ("bad", &["revert", "revert", "revert", "revert"]),
        ],
        json!({"max_retries": 3}),
    );
    let backend = s.backend();
    let forge = FakeForge::default();
    let summary = run_campaign(&s.manifest, &CampaignOverrides::default(), &engine(&backend, &forge))
        .map_err(|e| e.to_string())?;
    let get = |id: &str| summary.results.iter().find(|r| r.case_id == id).ok_or(format!("{id} missing"));

    let good = get("good")?;
    ensure!(good.status == CaseStatus::Success && good.attempts.len() == 1, "good: {:?}", good.status);
    let repair = get("repair")?;
    let outcomes: Vec<_> = repair.attempts.iter().map(|a| a.outcome).collect();
    ensure!(
        repair.status == CaseStatus::Success && outcomes == [OutcomeClass::FailedCompile, OutcomeClass::Success],
        "repair: {:?} {outcomes:?}",
        repair.status
    );
    let prompt = std::fs::read_to_string(s.root().join("repair/attempt-2/prompt.md")).map_err(|e| e.to_string())?;
    ensure!(
        prompt.contains("Error (2314)") && prompt.contains("src/Exploit.sol:18"),
        "repair prompt lacks attempt-1 diagnostics"
    );
    let bad = get("bad")?;
    ensure!(
        bad.status == CaseStatus::RetryExhausted && bad.attempts.len() == 4,
        "bad: {:?} after {}",
        bad.status,
        bad.attempts.len()
    );

    // Crash after case one: torn log tail, case two half done, case three absent.
    let root = s.root();
    let log = root.join(RESULTS_FILE);
    let text = std::fs::read_to_string(&log).map_err(|e| e.to_string())?;
    let first = text.lines().find(|l| l.contains("\"good\"")).ok_or("no good line")?.to_string();
    std::fs::write(&log, format!("{first}\n{{\"case_id\":\"rep")).map_err(|e| e.to_string())?;
    std::fs::remove_file(root.join("repair/attempt-2/attempt.json")).map_err(|e| e.to_string())?;
    std::fs::remove_dir_all(root.join("bad")).map_err(|e| e.to_string())?;
    let backend = s.backend();
    let resumed = resume_campaign(&root, &engine(&backend, &forge)).map_err(|e| e.to_string())?;
    ensure!(resumed.already_done == 1 && resumed.ran == 2, "resume ran {}", resumed.ran);
    ensure!(backend.calls_for("good") == 0, "resume re-ran a finished case");
    ensure!(backend.calls_for("repair") == 0, "resume regenerated a saved response");
    ensure!(backend.calls_for("bad") == 4, "resume skipped pending work");
    ensure!(resumed.results.len() == 3, "{} results after resume", resumed.results.len());
    Ok("good-first, compile-fail-then-good, always-bad, resume".into())
}

fn outcome_name(o: OutcomeClass) -> &'static str {
    match o {
        OutcomeClass::Success => "Success",
        OutcomeClass::SuccessByRevertHeuristic => "SuccessByRevertHeuristic",
        OutcomeClass::FailedCompile => "FailedCompile",
        OutcomeClass::FailedTest => "FailedTest",
    }
}

fn labels() -> Result<Value, String> {
    serde_json::from_str(&forge_fixture("labels.json")).map_err(|e| e.to_string())
}

fn test_summary(name: &str) -> TestSummary {
    let p = parse_test_output(&forge_fixture(name));
    TestSummary {
        ran: true,
        tests: p.tests,
        duration_s: 0.0,
        no_tests: p.no_tests,
        parse_degraded: p.degraded,
    }
}

fn ok_build() -> BuildSummary {
    BuildSummary {
        success: true,
        diagnostics: Vec::new(),
        duration_s: 0.0,
        parse_degraded: false,
        timed_out: false,
    }
}

pub fn parsers_match_labels() -> Check {
    let labels = labels()?;
    let mut count = 0;
    for (file, want) in labels["build"].as_object().ok_or("no build labels")? {
        let got = parse_build_output(&forge_fixture(file));
        ensure!(got.success == want["success"], "{file}: success {}", got.success);
        ensure!(got.degraded == want["degraded"], "{file}: degraded {}", got.degraded);
        let codes: Vec<Value> = got.diagnostics.iter().map(|d| json!(d.code)).collect();
        ensure!(Value::Array(codes.clone()) == want["codes"], "{file}: codes {codes:?}");
        if let Some(locs) = want.get("locations") {
            let got_locs: Vec<Value> = got.diagnostics.iter().map(|d| json!([d.file, d.line])).collect();
            ensure!(Value::Array(got_locs.clone()) == *locs, "{file}: locations {got_locs:?}");
        }
        count += 1;
    }
    let heuristics = RevertHeuristics::default();
    for (file, want) in labels["test"].as_object().ok_or("no test labels")? {
        let summary = test_summary(file);
        ensure!(summary.parse_degraded == want["degraded"], "{file}: degraded");
        ensure!(summary.no_tests == want["no_tests"], "{file}: no_tests {}", summary.no_tests);
        let tests: Vec<Value> = summary
            .tests
            .iter()
            .map(|t| {
                let status = if t.status == TestStatus::Pass { "pass" } else { "fail" };
                json!([t.name, status, t.revert_reason])
            })
            .collect();
        ensure!(Value::Array(tests.clone()) == want["tests"], "{file}: tests {tests:?}");
        for (class, outcome) in want["outcomes"].as_object().ok_or("no outcomes")? {
            let class: VulnClass = class.parse().map_err(|_| format!("bad class {class}"))?;
            let got = classify_outcome(class, &ok_build(), Some(&summary), &heuristics);
            ensure!(outcome == outcome_name(got), "{file} as {class:?}: {}", outcome_name(got));
        }
        count += 1;
    }
    ensure!(count >= 10, "only {count} fixtures");
    Ok(format!("{count} recorded fixtures"))
}

fn synthetic_failures() -> Vec<TestRecord> {
    let fail = |reason: Option<&str>, frames: &[&str]| TestRecord {
        name: "testExploit".into(),
        status: TestStatus::Fail,
        revert_reason: reason.map(String::from),
        reverted_frames: frames.iter().map(|f| f.to_string()).collect(),
    };
    vec![
        fail(Some("panic: arithmetic underflow or overflow (0x11)"), &[]),
        fail(Some("EvmError: OutOfGas"), &[]),
        fail(Some("EvmError: Revert"), &["Bank::withdraw"]),
        fail(Some("revert: only owner"), &[]),
        fail(None, &[]),
        fail(Some("EvmError: Revert"), &["Exploit::withdrawLoot"]),
    ]
}

/// Every class against every recorded and synthetic test outcome, with the
/// build both passing and failing.
pub fn heuristic_scope() -> Check {
    let eligible = [VulnClass::DoS, VulnClass::Reentrancy, VulnClass::Arithmetic];
    let heuristics = RevertHeuristics::default();
    let mut summaries: Vec<TestSummary> = labels()?["test"]
        .as_object()
        .ok_or("no test labels")?
        .keys()
        .map(|f| test_summary(f))
        .collect();
    for record in synthetic_failures() {
        summaries.push(TestSummary {
            ran: true,
            tests: vec![record],
            duration_s: 0.0,
            no_tests: false,
            parse_degraded: false,
        });
    }
    let mut cells = 0;
    let mut hits: BTreeMap<VulnClass, usize> = BTreeMap::new();
    for class in VulnClass::ALL {
        for summary in summaries.iter().map(Some).chain([None]) {
            for build_ok in [true, false] {
                let mut build = ok_build();
                build.success = build_ok;
                let got = classify_outcome(class, &build, summary, &heuristics);
                cells += 1;
                if !build_ok {
                    ensure!(got == OutcomeClass::FailedCompile, "{class:?}: failed build gave {got:?}");
                }
                if got == OutcomeClass::SuccessByRevertHeuristic {
                    ensure!(eligible.contains(&class), "{class:?} got the revert heuristic");
                    *hits.entry(class).or_default() += 1;
                }
            }
        }
    }
    for class in eligible {
        ensure!(hits.get(&class).copied().unwrap_or(0) > 0, "{class:?} never matched");
    }
    Ok(format!("{cells} combinations"))
}

pub type NamedCheck = (&'static str, fn() -> Check);

pub const ALL: [NamedCheck; 8] = [
    ("keccak256 matches reference implementation", keccak_matches_oracle),
    ("EIP-55 vectors, idempotence and prefix normalization", eip55_vectors_and_properties),
    ("lexer and transform properties on corpus", lexer_and_transform_properties),
    ("Cramer's V and chi-squared", statistics),
    ("results-table averages reproduced", model_averages),
    ("pipeline scenarios and resume", pipeline_scenarios),
    ("forge output parsers match hand labels", parsers_match_labels),
    ("revert heuristic limited to DoS, Reentrancy, Arithmetic", heuristic_scope),
];
