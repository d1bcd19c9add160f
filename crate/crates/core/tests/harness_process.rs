mod common;

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::forge_fixture;
use rex_core::genbackend::ScriptPair;
use rex_core::harness::{
    parse_build_output, parse_test_output, scaffold_project, ForgeToolchain, HarnessError,
    ProjectLayout, ScaffoldOptions, Severity, TestStatus, Toolchain,
};

/// A stand-in `forge` that replays fixtures. The mode comes from the first
/// line of `mode` in the project directory.
fn fake_forge(dir: &Path) -> PathBuf {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/forge");
    let script = format!(
        r#"#!/bin/sh
F="{fx}"
if [ "$1" = "--version" ]; then echo "forge 0.0.0-fake"; exit 0; fi
mode=$(head -n1 mode 2>/dev/null)
case "$1:$mode" in
  build:bad) cat "$F/build_fail_two_errors.txt"; exit 1 ;;
  build:*) cat "$F/build_ok.txt" ;;
  test:hang) echo "partial output"; sleep 60 & sleep 60; exit 0 ;;
  test:revert) cat "$F/test_fail_revert.txt"; exit 1 ;;
  test:*) cat "$F/test_pass.txt" ;;
esac
"#,
        fx = fixtures.display()
    );
    let path = dir.join("forge");
    std::fs::write(&path, script).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn project(mode: &str) -> (tempfile::TempDir, PathBuf, ForgeToolchain) {
    let dir = tempfile::tempdir().unwrap();
    let forge = ForgeToolchain::new(fake_forge(dir.path()));
    let proj = dir.path().join("project");
    std::fs::create_dir(&proj).unwrap();
    std::fs::write(proj.join("mode"), mode).unwrap();
    (dir, proj, forge)
}

#[test]
fn build_good_and_bad() {
    let (dir, proj, forge) = project("good");
    let log = dir.path().join("build.log");
    let r = forge.build(&proj, &log, Duration::from_secs(10)).unwrap();
    assert!(r.success);
    assert!(r.diagnostics.iter().all(|d| d.severity != Severity::Error));
    assert_eq!(std::fs::read_to_string(&log).unwrap(), forge_fixture("build_ok.txt"));

    let (dir, proj, forge) = project("bad");
    let r = forge.build(&proj, &dir.path().join("build.log"), Duration::from_secs(10)).unwrap();
    assert!(!r.success);
    let located: Vec<_> = r.diagnostics.iter().filter(|d| d.file.is_some() && d.line.is_some()).collect();
    assert!(!located.is_empty());
}

#[test]
fn test_pass_and_revert() {
    let (dir, proj, forge) = project("good");
    let r = forge.test(&proj, &dir.path().join("test.log"), Duration::from_secs(10)).unwrap();
    assert!(r.ran);
    assert_eq!(r.tests.len(), 1);
    assert_eq!(r.tests[0].name, "testExploit");
    assert_eq!(r.tests[0].status, TestStatus::Pass);

    let (dir, proj, forge) = project("revert");
    let r = forge.test(&proj, &dir.path().join("test.log"), Duration::from_secs(10)).unwrap();
    assert_eq!(r.tests[0].status, TestStatus::Fail);
    assert_eq!(r.tests[0].revert_reason.as_deref(), Some("revert: only owner"));
}

#[test]
fn hung_test_is_killed_near_the_deadline() {
    let (dir, proj, forge) = project("hang");
    let started = Instant::now();
    let err = forge.test(&proj, &dir.path().join("test.log"), Duration::from_secs(5)).unwrap_err();
    let elapsed = started.elapsed().as_secs_f64();
    assert!((4.0..=6.0).contains(&elapsed), "took {elapsed}s");
    match err {
        HarnessError::Timeout { after_s, partial_output } => {
            assert!((4.0..=6.0).contains(&after_s));
            assert!(partial_output.contains("partial output"));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn missing_forge() {
    let dir = tempfile::tempdir().unwrap();
    let forge = ForgeToolchain::new(dir.path().join("no-such-forge"));
    assert!(matches!(forge.check_installed(), Err(HarnessError::ForgeNotInstalled(_))));
    let err = forge.build(dir.path(), &dir.path().join("b.log"), Duration::from_secs(1)).unwrap_err();
    assert!(matches!(err, HarnessError::ForgeNotInstalled(_)));
    let ok = ForgeToolchain::new(fake_forge(dir.path()));
    assert_eq!(ok.check_installed().unwrap(), "forge 0.0.0-fake");
}

#[test]
fn scaffold_layout() {
    let dir = tempfile::tempdir().unwrap();
    let std_dir = dir.path().join("forge-std");
    std::fs::create_dir_all(std_dir.join("src")).unwrap();
    std::fs::write(std_dir.join("src/Test.sol"), "contract Test {}\n").unwrap();
    let scripts = ScriptPair {
        exploit_source: "contract Exploit {}\n".into(),
        test_source: "contract ExploitTest {}\n".into(),
    };
    let opts = ScaffoldOptions {
        forge_std: Some(std_dir),
        ..ScaffoldOptions::default()
    };
    let root = dir.path().join("project");
    let layout = scaffold_project(&root, "contract Target {}\n", &scripts, &opts).unwrap();
    assert_eq!(layout, ProjectLayout::new(&root));

    let mut files = Vec::new();
    let mut stack = vec![root.clone()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let e = e.unwrap();
            let rel = e.path().strip_prefix(&root).unwrap().display().to_string();
            if e.file_type().unwrap().is_dir() {
                stack.push(e.path());
            } else if !e.file_type().unwrap().is_symlink() {
                files.push(rel);
            } else {
                files.push(format!("{rel}@"));
            }
        }
    }
    files.sort();
    assert_eq!(
        files,
        ["foundry.toml", "lib/forge-std@", "src/Exploit.sol", "src/Target.sol", "test/Exploit.t.sol"]
    );
    let toml = std::fs::read_to_string(root.join("foundry.toml")).unwrap();
    assert!(toml.contains("solc_version = \"0.8.26\""));
    assert!(matches!(
        scaffold_project(&root, "", &scripts, &opts),
        Err(HarnessError::AlreadyScaffolded(_))
    ));
}

#[test]
fn parser_examples() {
    let empty = parse_build_output("");
    assert!(!empty.success && empty.degraded && empty.diagnostics.is_empty());
    let two = parse_build_output(&forge_fixture("build_fail_two_errors.txt"));
    let codes: Vec<_> = two.diagnostics.iter().filter_map(|d| d.code.as_deref()).collect();
    assert_eq!(codes, ["2314", "9582"]);
    assert!(parse_build_output(&forge_fixture("build_ok.txt")).success);

    let garbage = parse_test_output("segfault\n\u{1b}[31mboom\u{1b}[0m\n");
    assert!(garbage.degraded && garbage.tests.is_empty());
    let overflow = parse_test_output(&forge_fixture("test_panic_overflow.txt"));
    assert_eq!(overflow.tests[0].revert_reason.as_deref(), Some("panic: arithmetic overflow (0x11)"));
    let oog = parse_test_output(&forge_fixture("test_reentrancy_outofgas.txt"));
    assert!(oog.tests[0].reverted_frames.iter().any(|f| f == "EtherBank::withdraw"));
}
