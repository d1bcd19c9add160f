use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::corpus::DEFAULT_SOLC_VERSION;
use crate::genbackend::ScriptPair;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaffoldOptions {
    pub solc_version: String,
    /// A vendored forge-std checkout, linked as `lib/forge-std`.
    pub forge_std: Option<PathBuf>,
}

impl Default for ScaffoldOptions {
    fn default() -> Self {
        Self {
            solc_version: DEFAULT_SOLC_VERSION.to_string(),
            forge_std: None,
        }
    }
}

/// Paths of a scaffolded Foundry project.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectLayout {
    pub root: PathBuf,
    pub foundry_toml: PathBuf,
    pub target: PathBuf,
    pub exploit: PathBuf,
    pub test: PathBuf,
    pub lib: PathBuf,
}

impl ProjectLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        let root = root.into();
        Self {
            foundry_toml: root.join("foundry.toml"),
            target: root.join("src").join("Target.sol"),
            exploit: root.join("src").join("Exploit.sol"),
            test: root.join("test").join("Exploit.t.sol"),
            lib: root.join("lib"),
            root,
        }
    }
}

pub fn foundry_toml(solc_version: &str) -> String {
    format!(
        "[profile.default]\n\
         src = \"src\"\n\
         test = \"test\"\n\
         out = \"out\"\n\
         libs = [\"lib\"]\n\
         solc_version = \"{solc_version}\"\n\
         via_ir = false\n\
         offline = true\n\
         remappings = [\"forge-std/=lib/forge-std/src/\"]\n"
    )
}

/// Writes a fresh project into `dir`.
///
/// `dir` may exist but must be empty; project directories are write-once.
pub fn scaffold_project(
    dir: &Path,
    target_source: &str,
    scripts: &ScriptPair,
    opts: &ScaffoldOptions,
) -> Result<ProjectLayout, HarnessError> {
    let layout = ProjectLayout::new(dir);
    match std::fs::read_dir(dir) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(HarnessError::AlreadyScaffolded(dir.to_path_buf()));
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(HarnessError::io(dir, e)),
    }
    let forge_std = match &opts.forge_std {
        Some(p) => {
            let marker = p.join("src").join("Test.sol");
            if !marker.is_file() {
                return Err(HarnessError::TemplateMissing(marker));
            }
            Some(std::path::absolute(p).map_err(|e| HarnessError::io(p, e))?)
        }
        None => None,
    };

    for d in [dir.join("src"), dir.join("test"), layout.lib.clone()] {
        std::fs::create_dir_all(&d).map_err(|e| HarnessError::io(&d, e))?;
    }
    let write = |path: &Path, text: &str| std::fs::write(path, text).map_err(|e| HarnessError::io(path, e));
    write(&layout.foundry_toml, &foundry_toml(&opts.solc_version))?;
    write(&layout.target, target_source)?;
    write(&layout.exploit, &scripts.exploit_source)?;
    write(&layout.test, &scripts.test_source)?;
    if let Some(src) = forge_std {
        let link = layout.lib.join("forge-std");
        std::os::unix::fs::symlink(&src, &link).map_err(|e| HarnessError::io(&link, e))?;
    }
    Ok(layout)
}
