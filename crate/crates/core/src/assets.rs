//! Loader for the Solidity asset pack (`catalog.json` plus the files it names).
//!
//! ```text
//! assets/
//!   catalog.json
//!   fixtures/   one vulnerable exemplar per class
//!   decoys/     unexploitable look-alike fragments
//!   templates/  rare-construct snippets (asm_transfer, asm_send)
//!   lib/forge-std/
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::VulnClass;
use crate::soltx::{self, TemplateSource, ASM_SEND_TEMPLATE, ASM_TRANSFER_TEMPLATE};

pub const CATALOG_FILE: &str = "catalog.json";

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("asset `{id}` missing: {path}")]
    MissingAsset { id: String, path: PathBuf },
    #[error("asset `{id}` does not lex: {reason}")]
    UnlexableAsset { id: String, reason: String },
    #[error("no fixture contract for class {0}")]
    MissingClass(VulnClass),
    #[error("invalid catalog {path}: {reason}")]
    InvalidCatalog { path: PathBuf, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    fixtures: BTreeMap<String, RawFixture>,
    #[serde(default)]
    decoys: BTreeMap<String, PathBuf>,
    #[serde(default)]
    templates: BTreeMap<String, PathBuf>,
    #[serde(default)]
    forge_std: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    path: PathBuf,
    vuln_class: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    pub path: PathBuf,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureAsset {
    pub vuln_class: VulnClass,
    pub asset: Asset,
}

/// A validated asset pack.
#[derive(Debug, Clone)]
pub struct AssetCatalog {
    pub root: PathBuf,
    pub fixtures: BTreeMap<String, FixtureAsset>,
    pub decoys: BTreeMap<String, Asset>,
    pub templates: BTreeMap<String, Asset>,
    pub forge_std: Option<PathBuf>,
}

fn load_asset(root: &Path, id: &str, rel: &Path) -> Result<Asset, AssetError> {
    let path = root.join(rel);
    let text = std::fs::read_to_string(&path).map_err(|_| AssetError::MissingAsset {
        id: id.to_string(),
        path: path.clone(),
    })?;
    soltx::lex(&text).map_err(|e| AssetError::UnlexableAsset {
        id: id.to_string(),
        reason: e.to_string(),
    })?;
    Ok(Asset { path, text })
}

impl AssetCatalog {
    /// Reads `root/catalog.json` and checks that every listed file exists
    /// and lexes, every class has a fixture and both transfer templates exist.
    pub fn load(root: &Path) -> Result<Self, AssetError> {
        let catalog_path = root.join(CATALOG_FILE);
        let bytes = std::fs::read(&catalog_path).map_err(|_| AssetError::MissingAsset {
            id: CATALOG_FILE.to_string(),
            path: catalog_path.clone(),
        })?;
        let raw: RawCatalog = serde_json::from_slice(&bytes).map_err(|e| AssetError::InvalidCatalog {
            path: catalog_path.clone(),
            reason: e.to_string(),
        })?;

        let mut fixtures = BTreeMap::new();
        for (id, f) in &raw.fixtures {
            let vuln_class = f.vuln_class.parse().map_err(|_| AssetError::InvalidCatalog {
                path: catalog_path.clone(),
                reason: format!("fixture `{id}`: unknown class {:?}", f.vuln_class),
            })?;
            let asset = load_asset(root, id, &f.path)?;
            fixtures.insert(id.clone(), FixtureAsset { vuln_class, asset });
        }
        if let Some(c) = VulnClass::ALL
            .into_iter()
            .find(|c| !fixtures.values().any(|f| f.vuln_class == *c))
        {
            return Err(AssetError::MissingClass(c));
        }
        let decoys = raw
            .decoys
            .iter()
            .map(|(id, p)| Ok((id.clone(), load_asset(root, id, p)?)))
            .collect::<Result<BTreeMap<_, _>, AssetError>>()?;
        let templates = raw
            .templates
            .iter()
            .map(|(id, p)| Ok((id.clone(), load_asset(root, id, p)?)))
            .collect::<Result<BTreeMap<_, _>, AssetError>>()?;
        for id in [ASM_TRANSFER_TEMPLATE, ASM_SEND_TEMPLATE] {
            if !templates.contains_key(id) {
                return Err(AssetError::MissingAsset {
                    id: id.to_string(),
                    path: root.join("templates"),
                });
            }
        }
        let forge_std = match raw.forge_std {
            Some(rel) => {
                let p = root.join(rel);
                if !p.join("src").join("Test.sol").is_file() {
                    return Err(AssetError::MissingAsset {
                        id: "forge_std".into(),
                        path: p,
                    });
                }
                Some(p)
            }
            None => None,
        };
        Ok(Self {
            root: root.to_path_buf(),
            fixtures,
            decoys,
            templates,
            forge_std,
        })
    }

    pub fn fixtures_of(&self, class: VulnClass) -> impl Iterator<Item = (&String, &FixtureAsset)> {
        self.fixtures.iter().filter(move |(_, f)| f.vuln_class == class)
    }
}

/// Decoys and rare-construct templates share one id space; decoys win.
impl TemplateSource for AssetCatalog {
    fn template(&self, id: &str) -> Option<String> {
        self.decoys
            .get(id)
            .or_else(|| self.templates.get(id))
            .map(|a| a.text.clone())
    }
}
