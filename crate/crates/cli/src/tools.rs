use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use rex_core::analytics::{aggregate_success, association_report, compute_metrics, render_columns, StructuralMetrics};
use rex_core::assets::AssetCatalog;
use rex_core::corpus::{load_manifest, replay, CaseResult, VulnClass};
use rex_core::soltx;

use crate::{AnalyzeArgs, CmdResult, Failure, MetricsArgs, ReportArgs, TransformArgs, TransformOp};

fn read(path: &Path) -> Result<String, Failure> {
    Ok(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    Ok(std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?)
}

fn catalog(assets: &Option<PathBuf>, op: &str) -> Result<AssetCatalog, Failure> {
    let dir = assets
        .as_ref()
        .ok_or_else(|| Failure::usage(format!("--op {op} needs --assets")))?;
    Ok(AssetCatalog::load(dir)?)
}

pub fn transform(a: TransformArgs) -> CmdResult {
    let src = read(&a.input)?;
    let (out, changes) = match a.op {
        TransformOp::StripComments => (soltx::strip_comments(&src)?, None),
        TransformOp::MigratePragma => (soltx::migrate_pragma(&src, &a.solc)?, None),
        TransformOp::WrapUnchecked => {
            if a.functions.is_empty() {
                return Err(Failure::usage("--op wrap-unchecked needs at least one --function"));
            }
            (soltx::wrap_unchecked(&src, &a.functions)?, None)
        }
        TransformOp::Eip55 => {
            let (s, n) = soltx::normalize_addresses(&src)?;
            (s, Some(n))
        }
        TransformOp::Payable => {
            let (s, n) = soltx::insert_payable_casts(&src)?;
            (s, Some(n))
        }
        TransformOp::Decoy => {
            let (Some(template), Some(contract)) = (&a.template, &a.contract) else {
                return Err(Failure::usage("--op decoy needs --template and --contract"));
            };
            let cat = catalog(&a.assets, "decoy")?;
            (soltx::inject_decoy(&src, template, contract, &cat)?, None)
        }
        TransformOp::Rare => {
            let [function] = a.functions.as_slice() else {
                return Err(Failure::usage("--op rare needs exactly one --function"));
            };
            let cat = catalog(&a.assets, "rare")?;
            (soltx::apply_rare_construct(&src, function, &cat)?, None)
        }
        TransformOp::Rename => {
            let mut map = BTreeMap::new();
            for pair in &a.renames {
                let Some((old, new)) = pair.split_once('=') else {
                    return Err(Failure::usage(format!("--map expects old=new, got {pair:?}")));
                };
                map.insert(old.to_string(), new.to_string());
            }
            if map.is_empty() {
                return Err(Failure::usage("--op rename needs at least one --map old=new"));
            }
            (soltx::obfuscate_pattern(&src, &map)?, None)
        }
    };
    if let Some(n) = changes {
        info!("{n} sites rewritten");
    }
    match &a.out {
        Some(p) => write(p, &out)?,
        None => print!("{out}"),
    }
    Ok(0)
}

pub fn metrics(a: MetricsArgs) -> CmdResult {
    let mut all = Vec::new();
    for f in &a.files {
        let m = compute_metrics(&read(f)?).with_context(|| f.display().to_string())?;
        all.push(serde_json::json!({"file": f, "metrics": m}));
    }
    let doc = if all.len() == 1 { all.remove(0)["metrics"].take() } else { serde_json::Value::Array(all) };
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(0)
}

fn load_results(path: &Path) -> Result<Vec<CaseResult>, Failure> {
    if !path.is_file() {
        return Err(anyhow!("results log {} not found", path.display()).into());
    }
    let r = replay(path)?;
    if r.dropped_torn_tail {
        warn!("{}: ignoring a torn final record", path.display());
    }
    Ok(r.results)
}

pub fn analyze(a: AnalyzeArgs) -> CmdResult {
    if a.bins < 2 {
        return Err(Failure::usage("--bins must be at least 2"));
    }
    let results = load_results(&a.results)?;
    let sources: HashMap<String, String> = match (&a.manifest, &a.sources) {
        (Some(m), _) => load_manifest(m)?
            .cases
            .into_iter()
            .map(|c| (c.case_id, c.source_text))
            .collect(),
        (None, Some(dir)) => {
            let mut map = HashMap::new();
            for r in &results {
                let p = dir.join(format!("{}.sol", r.case_id));
                if p.is_file() {
                    map.insert(r.case_id.clone(), read(&p)?);
                }
            }
            map
        }
        (None, None) => return Err(Failure::usage("one of --manifest or --sources is required")),
    };

    let mut cases: Vec<(StructuralMetrics, bool)> = Vec::new();
    for r in &results {
        let Some(src) = sources.get(&r.case_id) else {
            warn!("no source for case {}; skipped", r.case_id);
            continue;
        };
        let m = compute_metrics(src).with_context(|| format!("metrics of case {}", r.case_id))?;
        cases.push((m, r.status.is_success()));
    }
    if cases.len() < 2 {
        return Err(anyhow!("need at least 2 cases with sources, found {}", cases.len()).into());
    }
    let report = association_report(&cases, a.bins);
    let table = aggregate_success(&results, &VulnClass::ALL);

    let out_dir = match &a.out_dir {
        Some(d) => d.clone(),
        None => a.results.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let md = format!(
        "# Campaign analysis\n\n## Success by class\n\n{}\n## Feature association\n\n{}",
        table.to_markdown("Success"),
        report.to_markdown()
    );
    write(&out_dir.join("report.md"), &md)?;
    let csv = report.to_csv();
    write(&out_dir.join("association.csv"), &csv)?;
    print!("{csv}");
    info!("wrote report.md and association.csv to {}", out_dir.display());
    Ok(0)
}

pub fn report(a: ReportArgs) -> CmdResult {
    if !a.label.is_empty() && a.label.len() != a.results.len() {
        return Err(Failure::usage("give one --label per --results, or none"));
    }
    let mut tables = Vec::new();
    for (i, path) in a.results.iter().enumerate() {
        let label = a.label.get(i).cloned().unwrap_or_else(|| {
            path.parent()
                .and_then(Path::file_name)
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "Results".into())
        });
        tables.push((label, aggregate_success(&load_results(path)?, &VulnClass::ALL)));
    }
    let columns: Vec<(&str, _)> = tables.iter().map(|(l, t)| (l.as_str(), t)).collect();
    print!("{}", render_columns(&columns));
    Ok(0)
}
