use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use rex_core::assets::AssetCatalog;
use rex_core::corpus::{load_manifest, CampaignConfig};
use rex_core::genbackend::{GenBackend, HttpChatBackend, HttpChatConfig, NullBackend, PromptTemplates, ScriptedBackend};
use rex_core::harness::{ForgeToolchain, RevertHeuristics};
use rex_core::pipeline::{
    read_campaign_record, resume_campaign, run_campaign, CampaignOverrides, CampaignSummary, Engine,
};

use crate::{BackendArgs, BackendChoice, CmdResult, Failure, ResumeArgs, RunArgs, EXIT_CAMPAIGN_ERRORS};

fn pick_backend(args: &BackendArgs, config: &CampaignConfig, manifest_dir: &Path) -> Result<Box<dyn GenBackend>, Failure> {
    let choice = args.backend.unwrap_or(match config.backend_id.as_str() {
        "scripted" => BackendChoice::Scripted,
        "null" => BackendChoice::Null,
        _ => BackendChoice::Http,
    });
    Ok(match choice {
        BackendChoice::Scripted => {
            let dir = args.fixtures.clone().unwrap_or_else(|| manifest_dir.join("fixtures"));
            if !dir.is_dir() {
                return Err(Failure::usage(format!(
                    "scripted backend needs a response directory; {} does not exist (use --fixtures)",
                    dir.display()
                )));
            }
            Box::new(ScriptedBackend::new(dir))
        }
        BackendChoice::Null => Box::new(NullBackend),
        BackendChoice::Http => {
            let mut cfg = HttpChatConfig::default();
            if !matches!(config.backend_id.as_str(), "scripted" | "null") {
                cfg.id = config.backend_id.clone();
            }
            cfg.model = args.model.clone().unwrap_or_else(|| config.model_name.clone());
            if let Some(url) = &args.base_url {
                cfg.base_url = url.clone();
            }
            if let Some(rpm) = args.requests_per_minute {
                cfg.requests_per_minute = rpm;
            }
            Box::new(HttpChatBackend::from_env(cfg).map_err(Failure::environment)?)
        }
    })
}

fn forge_std(args: &BackendArgs, config: &CampaignConfig, manifest_dir: &Path) -> Result<Option<PathBuf>, Failure> {
    if let Some(p) = &args.forge_std {
        return Ok(Some(p.clone()));
    }
    let assets = args.assets.clone().or_else(|| config.assets_dir.as_ref().map(|a| manifest_dir.join(a)));
    match assets {
        Some(dir) => Ok(AssetCatalog::load(&dir)?.forge_std),
        None => Ok(None),
    }
}

fn execute(
    manifest: &Path,
    args: &BackendArgs,
    go: impl FnOnce(&Engine<'_>) -> Result<CampaignSummary, rex_core::corpus::CorpusError>,
) -> CmdResult {
    let loaded = load_manifest(manifest)?;
    let manifest_dir = loaded.path.parent().map(Path::to_path_buf).unwrap_or_default();

    let toolchain = ForgeToolchain::from_env();
    let version = toolchain.check_installed().map_err(Failure::environment)?;
    info!("using {version}");

    let backend = pick_backend(args, &loaded.config, &manifest_dir)?;
    let templates = match &args.prompts {
        Some(dir) => PromptTemplates::with_overrides(dir).with_context(|| format!("reading prompts from {}", dir.display()))?,
        None => PromptTemplates::default(),
    };
    let forge_std = forge_std(args, &loaded.config, &manifest_dir)?;
    if forge_std.is_none() {
        warn!("no forge-std configured; generated tests importing it will not compile");
    }
    let engine = Engine {
        backend: backend.as_ref(),
        toolchain: &toolchain,
        templates,
        heuristics: RevertHeuristics::default(),
        forge_std,
    };
    let summary = go(&engine)?;
    println!("{}", summary.table().to_markdown(backend.id()));
    let errors = summary.error_count();
    info!(
        "{} cases: {} run now, {} already done, {} errors; results in {}",
        summary.total_cases,
        summary.ran,
        summary.already_done,
        errors,
        summary.workdir_root.display()
    );
    Ok(if errors > 0 { EXIT_CAMPAIGN_ERRORS } else { 0 })
}

pub fn run(a: RunArgs) -> CmdResult {
    let overrides = CampaignOverrides {
        max_retries: a.max_retries,
        parallelism: a.parallelism,
        workdir_root: a.workdir.clone(),
        apply_optimizations: a.no_optimize.then_some(false),
        build_timeout_s: a.build_timeout,
        test_timeout_s: a.test_timeout,
    };
    execute(&a.manifest, &a.backend, |engine| run_campaign(&a.manifest, &overrides, engine))
}

pub fn resume(a: ResumeArgs) -> CmdResult {
    let record = read_campaign_record(&a.workdir)?;
    execute(&record.manifest, &a.backend, |engine| resume_campaign(&a.workdir, engine))
}
