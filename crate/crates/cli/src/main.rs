mod campaign;
mod selftest;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exploit-generation campaigns against vulnerable Solidity contracts.
#[derive(Parser)]
#[command(name = "rex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every pending case of a manifest.
    Run(RunArgs),
    /// Continue an interrupted campaign from its work directory.
    Resume(ResumeArgs),
    /// Apply one source transform to a Solidity file.
    Transform(TransformArgs),
    /// Print structural metrics of Solidity files as JSON.
    Metrics(MetricsArgs),
    /// Cramér's V between contract features and exploit success.
    Analyze(AnalyzeArgs),
    /// Per-class success table as markdown.
    Report(ReportArgs),
    /// Check hashing, checksum and statistics kernels against known values.
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendChoice {
    /// Recorded responses from `--fixtures`.
    Scripted,
    /// OpenAI-style chat-completion endpoint.
    Http,
    /// Refuses every request.
    Null,
}

#[derive(Args)]
pub struct BackendArgs {
    /// Defaults to the manifest's `backend_id` (`scripted`, `null`, anything else is http).
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Response directory for the scripted backend: `<dir>/<case_id>/attempt<k>.md`.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Base URL of the chat-completion API.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Model name; defaults to the manifest's `model_name`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    /// Directory with replacement `system.txt`, `exploit.txt` or `repair.txt`.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// forge-std checkout linked into each project as `lib/forge-std`.
    #[arg(long)]
    pub forge_std: Option<PathBuf>,
    /// Asset pack; its `forge_std` is used when `--forge-std` is absent.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub build_timeout: Option<f64>,
    #[arg(long)]
    pub test_timeout: Option<f64>,
    /// Skip the address and payable-cast fixes on generated scripts.
    #[arg(long)]
    pub no_optimize: bool,
}

#[derive(Args)]
pub struct ResumeArgs {
    /// Work directory holding `campaign.json` and `results.jsonl`.
    #[arg(long)]
    pub workdir: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TransformOp {
    StripComments,
    MigratePragma,
    WrapUnchecked,
    /// Checksum every address literal.
    Eip55,
    /// Add `payable(...)` around value-transfer receivers.
    Payable,
    /// Insert a decoy template into a contract.
    Decoy,
    /// Replace transfer/send in a function with inline assembly.
    Rare,
    /// Rename identifiers.
    Rename,
}

#[derive(Args)]
pub struct TransformArgs {
    #[arg(long, value_enum)]
    pub op: TransformOp,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Written to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Target compiler version for migrate-pragma.
    #[arg(long, default_value = rex_core::corpus::DEFAULT_SOLC_VERSION)]
    pub solc: String,
    /// Function for wrap-unchecked (repeatable) and rare.
    #[arg(long = "function")]
    pub functions: Vec<String>,
    /// Decoy template id.
    #[arg(long)]
    pub template: Option<String>,
    /// Contract receiving the decoy.
    #[arg(long)]
    pub contract: Option<String>,
    /// Asset pack for decoy and rare.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// `old=new` pair for rename (repeatable).
    #[arg(long = "map")]
    pub renames: Vec<String>,
}

#[derive(Args)]
pub struct MetricsArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Manifest naming each case's source.
    #[arg(long, conflicts_with = "sources", required_unless_present = "sources")]
    pub manifest: Option<PathBuf>,
    /// Directory of `<case_id>.sol` files.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub bins: usize,
    /// Where report.md and association.csv go; defaults to the results directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// A results log; repeat for side-by-side columns.
    #[arg(long, required = true)]
    pub results: Vec<PathBuf>,
    /// Column heading per results log; defaults to its directory name.
    #[arg(long)]
    pub label: Vec<String>,
}

/// Failure with its process exit code.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_CAMPAIGN_ERRORS: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_ENVIRONMENT: u8 = 3;
pub const EXIT_DATA: u8 = 4;

impl Failure {
    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Self { code: EXIT_USAGE, error: anyhow::anyhow!("{msg}") }
    }

    pub fn environment(e: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_ENVIRONMENT, error: e.into() }
    }
}

/// Anything else that goes wrong is bad input data.
impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self { code: EXIT_DATA, error: e.into() }
    }
}

pub type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_secs()
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => campaign::run(a),
        Command::Resume(a) => campaign::resume(a),
        Command::Transform(a) => tools::transform(a),
        Command::Metrics(a) => tools::metrics(a),
        Command::Analyze(a) => tools::analyze(a),
        Command::Report(a) => tools::report(a),
        Command::Selftest => selftest::run(),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            log::error!("{:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
