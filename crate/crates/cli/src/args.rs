use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "depscope",
    version,
    about = "Library usage, update and bug-risk analysis for JVM projects"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. Each overrides the config file;
/// the matching `DEPSCOPE_*` variable applies when the flag is absent.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "DEPSCOPE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory [default: ./depscope-out].
    #[arg(long, global = true, env = "DEPSCOPE_OUT")]
    pub out: Option<PathBuf>,
    /// Registry cache directory.
    #[arg(long, global = true, env = "DEPSCOPE_CACHE_ROOT")]
    pub cache_root: Option<PathBuf>,
    /// `network`, `offline` or `fixture:<dir>`.
    #[arg(long, global = true, env = "DEPSCOPE_REGISTRY")]
    pub registry: Option<String>,
    /// Crawl date for outdatedness: unix seconds, `YYYY-MM-DD` or RFC 3339.
    #[arg(long, global = true, env = "DEPSCOPE_CRAWL_DATE")]
    pub crawl_date: Option<String>,
    /// Worker threads.
    #[arg(long, global = true, env = "DEPSCOPE_JOBS")]
    pub jobs: Option<usize>,
    /// Bug database file.
    #[arg(long, global = true, env = "DEPSCOPE_BUGDB")]
    pub bugdb: Option<PathBuf>,
    /// More logging; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Declared dependencies of a project's current build files.
    ExtractDeps(ProjectArgs),
    /// Library version updates over a project's history.
    MineUpdates(HistoryArgs),
    /// Usage, outdatedness, update and delay metrics over a corpus.
    Metrics {
        /// Corpus manifest (TOML).
        manifest: PathBuf,
    },
    /// Maintain the bug database.
    #[command(subcommand)]
    Bugdb(BugdbCommand),
    /// Whether a project reaches buggy library methods (exit 3 if so).
    Risk(ProjectArgs),
    /// Bug-free upgrade candidates and their integration effort.
    Effort {
        #[command(flatten)]
        project: ProjectArgs,
        /// Consider snapshot versions as candidates.
        #[arg(long)]
        include_snapshots: bool,
    },
    /// Whether updates in one commit change any API the project calls.
    UpdateMatters {
        #[command(flatten)]
        history: HistoryArgs,
        /// Commit id (or unique prefix) of the update.
        #[arg(long)]
        commit: String,
        /// Compiled classes at the pre-update commit [default: the project's class directories].
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Alert table over risk and effort results.
    Report {
        /// Directory holding risk.json / effort.json files, searched recursively.
        results: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ProjectArgs {
    /// Project checkout.
    pub project_dir: PathBuf,
    /// Project id [default: directory name].
    #[arg(long)]
    pub project_id: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct HistoryArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    /// Snapshot stream (JSON Lines) [default: <project-dir>/history.jsonl, else git].
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Git revision to walk.
    #[arg(long, default_value = "HEAD")]
    pub rev: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tracker {
    Jira,
}

#[derive(Debug, Subcommand)]
pub enum BugdbCommand {
    /// Add or refresh severe bugs from an issue tracker.
    Ingest {
        #[arg(long, value_enum)]
        tracker: Tracker,
        /// Tracker project key.
        #[arg(long)]
        project: String,
        /// Library the project's bugs belong to (`group:name`).
        #[arg(long)]
        library: String,
        /// Read issues from a saved search response instead of the tracker.
        #[arg(long)]
        issues: Option<PathBuf>,
    },
    /// Check records and resolve buggy methods against artifacts.
    Validate,
}
