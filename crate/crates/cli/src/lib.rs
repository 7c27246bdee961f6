//! The `depscope` command line: argument handling, workspace configuration
//! and the glue that runs core analyses over project checkouts.

pub mod args;
mod commands;
pub mod config;
mod output;
pub mod project;
mod store;

use std::ffi::OsString;
use std::sync::Arc;

use clap::Parser;
use serde::Serialize;

use depscope_core::registry::{HttpTransport, Transport};
use depscope_core::Diagnostics;

use args::Cli;
use config::WorkspaceConfig;
use output::Output;

pub use store::Store;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// `risk` found a reachable buggy method.
pub const EXIT_UNSAFE: i32 = 3;

/// What a run may touch beyond the file system.
#[derive(Clone)]
pub struct Context {
    /// HTTP client for registry and tracker calls; `None` builds one from
    /// the configured timeout.
    pub transport: Option<Arc<dyn Transport>>,
    /// Run start, UTC seconds; stamps outputs and is the default crawl date.
    pub now: i64,
}

impl Context {
    pub(crate) fn transport(&self, config: &WorkspaceConfig) -> Arc<dyn Transport> {
        self.transport
            .clone()
            .unwrap_or_else(|| Arc::new(HttpTransport::new(config.timeout)))
    }
}

pub(crate) enum Failure {
    Usage(anyhow::Error),
    Analysis {
        error: anyhow::Error,
        diagnostics: Diagnostics,
    },
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::Analysis {
            error,
            diagnostics: Diagnostics::new(),
        }
    }
}

pub(crate) fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

pub(crate) type Outcome = Result<i32, Failure>;

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: String,
    diagnostics: &'a Diagnostics,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("DEPSCOPE_LOG")
        .try_init();
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, ctx: &Context) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.global.verbose);
    let config = match WorkspaceConfig::resolve(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let out = Output::new(&config.out, ctx.now);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ANALYSIS;
        }
    };
    match pool.install(|| commands::dispatch(cli.command, &config, ctx, &out)) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Analysis { error, diagnostics }) => {
            eprintln!("error: {error:#}");
            let report = ErrorReport {
                error: format!("{error:#}"),
                diagnostics: &diagnostics,
            };
            if let Err(e) = out.json("diagnostics.json", &report) {
                eprintln!("error: {e:#}");
            }
            EXIT_ANALYSIS
        }
    }
}
