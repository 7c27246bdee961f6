//! Workspace configuration: TOML file, then `DEPSCOPE_*` variables, then flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context as _, Result};
use chrono::{DateTime, NaiveDate};
use serde::Deserialize;

use depscope_core::bugdb::JiraConfig;
use depscope_core::metrics::BinConfig;
use depscope_core::registry::UpstreamConfig;

use crate::args::GlobalArgs;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryMode {
    Network,
    Offline,
    Fixture(PathBuf),
}

impl RegistryMode {
    pub fn parse(s: &str) -> Result<RegistryMode> {
        match s {
            "network" => Ok(RegistryMode::Network),
            "offline" => Ok(RegistryMode::Offline),
            _ => match s.strip_prefix("fixture:") {
                Some(p) if !p.is_empty() => Ok(RegistryMode::Fixture(PathBuf::from(p))),
                _ => bail!("registry must be `network`, `offline` or `fixture:<dir>`, not {s:?}"),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub(crate) enum DateValue {
    Seconds(i64),
    Text(String),
    Toml(toml::value::Datetime),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpstreamSection {
    search_url: Option<String>,
    repository_url: Option<String>,
    max_in_flight: Option<usize>,
    max_retries: Option<u32>,
    timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct JiraSection {
    base_url: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    out: Option<PathBuf>,
    cache_root: Option<PathBuf>,
    registry: Option<String>,
    crawl_date: Option<DateValue>,
    jobs: Option<usize>,
    bugdb: Option<PathBuf>,
    #[serde(default)]
    bins: BinConfig,
    #[serde(default)]
    upstream: UpstreamSection,
    #[serde(default)]
    jira: JiraSection,
}

#[derive(Debug, Clone)]
pub struct WorkspaceConfig {
    pub out: PathBuf,
    pub cache_root: PathBuf,
    pub registry: RegistryMode,
    /// Explicit crawl date; the run's start time otherwise.
    pub crawl_date: Option<i64>,
    pub jobs: usize,
    pub bugdb: Option<PathBuf>,
    pub bins: BinConfig,
    pub upstream: UpstreamConfig,
    pub timeout: Duration,
    pub jira: JiraConfig,
}

/// Parses unix seconds, `YYYY-MM-DD` (midnight UTC) or an RFC 3339 timestamp.
pub fn parse_date(s: &str) -> Result<i64> {
    let s = s.trim();
    if let Ok(n) = s.parse::<i64>() {
        return Ok(n);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.timestamp())
        .with_context(|| format!("unrecognised date {s:?}"))
}

pub(crate) fn date_value(v: &DateValue) -> Result<i64> {
    match v {
        DateValue::Seconds(n) => Ok(*n),
        DateValue::Text(s) => parse_date(s),
        DateValue::Toml(d) => parse_date(&d.to_string()),
    }
}

fn relative_to(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn default_cache_root() -> PathBuf {
    std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .map(|d| d.join("depscope"))
        .unwrap_or_else(|| PathBuf::from(".depscope-cache"))
}

impl WorkspaceConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<WorkspaceConfig> {
        let (file, base) = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let file: FileConfig =
                    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                (file, path.parent().map(Path::to_path_buf))
            }
            None => (FileConfig::default(), None),
        };
        let base = base.as_deref();

        let registry = match (&args.registry, &file.registry) {
            (Some(flag), _) => RegistryMode::parse(flag)?,
            (None, Some(f)) => match RegistryMode::parse(f)? {
                RegistryMode::Fixture(p) => RegistryMode::Fixture(relative_to(base, p)),
                m => m,
            },
            (None, None) => RegistryMode::Network,
        };
        if let RegistryMode::Fixture(dir) = &registry {
            if !dir.is_dir() {
                bail!("fixture registry {} does not exist", dir.display());
            }
        }
        let crawl_date = match (&args.crawl_date, &file.crawl_date) {
            (Some(s), _) => Some(parse_date(s)?),
            (None, Some(v)) => Some(date_value(v)?),
            (None, None) => None,
        };
        let jobs = args
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            bail!("jobs must be at least 1");
        }
        for (name, edges) in [
            ("upd", &file.bins.upd),
            ("uso", &file.bins.uso),
            ("usi2", &file.bins.usi2),
        ] {
            if edges.iter().any(|e| !e.is_finite()) {
                bail!("bin edges for {name} must be finite");
            }
        }

        let mut upstream = UpstreamConfig::default();
        if let Some(u) = file.upstream.search_url {
            upstream.search_url = u;
        }
        if let Some(u) = file.upstream.repository_url {
            upstream.repository_url = u;
        }
        if let Some(n) = file.upstream.max_in_flight {
            upstream.max_in_flight = n.max(1);
        }
        if let Some(n) = file.upstream.max_retries {
            upstream.max_retries = n;
        }
        let mut jira = JiraConfig::default();
        if let Some(u) = file.jira.base_url {
            jira.base_url = u;
        }

        Ok(WorkspaceConfig {
            out: args
                .out
                .clone()
                .or_else(|| file.out.map(|p| relative_to(base, p)))
                .unwrap_or_else(|| PathBuf::from("depscope-out")),
            cache_root: args
                .cache_root
                .clone()
                .or_else(|| file.cache_root.map(|p| relative_to(base, p)))
                .unwrap_or_else(default_cache_root),
            registry,
            crawl_date,
            jobs,
            bugdb: args.bugdb.clone().or_else(|| file.bugdb.map(|p| relative_to(base, p))),
            bins: file.bins,
            upstream,
            timeout: Duration::from_secs(file.upstream.timeout_secs.unwrap_or(60)),
            jira,
        })
    }
}
