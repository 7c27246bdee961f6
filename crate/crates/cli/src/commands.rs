use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use depscope_core::alert::{
    effort_analysis, render_risk, render_table, risk_analysis, table_row, update_matters, AlertError, EffortAnalysis,
    EffortOptions, RiskReport, TableRow,
};
use depscope_core::bugdb::{fetch_jira_issues, ingest_jira, potential_risk, BugDb, JiraIssue};
use depscope_core::bytecode::{extract_calls, ApiCall, CallExtraction, ClassModel};
use depscope_core::history::{mine_updates, CommitSnapshot, UpdateRow, VersionUpdate};
use depscope_core::manifest::DependencyRow;
use depscope_core::metrics::{compute_metrics, Distribution, LibraryRow, MetricsInput, ProjectRow};
use depscope_core::{CommitRef, Diagnostics, Library, LibraryDependency, LibraryVersionRef, SourceSet};

use crate::args::{BugdbCommand, Command, HistoryArgs, ProjectArgs, Tracker};
use crate::config::{date_value, DateValue, WorkspaceConfig};
use crate::output::Output;
use crate::project::{self, HistorySource};
use crate::store::Store;
use crate::{usage, Context, Failure, Outcome, EXIT_OK, EXIT_UNSAFE};

pub(crate) fn dispatch(command: Command, config: &WorkspaceConfig, ctx: &Context, out: &Output) -> Outcome {
    match command {
        Command::ExtractDeps(p) => extract_deps(&p, out),
        Command::MineUpdates(h) => mine(&h, out),
        Command::Metrics { manifest } => metrics(&manifest, config, ctx, out),
        Command::Bugdb(BugdbCommand::Ingest {
            tracker: Tracker::Jira,
            project,
            library,
            issues,
        }) => ingest(&project, &library, issues.as_deref(), config, ctx),
        Command::Bugdb(BugdbCommand::Validate) => validate(config, ctx, out),
        Command::Risk(p) => risk(&p, config, ctx, out),
        Command::Effort {
            project,
            include_snapshots,
        } => effort(&project, EffortOptions { include_snapshots }, config, ctx, out),
        Command::UpdateMatters {
            history,
            commit,
            classes,
        } => matters(&history, &commit, classes.as_deref(), config, ctx, out),
        Command::Report { results } => report(&results, out),
    }
}

fn require_dir(dir: &Path) -> Result<(), Failure> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{} is not a directory", dir.display())))
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

// --- single-project stages ------------------------------------------------------

/// A project checkout with its current dependencies and compiled classes.
struct Loaded {
    id: String,
    commit: CommitRef,
    dependencies: Vec<LibraryDependency>,
    classes: Vec<(ClassModel, SourceSet)>,
    diagnostics: Diagnostics,
}

fn load_project(
    dir: &Path,
    id: &str,
    snapshots: &[CommitSnapshot],
    classes_dir: Option<&Path>,
) -> anyhow::Result<Loaded> {
    let commit = project::current_commit(dir, snapshots);
    let ex = project::extract(dir, &commit, id)?;
    let (classes, class_diags) = project::load_project_classes(dir, classes_dir)?;
    let mut diagnostics = ex.diagnostics;
    diagnostics.extend(class_diags);
    Ok(Loaded {
        id: id.to_string(),
        commit,
        dependencies: ex.dependencies,
        classes,
        diagnostics,
    })
}

/// Snapshots needed only to date the checkout: read when a stream file is
/// present, skipped for git (HEAD is asked directly).
fn dating_snapshots(dir: &Path) -> anyhow::Result<Vec<CommitSnapshot>> {
    match HistorySource::locate(dir, None, "HEAD") {
        s @ HistorySource::Stream(_) => s.snapshots(),
        _ => Ok(Vec::new()),
    }
}

fn calls_into(
    store: &Store,
    id: &str,
    classes: &[(ClassModel, SourceSet)],
    versions: &BTreeSet<LibraryVersionRef>,
) -> CallExtraction {
    let universe = store.universe(versions);
    extract_calls(id, classes, &universe)
}

#[derive(Serialize)]
struct DependenciesOut<'a> {
    project_id: &'a str,
    commit: &'a CommitRef,
    dependencies: Vec<DependencyRow>,
    diagnostics: &'a Diagnostics,
}

fn extract_deps(args: &ProjectArgs, out: &Output) -> Outcome {
    let dir = &args.project_dir;
    require_dir(dir)?;
    let id = project::project_id(dir, args.project_id.as_deref());
    let snapshots = dating_snapshots(dir)?;
    let commit = project::current_commit(dir, &snapshots);
    let ex = project::extract(dir, &commit, &id)?;
    let rows: Vec<DependencyRow> = ex.dependencies.iter().map(LibraryDependency::to_row).collect();
    let written = [
        out.json(
            "dependencies.json",
            &DependenciesOut {
                project_id: &id,
                commit: &commit,
                dependencies: rows.clone(),
                diagnostics: &ex.diagnostics,
            },
        )?,
        out.csv("dependencies.csv", &rows)?,
    ];
    print_written(&written);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct UpdatesOut<'a> {
    project_id: &'a str,
    commits: usize,
    updates: &'a [UpdateRow],
    diagnostics: &'a Diagnostics,
}

fn mine(args: &HistoryArgs, out: &Output) -> Outcome {
    let dir = &args.project.project_dir;
    require_dir(dir)?;
    let id = project::project_id(dir, args.project.project_id.as_deref());
    let source = HistorySource::locate(dir, args.history.as_deref(), &args.rev);
    if matches!(source, HistorySource::None) {
        return Err(usage(format!(
            "{} has neither {} nor a git repository; pass --history",
            dir.display(),
            project::HISTORY_FILE
        )));
    }
    let snapshots = source.snapshots()?;
    let mining = mine_updates(&snapshots, &id);
    let rows: Vec<UpdateRow> = mining.updates.iter().map(VersionUpdate::to_row).collect();
    let written = [
        out.json(
            "updates.json",
            &UpdatesOut {
                project_id: &id,
                commits: snapshots.len(),
                updates: &rows,
                diagnostics: &mining.diagnostics,
            },
        )?,
        out.csv("updates.csv", &rows)?,
    ];
    print_written(&written);
    Ok(EXIT_OK)
}

// --- corpus metrics -------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: Option<String>,
    path: PathBuf,
    crawl_date: Option<DateValue>,
    history: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusManifest {
    default_crawl_date: Option<DateValue>,
    #[serde(default)]
    projects: Vec<ManifestEntry>,
}

struct ProjectInput {
    id: String,
    crawl_date: Option<i64>,
    dependencies: Vec<LibraryDependency>,
    updates: Vec<VersionUpdate>,
    calls: CallExtraction,
    diagnostics: Diagnostics,
}

fn gather(entry: &ManifestEntry, base: &Path, store: &Store) -> anyhow::Result<ProjectInput> {
    let dir = if entry.path.is_relative() {
        base.join(&entry.path)
    } else {
        entry.path.clone()
    };
    if !dir.is_dir() {
        return Err(anyhow!("{} is not a directory", dir.display()));
    }
    let id = project::project_id(&dir, entry.id.as_deref());
    let history = entry
        .history
        .as_ref()
        .map(|h| if h.is_relative() { base.join(h) } else { h.clone() });
    let snapshots = HistorySource::locate(&dir, history.as_deref(), "HEAD").snapshots()?;
    let loaded = load_project(&dir, &id, &snapshots, None)?;
    let mining = mine_updates(&snapshots, &id);
    let mut diagnostics = loaded.diagnostics;
    if snapshots.is_empty() {
        diagnostics.push("no_history", &id, "no commit history; no updates mined");
    }
    diagnostics.extend(mining.diagnostics);
    let calls = calls_into(
        store,
        &id,
        &loaded.classes,
        &project::used_versions(&loaded.dependencies),
    );
    diagnostics.extend(calls.diagnostics.clone());
    Ok(ProjectInput {
        id,
        crawl_date: entry.crawl_date.as_ref().map(date_value).transpose()?,
        dependencies: loaded.dependencies,
        updates: mining.updates,
        calls,
        diagnostics,
    })
}

#[derive(Serialize)]
struct MetricsOut<'a> {
    projects: &'a [ProjectRow],
    libraries: &'a [LibraryRow],
    diagnostics: &'a Diagnostics,
}

#[derive(Serialize)]
struct DistributionsOut<'a> {
    distributions: &'a [Distribution],
}

#[derive(Serialize)]
struct RibRow {
    library: String,
    version: String,
    release_date: i64,
    rib: usize,
}

fn metrics(manifest: &Path, config: &WorkspaceConfig, ctx: &Context, out: &Output) -> Outcome {
    let text = fs::read_to_string(manifest).map_err(|e| usage(format!("reading {}: {e}", manifest.display())))?;
    let corpus: CorpusManifest =
        toml::from_str(&text).map_err(|e| usage(format!("parsing {}: {e}", manifest.display())))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let default_crawl = match (&config.crawl_date, &corpus.default_crawl_date) {
        (Some(d), _) => *d,
        (None, Some(v)) => date_value(v).map_err(Failure::Usage)?,
        (None, None) => ctx.now,
    };
    let bugdb = load_bugdb(config, false)?;
    let store = Store::new(config, ctx.transport(config));

    let gathered: Vec<(usize, anyhow::Result<ProjectInput>)> = corpus
        .projects
        .par_iter()
        .enumerate()
        .map(|(i, e)| (i, gather(e, base, &store)))
        .collect();

    let mut input = MetricsInput {
        default_crawl_date: default_crawl,
        ..Default::default()
    };
    let mut diagnostics = Diagnostics::new();
    let mut seen = BTreeSet::new();
    for (i, result) in gathered {
        let p = match result {
            Ok(p) => p,
            Err(e) => {
                diagnostics.push(
                    "project_unreadable",
                    corpus.projects[i].path.display().to_string(),
                    format!("{e:#}"),
                );
                continue;
            }
        };
        if !seen.insert(p.id.clone()) {
            diagnostics.push("duplicate_project", &p.id, "listed twice; later entry ignored");
            continue;
        }
        if let Some(c) = p.crawl_date {
            input.crawl_dates.insert(p.id.clone(), c);
        }
        input.dependencies.extend(p.dependencies);
        input.updates.extend(p.updates);
        input.methods.extend(p.calls.methods);
        input.calls.extend(p.calls.calls);
        diagnostics.extend(p.diagnostics);
    }

    let used: BTreeSet<LibraryVersionRef> = project::used_versions(&input.dependencies);
    for v in &used {
        if let Ok(a) = store.artifact(v) {
            input.api_counts.insert(v.clone(), a.analysis.apis.len());
        }
    }
    let libraries: BTreeSet<Library> = used
        .iter()
        .map(|v| v.library.clone())
        .chain(input.updates.iter().map(|u| u.library.clone()))
        .collect();
    let fetched: Vec<(Library, Result<_, String>)> =
        libraries.par_iter().map(|l| (l.clone(), store.releases(l))).collect();
    for (lib, r) in fetched {
        if let Ok(r) = r {
            input.releases.insert(lib, r.as_ref().clone());
        }
    }

    let report = compute_metrics(&input, &config.bins);
    diagnostics.extend(report.diagnostics.clone());
    diagnostics.extend(store.take_diagnostics());
    diagnostics.normalize();

    let dep_rows: Vec<DependencyRow> = input.dependencies.iter().map(LibraryDependency::to_row).collect();
    let update_rows: Vec<UpdateRow> = input.updates.iter().map(VersionUpdate::to_row).collect();
    let mut written = vec![
        out.json(
            "metrics.json",
            &MetricsOut {
                projects: &report.projects,
                libraries: &report.libraries,
                diagnostics: &diagnostics,
            },
        )?,
        out.csv("projects.csv", &report.projects)?,
        out.csv("libraries.csv", &report.libraries)?,
        out.json(
            "distributions.json",
            &DistributionsOut {
                distributions: &report.distributions,
            },
        )?,
        out.csv("dependencies.csv", &dep_rows)?,
        out.csv("updates.csv", &update_rows)?,
    ];
    if let Some(db) = bugdb {
        let rows: Vec<RibRow> = input
            .releases
            .values()
            .flatten()
            .map(|r| RibRow {
                library: r.version_ref.library.to_string(),
                version: r.version_ref.version.to_string(),
                release_date: r.release_date,
                rib: potential_risk(r, &db),
            })
            .collect();
        written.push(out.csv("rib.csv", &rows)?);
    }
    print_written(&written);
    Ok(EXIT_OK)
}

// --- bug database ------------------------------------------------------------------

fn bugdb_path(config: &WorkspaceConfig) -> Result<&Path, Failure> {
    config
        .bugdb
        .as_deref()
        .ok_or_else(|| usage("no bug database configured; pass --bugdb"))
}

/// Loads the configured database. A missing file is empty when `create` is
/// set and an error otherwise; no configured path gives `None` unless
/// `create` is set.
fn load_bugdb(config: &WorkspaceConfig, create: bool) -> Result<Option<BugDb>, Failure> {
    let path = match (&config.bugdb, create) {
        (Some(p), _) => p,
        (None, false) => return Ok(None),
        (None, true) => return Err(usage("no bug database configured; pass --bugdb")),
    };
    if !path.exists() {
        return if create {
            Ok(Some(BugDb::default()))
        } else {
            Err(usage(format!("bug database {} does not exist", path.display())))
        };
    }
    let (db, diags) = BugDb::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    for d in diags.iter() {
        log::warn!("{d}");
    }
    Ok(Some(db))
}

fn require_bugdb(config: &WorkspaceConfig) -> Result<BugDb, Failure> {
    bugdb_path(config)?;
    Ok(load_bugdb(config, false)?.expect("path configured"))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IssuesFile {
    Page { issues: Vec<JiraIssue> },
    List(Vec<JiraIssue>),
}

fn ingest(key: &str, library: &str, issues: Option<&Path>, config: &WorkspaceConfig, ctx: &Context) -> Outcome {
    let library =
        Library::parse(library).ok_or_else(|| usage(format!("library must be group:name, not {library:?}")))?;
    let path = bugdb_path(config)?.to_path_buf();
    let mut db = load_bugdb(config, true)?.expect("created");
    let issues = match issues {
        Some(file) => {
            let text = fs::read_to_string(file).map_err(|e| usage(format!("reading {}: {e}", file.display())))?;
            match serde_json::from_str(&text).map_err(|e| usage(format!("parsing {}: {e}", file.display())))? {
                IssuesFile::Page { issues } | IssuesFile::List(issues) => issues,
            }
        }
        None => fetch_jira_issues(ctx.transport(config).as_ref(), &config.jira, key)
            .map_err(|e| anyhow!("fetching {key} issues: {e}"))?,
    };
    let (records, diags) = ingest_jira(&issues, &library);
    for d in diags.iter() {
        log::warn!("{d}");
    }
    let kept = records.len();
    let changed = db.merge(records);
    db.save(&path).map_err(|e| anyhow!("saving {}: {e}", path.display()))?;
    println!(
        "{key}: {} issues read, {kept} severe fixed bugs, {changed} records added or changed, {} skipped",
        issues.len(),
        diags.len()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ValidationOut<'a> {
    records: usize,
    diagnostics: &'a Diagnostics,
}

fn validate(config: &WorkspaceConfig, ctx: &Context, out: &Output) -> Outcome {
    let path = bugdb_path(config)?;
    let (db, mut diagnostics) = BugDb::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let store = Store::new(config, ctx.transport(config));
    diagnostics.extend(db.validate(|v| store.artifact(v).ok().map(|a| a.analysis.graph.clone())));
    diagnostics.normalize();
    let written = out.json(
        "bugdb-validation.json",
        &ValidationOut {
            records: db.len(),
            diagnostics: &diagnostics,
        },
    )?;
    for d in diagnostics.iter() {
        println!("{d}");
    }
    print_written(&[written]);
    let blocking = diagnostics.count("invalid_bug_record") + diagnostics.count("unresolved_buggy_method");
    if blocking > 0 {
        return Err(Failure::Analysis {
            error: anyhow!("{blocking} bug records need attention"),
            diagnostics,
        });
    }
    Ok(EXIT_OK)
}

// --- alerts ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Unassessed {
    version: String,
    reason: String,
}

struct Assessment {
    loaded: Loaded,
    calls: Vec<ApiCall>,
    reports: Vec<RiskReport>,
    unassessed: Vec<Unassessed>,
    diagnostics: Diagnostics,
}

/// Risk analysis of every used library version some bug affects.
fn assess(args: &ProjectArgs, db: &BugDb, store: &Store) -> Result<Assessment, Failure> {
    let dir = &args.project_dir;
    require_dir(dir)?;
    let id = project::project_id(dir, args.project_id.as_deref());
    let loaded = load_project(dir, &id, &dating_snapshots(dir)?, None)?;
    let used = project::used_versions(&loaded.dependencies);
    let extraction = calls_into(store, &id, &loaded.classes, &used);
    let mut diagnostics = loaded.diagnostics.clone();
    diagnostics.extend(extraction.diagnostics);

    let buggy: Vec<&LibraryVersionRef> = used.iter().filter(|v| db.bugs_affecting(v).next().is_some()).collect();
    let results: Vec<(&LibraryVersionRef, Result<RiskReport, AlertError>)> = buggy
        .par_iter()
        .map(|v| (*v, risk_analysis(&id, &extraction.calls, v, db, store)))
        .collect();
    let mut reports = Vec::new();
    let mut unassessed = Vec::new();
    for (v, r) in results {
        match r {
            Ok(r) => reports.push(r),
            Err(e) => unassessed.push(Unassessed {
                version: v.to_string(),
                reason: e.to_string(),
            }),
        }
    }
    diagnostics.extend(store.take_diagnostics());
    diagnostics.normalize();
    Ok(Assessment {
        loaded,
        calls: extraction.calls,
        reports,
        unassessed,
        diagnostics,
    })
}

fn unassessed_failure(a: &Assessment) -> Failure {
    let mut diagnostics = a.diagnostics.clone();
    for u in &a.unassessed {
        diagnostics.push("risk_unavailable", &u.version, &u.reason);
    }
    diagnostics.normalize();
    Failure::Analysis {
        error: anyhow!("{} library versions could not be assessed", a.unassessed.len()),
        diagnostics,
    }
}

#[derive(Serialize, Deserialize)]
struct RiskOut {
    project_id: String,
    commit: CommitRef,
    reports: Vec<RiskReport>,
    #[serde(default)]
    unassessed: Vec<Unassessed>,
    #[serde(default)]
    diagnostics: Diagnostics,
}

fn risk(args: &ProjectArgs, config: &WorkspaceConfig, ctx: &Context, out: &Output) -> Outcome {
    let db = require_bugdb(config)?;
    let store = Store::new(config, ctx.transport(config));
    let a = assess(args, &db, &store)?;
    let text = if a.reports.is_empty() {
        format!("{}: no used library version has known bugs\n", a.loaded.id)
    } else {
        a.reports.iter().map(render_risk).collect::<Vec<_>>().join("\n")
    };
    let body = RiskOut {
        project_id: a.loaded.id.clone(),
        commit: a.loaded.commit.clone(),
        reports: a.reports.clone(),
        unassessed: a.unassessed.clone(),
        diagnostics: a.diagnostics.clone(),
    };
    let written = [out.json("risk.json", &body)?, out.text("risk.txt", &text)?];
    print!("{text}");
    print_written(&written);
    if a.reports.iter().any(|r| !r.safe) {
        Ok(EXIT_UNSAFE)
    } else if !a.unassessed.is_empty() {
        Err(unassessed_failure(&a))
    } else {
        Ok(EXIT_OK)
    }
}

#[derive(Serialize, Deserialize)]
struct EffortOut {
    project_id: String,
    analyses: Vec<EffortAnalysis>,
    /// Unsafe versions without a higher release.
    #[serde(default)]
    no_candidates: Vec<String>,
    #[serde(default)]
    unassessed: Vec<Unassessed>,
}

fn effort(
    args: &ProjectArgs,
    options: EffortOptions,
    config: &WorkspaceConfig,
    ctx: &Context,
    out: &Output,
) -> Outcome {
    let db = require_bugdb(config)?;
    let store = Store::new(config, ctx.transport(config));
    let a = assess(args, &db, &store)?;
    let unsafe_versions: Vec<&LibraryVersionRef> = a
        .reports
        .iter()
        .filter(|r| !r.safe)
        .map(|r| &r.library_version)
        .collect();
    let results: Vec<(&LibraryVersionRef, Result<EffortAnalysis, AlertError>)> = unsafe_versions
        .par_iter()
        .map(|v| {
            let result = store
                .releases(&v.library)
                .map_err(|e| AlertError::RiskUnavailable {
                    subject: v.library.to_string(),
                    reason: e,
                })
                .and_then(|releases| effort_analysis(&a.loaded.id, &a.calls, v, &db, &releases, &store, options));
            (*v, result)
        })
        .collect();
    let mut body = EffortOut {
        project_id: a.loaded.id.clone(),
        analyses: Vec::new(),
        no_candidates: Vec::new(),
        unassessed: a.unassessed.clone(),
    };
    for (v, r) in results {
        match r {
            Ok(e) => body.analyses.push(e),
            Err(AlertError::EmptyCandidateSet(_)) => body.no_candidates.push(v.to_string()),
            Err(e) => body.unassessed.push(Unassessed {
                version: v.to_string(),
                reason: e.to_string(),
            }),
        }
    }
    let written = out.json("effort.json", &body)?;
    for e in &body.analyses {
        println!(
            "{}: {} bug-free candidates, suggested {}",
            e.current,
            e.sl,
            e.suggested.as_ref().map_or("none".to_string(), |v| v.to_string())
        );
    }
    print_written(&[written]);
    if body.unassessed.is_empty() {
        Ok(EXIT_OK)
    } else {
        let mut diagnostics = a.diagnostics.clone();
        for u in &body.unassessed {
            diagnostics.push("effort_unavailable", &u.version, &u.reason);
        }
        diagnostics.normalize();
        Err(Failure::Analysis {
            error: anyhow!("{} library versions could not be assessed", body.unassessed.len()),
            diagnostics,
        })
    }
}

#[derive(Serialize)]
struct MattersEntry {
    config_file: String,
    library: String,
    ver_from: String,
    ver_to: String,
    /// `None` when an artifact was unavailable.
    matters: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

#[derive(Serialize)]
struct MattersOut<'a> {
    project_id: &'a str,
    commit: Option<&'a CommitRef>,
    updates: &'a [MattersEntry],
    diagnostics: &'a Diagnostics,
}

fn matters(
    args: &HistoryArgs,
    commit: &str,
    classes: Option<&Path>,
    config: &WorkspaceConfig,
    ctx: &Context,
    out: &Output,
) -> Outcome {
    let dir = &args.project.project_dir;
    require_dir(dir)?;
    if let Some(c) = classes {
        require_dir(c)?;
    }
    let id = project::project_id(dir, args.project.project_id.as_deref());
    let snapshots = HistorySource::locate(dir, args.history.as_deref(), &args.rev).snapshots()?;
    let ids: BTreeSet<&str> = snapshots
        .iter()
        .map(|s| s.commit.id.as_str())
        .filter(|c| c.starts_with(commit))
        .collect();
    if ids.len() > 1 {
        return Err(usage(format!("commit prefix {commit:?} is ambiguous")));
    }
    let target = snapshots
        .iter()
        .find(|s| ids.contains(s.commit.id.as_str()))
        .map(|s| &s.commit);
    let updates: Vec<VersionUpdate> = mine_updates(&snapshots, &id)
        .updates
        .into_iter()
        .filter(|u| Some(&u.commit) == target)
        .collect();

    let (project_classes, mut diagnostics) = project::load_project_classes(dir, classes)?;
    if target.is_none() {
        diagnostics.push("commit_not_found", commit, "no config-file change at this commit");
    }
    let store = Store::new(config, ctx.transport(config));
    let from: BTreeSet<LibraryVersionRef> = updates
        .iter()
        .map(|u| LibraryVersionRef::new(u.library.clone(), u.ver_from.clone()))
        .collect();
    let extraction = calls_into(&store, &id, &project_classes, &from);
    diagnostics.extend(extraction.diagnostics);

    let mut entries = Vec::new();
    for u in &updates {
        let (matters, reason) = match update_matters(u, &extraction.calls, &store) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
        entries.push(MattersEntry {
            config_file: u.config_file.clone(),
            library: u.library.to_string(),
            ver_from: u.ver_from.to_string(),
            ver_to: u.ver_to.to_string(),
            matters,
            reason,
        });
    }
    diagnostics.extend(store.take_diagnostics());
    diagnostics.normalize();
    let written = out.json(
        "update-matters.json",
        &MattersOut {
            project_id: &id,
            commit: target,
            updates: &entries,
            diagnostics: &diagnostics,
        },
    )?;
    for e in &entries {
        let verdict = match e.matters {
            Some(true) => "matters",
            Some(false) => "does not matter",
            None => "indeterminate",
        };
        println!(
            "{} {} -> {} ({}): {verdict}",
            e.library, e.ver_from, e.ver_to, e.config_file
        );
    }
    print_written(&[written]);
    let open = entries.iter().filter(|e| e.matters.is_none()).count();
    if open > 0 {
        return Err(Failure::Analysis {
            error: anyhow!("{open} updates are indeterminate"),
            diagnostics,
        });
    }
    Ok(EXIT_OK)
}

// --- report ------------------------------------------------------------------------------

#[derive(Serialize)]
struct TableOut<'a> {
    rows: &'a [TableRow],
}

fn report(results: &Path, out: &Output) -> Outcome {
    require_dir(results)?;
    let mut risks: BTreeMap<String, Vec<RiskReport>> = BTreeMap::new();
    let mut efforts: BTreeMap<String, Vec<EffortAnalysis>> = BTreeMap::new();
    for entry in WalkDir::new(results).sort_by_file_name() {
        let entry = entry.map_err(|e| anyhow!(e))?;
        let name = entry.file_name().to_string_lossy();
        if !entry.file_type().is_file() || (name != "risk.json" && name != "effort.json") {
            continue;
        }
        let text = fs::read_to_string(entry.path()).with_context(|| format!("reading {}", entry.path().display()))?;
        if name == "risk.json" {
            let r: RiskOut =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", entry.path().display()))?;
            risks.entry(r.project_id).or_default().extend(r.reports);
        } else {
            let e: EffortOut =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", entry.path().display()))?;
            efforts.entry(e.project_id).or_default().extend(e.analyses);
        }
    }
    let projects: BTreeSet<&String> = risks.keys().chain(efforts.keys()).collect();
    let rows: Vec<TableRow> = projects
        .into_iter()
        .map(|p| {
            table_row(
                p,
                risks.get(p).map_or(&[][..], Vec::as_slice),
                efforts.get(p).map_or(&[][..], Vec::as_slice),
            )
        })
        .collect();
    let text = render_table(&rows);
    let written = [
        out.json("alert-table.json", &TableOut { rows: &rows })?,
        out.text("alert-table.txt", &text)?,
    ];
    print!("{text}");
    print_written(&written);
    Ok(EXIT_OK)
}
