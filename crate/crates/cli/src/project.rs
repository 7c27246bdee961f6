//! Reading a project checkout: build files, compiled classes and history.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{Context as _, Result};
use walkdir::WalkDir;

use depscope_core::bytecode::{load_classes, ClassModel};
use depscope_core::history::{read_snapshot_stream, CommitSnapshot, GitWalker, RepositoryWalker};
use depscope_core::manifest::{extract_dependencies, DirTree};
use depscope_core::{CommitRef, Diagnostics, LibraryDependency, LibraryVersionRef, SourceSet};

pub const HISTORY_FILE: &str = "history.jsonl";

pub fn project_id(dir: &Path, explicit: Option<&str>) -> String {
    explicit.map(str::to_string).unwrap_or_else(|| {
        dir.canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "project".into())
    })
}

/// Where the commit stream of a project comes from.
pub enum HistorySource {
    Stream(PathBuf),
    Git { repo: PathBuf, rev: String },
    None,
}

impl HistorySource {
    pub fn locate(dir: &Path, explicit: Option<&Path>, rev: &str) -> HistorySource {
        if let Some(p) = explicit {
            return HistorySource::Stream(p.to_path_buf());
        }
        let stream = dir.join(HISTORY_FILE);
        if stream.is_file() {
            HistorySource::Stream(stream)
        } else if GitWalker::is_repository(dir) {
            HistorySource::Git {
                repo: dir.to_path_buf(),
                rev: rev.to_string(),
            }
        } else {
            HistorySource::None
        }
    }

    pub fn snapshots(&self) -> Result<Vec<CommitSnapshot>> {
        match self {
            HistorySource::Stream(p) => {
                let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                read_snapshot_stream(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
            }
            HistorySource::Git { repo, rev } => Ok(GitWalker::new(repo).at_revision(rev).snapshots()?),
            HistorySource::None => Ok(Vec::new()),
        }
    }
}

/// The commit the checkout is at: git `HEAD`, else the last commit of the
/// snapshot stream, else an undated working tree.
pub fn current_commit(dir: &Path, history: &[CommitSnapshot]) -> CommitRef {
    if GitWalker::is_repository(dir) {
        let out = Command::new("git")
            .arg("-C")
            .arg(dir)
            .args(["log", "-1", "--format=%H %ct"])
            .output();
        if let Some(out) = out.ok().filter(|o| o.status.success()) {
            let text = String::from_utf8_lossy(&out.stdout);
            if let Some((id, ts)) = text.trim().split_once(' ') {
                if let Ok(date) = ts.parse() {
                    return CommitRef::new(id, date);
                }
            }
        }
    }
    history
        .last()
        .map(|s| s.commit.clone())
        .unwrap_or_else(|| CommitRef::new("worktree", 0))
}

pub struct Extracted {
    pub dependencies: Vec<LibraryDependency>,
    pub diagnostics: Diagnostics,
}

pub fn extract(dir: &Path, commit: &CommitRef, project_id: &str) -> Result<Extracted> {
    let ex = extract_dependencies(&DirTree::new(dir), commit, project_id)
        .with_context(|| format!("reading {}", dir.display()))?;
    Ok(Extracted {
        dependencies: ex.dependencies,
        diagnostics: ex.diagnostics,
    })
}

pub fn used_versions(deps: &[LibraryDependency]) -> BTreeSet<LibraryVersionRef> {
    deps.iter().map(|d| d.version_ref.clone()).collect()
}

fn class_dir_kind(rel: &Path) -> Option<SourceSet> {
    let parts: Vec<&str> = rel.iter().filter_map(|p| p.to_str()).collect();
    match parts.as_slice() {
        [.., "target", "classes"] => Some(SourceSet::Main),
        [.., "target", "test-classes"] => Some(SourceSet::Test),
        [.., "build", "classes", _, "main"] => Some(SourceSet::Main),
        [.., "build", "classes", _, "test"] => Some(SourceSet::Test),
        _ => None,
    }
}

/// Compiled class directories of a Maven or Gradle checkout, any module depth.
pub fn class_dirs(dir: &Path) -> Vec<(PathBuf, SourceSet)> {
    let mut out = Vec::new();
    let mut walker = WalkDir::new(dir).sort_by_file_name().into_iter();
    while let Some(entry) = walker.next() {
        let Ok(entry) = entry else { continue };
        if !entry.file_type().is_dir() {
            continue;
        }
        if entry.depth() > 0 && entry.file_name() == ".git" {
            walker.skip_current_dir();
            continue;
        }
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        if let Some(set) = class_dir_kind(rel) {
            out.push((entry.path().to_path_buf(), set));
            walker.skip_current_dir();
        }
    }
    out
}

/// Classes from the given directories, or from every class directory of
/// the checkout. An explicit directory counts as main code.
pub fn load_project_classes(
    dir: &Path,
    explicit: Option<&Path>,
) -> Result<(Vec<(ClassModel, SourceSet)>, Diagnostics)> {
    let dirs = match explicit {
        Some(p) => vec![(p.to_path_buf(), SourceSet::Main)],
        None => class_dirs(dir),
    };
    let mut classes = Vec::new();
    let mut diagnostics = Diagnostics::new();
    for (d, set) in dirs {
        let loaded = load_classes(&d).with_context(|| format!("loading classes from {}", d.display()))?;
        diagnostics.extend(loaded.diagnostics);
        classes.extend(loaded.classes.into_iter().map(|c| (c, set)));
    }
    if classes.is_empty() {
        diagnostics.push("no_classes", dir.display().to_string(), "no compiled classes found");
    }
    Ok((classes, diagnostics))
}
