//! Library version updates mined from a project's commit history.
//!
//! A history is a first-parent sequence of [`CommitSnapshot`]s. Every commit
//! that touches a configuration file is compared with its parent: dependency
//! maps keyed by (file, group, name) are diffed and each changed version
//! becomes a [`VersionUpdate`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::manifest::{config_kind, extract_dependencies, CommitRef, FileTree, Library, MemTree};
use crate::version::{classify_update, compare_raw, Direction, Magnitude, UpdateClass, VersionString};

/// Config files of a project at one commit.
#[derive(Debug, Clone)]
pub struct CommitSnapshot {
    pub commit: CommitRef,
    pub changed_config_files: Vec<String>,
    pub tree: Arc<MemTree>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionUpdate {
    pub project_id: String,
    pub config_file: String,
    pub commit: CommitRef,
    pub library: Library,
    pub ver_from: VersionString,
    pub ver_to: VersionString,
    pub classification: UpdateClass,
}

impl VersionUpdate {
    pub fn to_row(&self) -> UpdateRow {
        UpdateRow {
            project_id: self.project_id.clone(),
            config_file: self.config_file.clone(),
            commit_id: self.commit.id.clone(),
            commit_date: self.commit.date,
            group: self.library.group.clone(),
            name: self.library.name.clone(),
            ver_from: self.ver_from.to_string(),
            ver_to: self.ver_to.to_string(),
            direction: self.classification.direction,
            magnitude: self.classification.magnitude,
        }
    }
}

/// JSON Lines wire format of a [`VersionUpdate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateRow {
    pub project_id: String,
    pub config_file: String,
    pub commit_id: String,
    pub commit_date: i64,
    pub group: String,
    pub name: String,
    pub ver_from: String,
    pub ver_to: String,
    pub direction: Direction,
    pub magnitude: Magnitude,
}

impl UpdateRow {
    pub fn into_update(self) -> Option<VersionUpdate> {
        let ver_from = VersionString::new(self.ver_from).ok()?;
        let ver_to = VersionString::new(self.ver_to).ok()?;
        Some(VersionUpdate {
            project_id: self.project_id,
            config_file: self.config_file,
            commit: CommitRef::new(self.commit_id, self.commit_date),
            library: Library::new(self.group, self.name),
            classification: classify_update(&ver_from, &ver_to),
            ver_from,
            ver_to,
        })
    }
}

#[derive(Debug, Default, Clone)]
pub struct Mining {
    pub updates: Vec<VersionUpdate>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("git {args}: {message}")]
    Git { args: String, message: String },
}

type DepMap = BTreeMap<(String, String, String), BTreeSet<String>>;

struct Extracted {
    deps: DepMap,
    broken_files: BTreeSet<String>,
}

fn extract_map(snapshot: &CommitSnapshot, project_id: &str) -> Extracted {
    let mut deps = DepMap::new();
    let mut broken_files = BTreeSet::new();
    // MemTree reads never fail, so the only errors are per-file parse errors.
    if let Ok(ex) = extract_dependencies(snapshot.tree.as_ref(), &snapshot.commit, project_id) {
        for d in ex.dependencies {
            deps.entry((d.config_file, d.version_ref.library.group, d.version_ref.library.name))
                .or_default()
                .insert(d.version_ref.version.to_string());
        }
        for diag in ex.diagnostics.iter() {
            if diag.code == "malformed_pom" || diag.code == "unreadable_file" {
                broken_files.insert(diag.subject.clone());
            }
        }
    }
    Extracted { deps, broken_files }
}

/// Mines version updates from a first-parent commit stream in ascending date
/// order. Additions and removals are not updates; a renamed file counts as a
/// removal plus an addition.
pub fn mine_updates(stream: &[CommitSnapshot], project_id: &str) -> Mining {
    let mut diagnostics = Diagnostics::new();
    let needed: Vec<bool> = (0..stream.len())
        .map(|i| {
            !stream[i].changed_config_files.is_empty()
                || stream.get(i + 1).is_some_and(|n| !n.changed_config_files.is_empty())
        })
        .collect();
    let extracted: Vec<Option<Extracted>> = stream
        .par_iter()
        .enumerate()
        .map(|(i, s)| needed[i].then(|| extract_map(s, project_id)))
        .collect();

    let mut updates = Vec::new();
    for i in 1..stream.len() {
        let snapshot = &stream[i];
        if snapshot.changed_config_files.is_empty() {
            continue;
        }
        let (Some(before), Some(after)) = (&extracted[i - 1], &extracted[i]) else {
            continue;
        };
        for broken in before.broken_files.union(&after.broken_files) {
            diagnostics.push(
                "unparseable_config",
                broken,
                format!("skipped at commit {}", snapshot.commit.id),
            );
        }
        for (key, after_versions) in &after.deps {
            let Some(before_versions) = before.deps.get(key) else {
                continue;
            };
            if before_versions == after_versions
                || before.broken_files.contains(&key.0)
                || after.broken_files.contains(&key.0)
            {
                continue;
            }
            let mut removed: Vec<&String> = before_versions.difference(after_versions).collect();
            let mut added: Vec<&String> = after_versions.difference(before_versions).collect();
            removed.sort_by(|a, b| compare_raw(a, b));
            added.sort_by(|a, b| compare_raw(a, b));
            if removed.len() != added.len() {
                diagnostics.push(
                    "ambiguous_update",
                    &key.0,
                    format!(
                        "{}:{} at {}: {} versions removed, {} added",
                        key.1,
                        key.2,
                        snapshot.commit.id,
                        removed.len(),
                        added.len()
                    ),
                );
            }
            for (from, to) in removed.into_iter().zip(added) {
                let ver_from = VersionString::new(from.clone()).expect("extracted versions are non-empty");
                let ver_to = VersionString::new(to.clone()).expect("extracted versions are non-empty");
                updates.push(VersionUpdate {
                    project_id: project_id.to_string(),
                    config_file: key.0.clone(),
                    commit: snapshot.commit.clone(),
                    library: Library::new(key.1.clone(), key.2.clone()),
                    classification: classify_update(&ver_from, &ver_to),
                    ver_from,
                    ver_to,
                });
            }
        }
    }
    updates.sort_by(|a, b| {
        (a.commit.date, &a.config_file, &a.library.group, &a.library.name).cmp(&(
            b.commit.date,
            &b.config_file,
            &b.library.group,
            &b.library.name,
        ))
    });
    diagnostics.normalize();
    Mining { updates, diagnostics }
}

// --- snapshot streams ------------------------------------------------------------

/// One line of the pre-exported snapshot stream: the content of one config
/// file at one commit (`content: null` deletes the file).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotLine {
    pub commit_id: String,
    pub date: i64,
    pub path: String,
    pub content: Option<String>,
}

/// Reads a JSON Lines snapshot stream. Consecutive lines with the same
/// `commit_id` form one commit; each commit's tree is its parent's tree with
/// the listed files replaced or deleted.
pub fn read_snapshot_stream(reader: impl BufRead) -> Result<Vec<CommitSnapshot>, HistoryError> {
    let mut out: Vec<CommitSnapshot> = Vec::new();
    let mut tree = MemTree::new();
    let mut pending: Option<(CommitRef, Vec<String>)> = None;

    let flush = |out: &mut Vec<CommitSnapshot>, tree: &MemTree, pending: Option<(CommitRef, Vec<String>)>| {
        if let Some((commit, mut changed)) = pending {
            changed.sort();
            changed.dedup();
            out.push(CommitSnapshot {
                commit,
                changed_config_files: changed,
                tree: Arc::new(tree.clone()),
            });
        }
    };

    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: SnapshotLine = serde_json::from_str(&line).map_err(|e| HistoryError::Format {
            line: n + 1,
            message: e.to_string(),
        })?;
        if entry.commit_id.is_empty() {
            return Err(HistoryError::Format {
                line: n + 1,
                message: "empty commit_id".into(),
            });
        }
        if pending.as_ref().map(|(c, _)| c.id.as_str()) != Some(entry.commit_id.as_str()) {
            if let Some((prev, _)) = &pending {
                if entry.date < prev.date {
                    return Err(HistoryError::Format {
                        line: n + 1,
                        message: format!("commit {} predates its parent {}", entry.commit_id, prev.id),
                    });
                }
            }
            flush(&mut out, &tree, pending.take());
            pending = Some((CommitRef::new(entry.commit_id.clone(), entry.date), Vec::new()));
        }
        match entry.content {
            Some(content) => tree.insert(entry.path.clone(), content),
            None => {
                tree.remove(&entry.path);
            }
        }
        if config_kind(&entry.path).is_some() {
            pending.as_mut().expect("set above").1.push(entry.path);
        }
    }
    flush(&mut out, &tree, pending.take());
    Ok(out)
}

/// Writes the delta form read by [`read_snapshot_stream`].
pub fn write_snapshot_stream(stream: &[CommitSnapshot], mut writer: impl Write) -> io::Result<()> {
    let empty = MemTree::new();
    let mut previous: &MemTree = &empty;
    for snapshot in stream {
        let current = snapshot.tree.as_ref();
        let mut paths: BTreeSet<String> = BTreeSet::new();
        for p in FileTree::files(current)? {
            if previous.get(&p) != current.get(&p) {
                paths.insert(p);
            }
        }
        for p in FileTree::files(previous)? {
            if current.get(&p).is_none() {
                paths.insert(p);
            }
        }
        for path in paths {
            let content = current.get(&path).map(|b| String::from_utf8_lossy(b).into_owned());
            let line = SnapshotLine {
                commit_id: snapshot.commit.id.clone(),
                date: snapshot.commit.date,
                path,
                content,
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
        previous = current;
    }
    Ok(())
}

// --- repository walking ------------------------------------------------------

/// Produces the first-parent commit stream of a repository's default branch.
pub trait RepositoryWalker {
    fn snapshots(&self) -> Result<Vec<CommitSnapshot>, HistoryError>;
}

/// Walks a local git checkout through the `git` command-line tool. Only
/// commits that change a configuration file are yielded.
#[derive(Debug, Clone)]
pub struct GitWalker {
    repo: PathBuf,
    rev: String,
}

impl GitWalker {
    pub fn new(repo: impl Into<PathBuf>) -> Self {
        GitWalker {
            repo: repo.into(),
            rev: "HEAD".into(),
        }
    }

    pub fn at_revision(mut self, rev: impl Into<String>) -> Self {
        self.rev = rev.into();
        self
    }

    pub fn is_repository(path: &Path) -> bool {
        path.join(".git").exists()
    }

    fn git(&self, args: &[&str]) -> Result<Vec<u8>, HistoryError> {
        let output = Command::new("git").arg("-C").arg(&self.repo).args(args).output()?;
        if !output.status.success() {
            return Err(HistoryError::Git {
                args: args.join(" "),
                message: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        Ok(output.stdout)
    }
}

impl RepositoryWalker for GitWalker {
    fn snapshots(&self) -> Result<Vec<CommitSnapshot>, HistoryError> {
        let log = self.git(&["log", "--first-parent", "--reverse", "--format=%H %ct", &self.rev])?;
        let mut blobs: HashMap<String, Vec<u8>> = HashMap::new();
        let mut out = Vec::new();
        let mut previous: BTreeMap<String, String> = BTreeMap::new();

        for line in String::from_utf8_lossy(&log).lines() {
            let Some((sha, ts)) = line.split_once(' ') else {
                continue;
            };
            let date: i64 = ts.trim().parse().map_err(|_| HistoryError::Git {
                args: "log".into(),
                message: format!("bad timestamp in {line:?}"),
            })?;
            let listing = self.git(&["ls-tree", "-r", "-z", sha])?;
            let mut current: BTreeMap<String, String> = BTreeMap::new();
            for entry in listing.split(|b| *b == 0) {
                let entry = String::from_utf8_lossy(entry);
                let Some((meta, path)) = entry.split_once('\t') else {
                    continue;
                };
                let mut parts = meta.split_whitespace();
                let (_, kind, blob) = (parts.next(), parts.next(), parts.next());
                if kind == Some("blob") && config_kind(path).is_some() {
                    current.insert(path.to_string(), blob.unwrap_or_default().to_string());
                }
            }
            let mut changed: Vec<String> = current
                .iter()
                .filter(|(p, b)| previous.get(*p) != Some(*b))
                .map(|(p, _)| p.clone())
                .collect();
            changed.extend(previous.keys().filter(|p| !current.contains_key(*p)).cloned());
            changed.sort();
            if changed.is_empty() {
                continue;
            }
            let mut tree = MemTree::new();
            for (path, blob) in &current {
                if !blobs.contains_key(blob) {
                    let content = self.git(&["cat-file", "blob", blob])?;
                    blobs.insert(blob.clone(), content);
                }
                tree.insert(path.clone(), blobs[blob].clone());
            }
            out.push(CommitSnapshot {
                commit: CommitRef::new(sha, date),
                changed_config_files: changed,
                tree: Arc::new(tree),
            });
            previous = current;
        }
        Ok(out)
    }
}
