//! Severe-bug database: bugs, the versions they affect and the library
//! methods their fixes touched.

mod jira;
mod patch;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytecode::{CallGraph, MemberRef};
use crate::diag::Diagnostics;
use crate::manifest::{Library, LibraryVersionRef};
use crate::registry::VersionRelease;
use crate::version::{compare_raw, VersionString};

pub use jira::{fetch_jira_issues, ingest_jira, JiraConfig, JiraIssue};
pub use patch::{buggy_methods_from_patch, ClassIndex, MethodSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    Major,
    Critical,
    Blocker,
}

impl Priority {
    /// Severe tracker priorities; everything else is `None`.
    pub fn parse(s: &str) -> Option<Priority> {
        match s.trim().to_ascii_lowercase().as_str() {
            "major" => Some(Priority::Major),
            "critical" => Some(Priority::Critical),
            "blocker" => Some(Priority::Blocker),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BugSource {
    Jira,
    Local,
}

/// Where a record's buggy methods came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodsProvenance {
    Curated,
    Patch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub issue_id: String,
    pub priority: Priority,
    pub library: Library,
    pub affected_versions: Vec<VersionString>,
    #[serde(default)]
    pub buggy_methods: BTreeMap<String, BTreeSet<MemberRef>>,
    pub source: BugSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods_provenance: Option<MethodsProvenance>,
}

impl BugRecord {
    pub fn affects(&self, version: &str) -> bool {
        self.affected_versions.iter().any(|v| v.as_str() == version)
    }

    pub fn check(&self) -> Result<(), String> {
        if self.affected_versions.is_empty() {
            return Err("no affected versions".into());
        }
        if let Some(v) = self.buggy_methods.keys().find(|v| !self.affects(v)) {
            return Err(format!("buggy methods listed for unaffected version {v}"));
        }
        Ok(())
    }

    fn subject(&self) -> String {
        format!("{}#{}", self.library, self.issue_id)
    }
}

/// Sorts versions in Maven order, dropping duplicates.
pub(crate) fn sort_versions(v: &mut Vec<VersionString>) {
    v.sort_by(|a, b| compare_raw(a.as_str(), b.as_str()).then_with(|| a.as_str().cmp(b.as_str())));
    v.dedup_by(|a, b| a.as_str() == b.as_str());
}

#[derive(Debug, thiserror::Error)]
pub enum BugDbError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bug database is not valid JSON: {0}")]
    Format(#[from] serde_json::Error),
}

/// The loaded database. Records are kept sorted by (library, issue id).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BugDb {
    records: Vec<BugRecord>,
}

/// A bug paired with one release it affects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BugReleasePair {
    pub issue_id: String,
    pub release: LibraryVersionRef,
}

impl BugDb {
    /// Builds a database, dropping records that break the record invariants.
    pub fn from_records(records: Vec<BugRecord>) -> (BugDb, Diagnostics) {
        let mut db = BugDb::default();
        let mut diags = Diagnostics::new();
        for r in records {
            if let Err(e) = r.check() {
                diags.push("invalid_bug_record", r.subject(), e);
                continue;
            }
            if db.find(&r.library, &r.issue_id).is_some() {
                diags.push("duplicate_bug_record", r.subject(), "later record ignored");
                continue;
            }
            db.insert(r);
        }
        (db, diags)
    }

    pub fn load(path: &Path) -> Result<(BugDb, Diagnostics), BugDbError> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<(BugDb, Diagnostics), BugDbError> {
        let records: Vec<BugRecord> = serde_json::from_str(text)?;
        Ok(Self::from_records(records))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.records).expect("serializable");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), BugDbError> {
        crate::registry::write_atomic(path, self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn records(&self) -> &[BugRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn position(&self, library: &Library, issue_id: &str) -> Result<usize, usize> {
        self.records
            .binary_search_by(|r| (&r.library, r.issue_id.as_str()).cmp(&(library, issue_id)))
    }

    pub fn find(&self, library: &Library, issue_id: &str) -> Option<&BugRecord> {
        self.position(library, issue_id).ok().map(|i| &self.records[i])
    }

    fn insert(&mut self, mut r: BugRecord) {
        sort_versions(&mut r.affected_versions);
        match self.position(&r.library, &r.issue_id) {
            Ok(i) => self.records[i] = r,
            Err(i) => self.records.insert(i, r),
        }
    }

    /// Merges tracker records by (library, issue id). Tracker metadata
    /// replaces what is stored; buggy methods already present are kept for
    /// versions that are still affected. Returns the number of records
    /// added or changed.
    pub fn merge(&mut self, incoming: Vec<BugRecord>) -> usize {
        let mut changed = 0;
        for mut r in incoming {
            sort_versions(&mut r.affected_versions);
            if let Some(old) = self.find(&r.library, &r.issue_id) {
                if r.buggy_methods.is_empty() {
                    r.buggy_methods = old.buggy_methods.clone();
                    r.methods_provenance = old.methods_provenance;
                }
                r.buggy_methods
                    .retain(|v, _| r.affected_versions.iter().any(|a| a.as_str() == v));
                if old == &r {
                    continue;
                }
            }
            if r.check().is_ok() {
                self.insert(r);
                changed += 1;
            }
        }
        changed
    }

    /// Records buggy methods for one bug and version, replacing earlier ones.
    pub fn set_buggy_methods(
        &mut self,
        library: &Library,
        issue_id: &str,
        version: &str,
        methods: BTreeSet<MemberRef>,
        provenance: MethodsProvenance,
    ) -> Result<(), String> {
        let i = self
            .position(library, issue_id)
            .map_err(|_| format!("no bug {library}#{issue_id}"))?;
        let r = &mut self.records[i];
        if !r.affects(version) {
            return Err(format!("{library}#{issue_id} does not affect {version}"));
        }
        r.buggy_methods.insert(version.to_string(), methods);
        r.methods_provenance = Some(provenance);
        Ok(())
    }

    /// Bugs affecting a library version.
    pub fn bugs_affecting<'a>(
        &'a self,
        version_ref: &'a LibraryVersionRef,
    ) -> impl Iterator<Item = &'a BugRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.library == version_ref.library && r.affects(version_ref.version.as_str()))
    }

    /// Buggy methods of a version, each with the bugs naming it.
    pub fn buggy_methods(&self, version_ref: &LibraryVersionRef) -> BTreeMap<MemberRef, BTreeSet<String>> {
        let mut out: BTreeMap<MemberRef, BTreeSet<String>> = BTreeMap::new();
        for r in self.bugs_affecting(version_ref) {
            for m in r.buggy_methods.get(version_ref.version.as_str()).into_iter().flatten() {
                out.entry(m.clone()).or_default().insert(r.issue_id.clone());
            }
        }
        out
    }

    /// Every (bug, affected release) pair.
    pub fn pairs(&self) -> Vec<BugReleasePair> {
        self.records
            .iter()
            .flat_map(|r| {
                r.affected_versions.iter().map(|v| BugReleasePair {
                    issue_id: r.issue_id.clone(),
                    release: LibraryVersionRef::new(r.library.clone(), v.clone()),
                })
            })
            .collect()
    }

    /// Every library version with at least one bug.
    pub fn buggy_versions(&self) -> BTreeSet<LibraryVersionRef> {
        self.pairs().into_iter().map(|p| p.release).collect()
    }

    /// Checks every buggy method against the call graph of its version.
    /// `graph_of` returns `None` when the artifact is unavailable; such
    /// versions are reported and skipped. Violations never remove records.
    pub fn validate(&self, mut graph_of: impl FnMut(&LibraryVersionRef) -> Option<CallGraph>) -> Diagnostics {
        let mut diags = Diagnostics::new();
        for r in &self.records {
            if let Err(e) = r.check() {
                diags.push("invalid_bug_record", r.subject(), e);
            }
            for (v, methods) in &r.buggy_methods {
                let Ok(version) = VersionString::new(v) else {
                    continue;
                };
                let vref = LibraryVersionRef::new(r.library.clone(), version);
                let Some(graph) = graph_of(&vref) else {
                    diags.push(
                        "artifact_unavailable",
                        format!("{}@{}", r.subject(), v),
                        "buggy methods not checked",
                    );
                    continue;
                };
                for m in methods {
                    if !graph.nodes.contains(m) && !graph.fields.contains_key(m) {
                        diags.push(
                            "unresolved_buggy_method",
                            format!("{}@{}", r.subject(), v),
                            m.to_string(),
                        );
                    }
                }
            }
        }
        diags
    }
}

/// Number of distinct severe bugs affecting a release.
pub fn potential_risk(release: &VersionRelease, db: &BugDb) -> usize {
    db.bugs_affecting(&release.version_ref).count()
}
