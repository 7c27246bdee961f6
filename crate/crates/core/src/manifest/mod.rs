//! Declared library dependencies from Maven and Gradle build files.

mod gradle;
mod maven;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::version::VersionString;

pub use tree::{DirTree, FileTree, MemTree};

/// A library coordinate, `group:name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Library {
    pub group: String,
    pub name: String,
}

impl Library {
    pub fn new(group: impl Into<String>, name: impl Into<String>) -> Self {
        Library {
            group: group.into(),
            name: name.into(),
        }
    }

    /// Parses `group:name`.
    pub fn parse(coord: &str) -> Option<Library> {
        let (group, name) = coord.split_once(':')?;
        if group.is_empty() || name.is_empty() || name.contains(':') {
            return None;
        }
        Some(Library::new(group, name))
    }
}

impl fmt::Display for Library {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.group, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LibraryVersionRef {
    pub library: Library,
    pub version: VersionString,
}

impl LibraryVersionRef {
    pub fn new(library: Library, version: VersionString) -> Self {
        LibraryVersionRef { library, version }
    }

    /// Parses `group:name:version`.
    pub fn parse(coord: &str) -> Option<LibraryVersionRef> {
        let mut it = coord.splitn(3, ':');
        let group = it.next()?;
        let name = it.next()?;
        let version = it.next()?;
        if group.is_empty() || name.is_empty() {
            return None;
        }
        Some(LibraryVersionRef::new(
            Library::new(group, name),
            VersionString::new(version).ok()?,
        ))
    }
}

impl fmt::Display for LibraryVersionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.library, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommitRef {
    pub id: String,
    /// Commit timestamp, UTC seconds.
    pub date: i64,
}

impl CommitRef {
    pub fn new(id: impl Into<String>, date: i64) -> Self {
        CommitRef { id: id.into(), date }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceSet {
    Main,
    Test,
    #[default]
    Unknown,
}

/// A library version declared in one configuration file at one commit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LibraryDependency {
    pub project_id: String,
    /// Path relative to the project root, `/`-separated.
    pub config_file: String,
    pub commit: CommitRef,
    pub version_ref: LibraryVersionRef,
    pub source_set: SourceSet,
    pub optional: bool,
    /// How group/name/version were obtained when not written literally
    /// (property expansion, parent hops, managed versions, variables).
    pub provenance: Vec<String>,
}

impl LibraryDependency {
    pub fn library(&self) -> &Library {
        &self.version_ref.library
    }

    pub fn version(&self) -> &VersionString {
        &self.version_ref.version
    }

    pub fn to_row(&self) -> DependencyRow {
        DependencyRow {
            project_id: self.project_id.clone(),
            config_file: self.config_file.clone(),
            commit_id: self.commit.id.clone(),
            commit_date: self.commit.date,
            group: self.version_ref.library.group.clone(),
            name: self.version_ref.library.name.clone(),
            version: self.version_ref.version.to_string(),
            source_set: self.source_set,
            optional: self.optional,
        }
    }
}

/// JSON Lines wire format of a [`LibraryDependency`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRow {
    pub project_id: String,
    pub config_file: String,
    pub commit_id: String,
    pub commit_date: i64,
    pub group: String,
    pub name: String,
    pub version: String,
    pub source_set: SourceSet,
    pub optional: bool,
}

impl DependencyRow {
    pub fn into_dependency(self) -> Option<LibraryDependency> {
        Some(LibraryDependency {
            project_id: self.project_id,
            config_file: self.config_file,
            commit: CommitRef::new(self.commit_id, self.commit_date),
            version_ref: LibraryVersionRef::new(
                Library::new(self.group, self.name),
                VersionString::new(self.version).ok()?,
            ),
            source_set: self.source_set,
            optional: self.optional,
            provenance: Vec::new(),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read project tree: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub dependencies: Vec<LibraryDependency>,
    pub diagnostics: Diagnostics,
}

/// A dependency as declared, before de-duplication.
#[derive(Debug, Clone)]
pub(crate) struct Declared {
    pub config_file: String,
    pub group: String,
    pub name: String,
    pub version: String,
    pub test_scope: bool,
    pub optional: bool,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    Maven,
    Gradle,
    GradleKotlin,
}

pub fn config_kind(path: &str) -> Option<ConfigKind> {
    match path.rsplit('/').next()? {
        "pom.xml" => Some(ConfigKind::Maven),
        "build.gradle" => Some(ConfigKind::Gradle),
        "build.gradle.kts" => Some(ConfigKind::GradleKotlin),
        _ => None,
    }
}

/// All `pom.xml`, `build.gradle` and `build.gradle.kts` files, sorted.
pub fn list_config_files(tree: &dyn FileTree) -> Result<Vec<String>, ManifestError> {
    let mut files: Vec<String> = tree.files()?.into_iter().filter(|p| config_kind(p).is_some()).collect();
    files.sort();
    Ok(files)
}

/// Extracts declared dependencies from every configuration file of a tree.
///
/// Output is sorted by (config file, group, name, version) with one record per
/// distinct tuple. Declarations whose version cannot be resolved, or that use
/// a version range, are reported in the diagnostics instead.
pub fn extract_dependencies(
    tree: &dyn FileTree,
    commit: &CommitRef,
    project_id: &str,
) -> Result<Extraction, ManifestError> {
    let files = list_config_files(tree)?;
    let mut diagnostics = Diagnostics::new();

    let poms: Vec<String> = files
        .iter()
        .filter(|f| config_kind(f) == Some(ConfigKind::Maven))
        .cloned()
        .collect();
    let gradles: Vec<String> = files
        .iter()
        .filter(|f| matches!(config_kind(f), Some(ConfigKind::Gradle | ConfigKind::GradleKotlin)))
        .cloned()
        .collect();

    let mut declared = maven::extract(tree, &poms, &mut diagnostics);
    declared.extend(gradle::extract(tree, &gradles, &mut diagnostics));

    let mut merged: BTreeMap<(String, String, String, String), LibraryDependency> = BTreeMap::new();
    for d in declared {
        if let Some(reason) = unusable_version(&d.version) {
            diagnostics.push(
                reason,
                &d.config_file,
                format!("{}:{}:{} excluded", d.group, d.name, d.version),
            );
            continue;
        }
        let version = VersionString::new(d.version.clone()).expect("checked non-empty");
        let test_path = d.config_file.starts_with("src/test/") || d.config_file.contains("/src/test/");
        let source_set = if d.test_scope || test_path {
            SourceSet::Test
        } else {
            SourceSet::Main
        };
        let key = (
            d.config_file.clone(),
            d.group.clone(),
            d.name.clone(),
            d.version.clone(),
        );
        match merged.get_mut(&key) {
            Some(existing) => {
                // Same coordinate declared twice in one file (e.g. profiles):
                // main wins over test.
                if source_set == SourceSet::Main {
                    existing.source_set = SourceSet::Main;
                }
                diagnostics.push(
                    "duplicate_declaration",
                    &d.config_file,
                    format!("{}:{}:{} declared more than once", d.group, d.name, d.version),
                );
            }
            None => {
                merged.insert(
                    key,
                    LibraryDependency {
                        project_id: project_id.to_string(),
                        config_file: d.config_file,
                        commit: commit.clone(),
                        version_ref: LibraryVersionRef::new(Library::new(d.group, d.name), version),
                        source_set,
                        optional: d.optional,
                        provenance: d.provenance,
                    },
                );
            }
        }
    }

    diagnostics.normalize();
    Ok(Extraction {
        dependencies: merged.into_values().collect(),
        diagnostics,
    })
}

/// Returns a diagnostic code when a resolved version string cannot be used.
fn unusable_version(version: &str) -> Option<&'static str> {
    let v = version.trim();
    if v.is_empty() {
        Some("unversioned_dependency")
    } else if v.contains("${") || v.contains('$') {
        Some("unresolved_property")
    } else if v.starts_with('[') || v.starts_with('(') || v.contains(',') {
        Some("version_range")
    } else if matches!(v, "LATEST" | "RELEASE" | "latest.release" | "latest.integration" | "+") || v.ends_with(".+") {
        Some("dynamic_version")
    } else {
        None
    }
}
