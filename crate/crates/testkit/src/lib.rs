//! Synthetic jars, registries, projects and bug databases for tests and
//! benchmarks. Nothing here needs a JDK: class files come from the core
//! crate's class builder.

pub mod alerts;
pub mod corpus;
pub mod spec;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use depscope_core::bugdb::{BugDb, BugRecord};
use depscope_core::bytecode::{load_jar_bytes, ArtifactAnalysis, ClassModel};
use depscope_core::history::SnapshotLine;
use depscope_core::registry::{sha256_hex, write_fixture, Index, IndexEntry};
use depscope_core::{LibraryVersionRef, SourceSet};

use spec::ClassSpec;

/// One library version in a fixture registry.
#[derive(Debug, Clone)]
pub struct VersionFixture {
    pub version_ref: LibraryVersionRef,
    pub release_date: i64,
    pub classes: Vec<ClassSpec>,
    /// Listed in the release index.
    pub listed: bool,
    /// Jar present in the registry.
    pub jar: bool,
    /// Compile with line numbers and source file attributes.
    pub debug: bool,
}

impl VersionFixture {
    pub fn new(coord: &str, release_date: i64, classes: Vec<ClassSpec>) -> Self {
        VersionFixture {
            version_ref: vref(coord),
            release_date,
            classes,
            listed: true,
            jar: true,
            debug: false,
        }
    }

    pub fn jar_bytes(&self) -> Vec<u8> {
        spec::jar(&self.classes, self.debug)
    }

    pub fn analysis(&self) -> ArtifactAnalysis {
        let bytes = self.jar_bytes();
        let loaded = load_jar_bytes(&bytes, &self.version_ref.to_string()).expect("fixture jar");
        ArtifactAnalysis::from_classes(&self.version_ref, &sha256_hex(&bytes), &loaded)
    }

    pub fn class_models(&self) -> Vec<ClassModel> {
        self.classes
            .iter()
            .map(|c| ClassModel::parse(&c.compile(self.debug)).expect("fixture class"))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProjectFixture {
    pub id: String,
    /// Build files at the project's current state, by relative path.
    pub files: BTreeMap<String, String>,
    pub main: Vec<ClassSpec>,
    pub test: Vec<ClassSpec>,
    /// Config-file history, oldest first.
    pub history: Vec<SnapshotLine>,
    pub crawl_date: Option<i64>,
}

impl ProjectFixture {
    pub fn new(id: &str) -> Self {
        ProjectFixture {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn class_models(&self) -> Vec<(ClassModel, SourceSet)> {
        let parse = |c: &ClassSpec| ClassModel::parse(&c.compile(false)).expect("fixture class");
        self.main
            .iter()
            .map(|c| (parse(c), SourceSet::Main))
            .chain(self.test.iter().map(|c| (parse(c), SourceSet::Test)))
            .collect()
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (path, content) in &self.files {
            let p = dir.join(path);
            fs::create_dir_all(p.parent().expect("has parent"))?;
            fs::write(p, content)?;
        }
        spec::write_class_dir(&dir.join("target/classes"), &self.main)?;
        spec::write_class_dir(&dir.join("target/test-classes"), &self.test)?;
        if !self.history.is_empty() {
            let mut out = String::new();
            for line in &self.history {
                out.push_str(&serde_json::to_string(line).expect("serializable"));
                out.push('\n');
            }
            fs::write(dir.join("history.jsonl"), out)?;
        }
        Ok(())
    }
}

/// Libraries, projects and bugs that together make a runnable workspace.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub versions: Vec<VersionFixture>,
    pub projects: Vec<ProjectFixture>,
    pub bugs: Vec<BugRecord>,
    pub default_crawl_date: i64,
}

/// Where [`Workspace::write`] put things.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
    pub registry: PathBuf,
    pub bugdb: PathBuf,
    pub manifest: PathBuf,
    pub projects: BTreeMap<String, PathBuf>,
}

impl Workspace {
    pub fn index(&self) -> Index {
        let mut index = Index::new();
        for v in &self.versions {
            let entries = index.entry(v.version_ref.library.to_string()).or_default();
            if v.listed {
                entries.push(IndexEntry {
                    version: v.version_ref.version.as_str().to_string(),
                    release_date: v.release_date,
                });
            }
        }
        index
    }

    pub fn version(&self, coord: &str) -> &VersionFixture {
        self.versions
            .iter()
            .find(|v| v.version_ref.to_string() == coord)
            .unwrap_or_else(|| panic!("no fixture version {coord}"))
    }

    pub fn project(&self, id: &str) -> &ProjectFixture {
        self.projects
            .iter()
            .find(|p| p.id == id)
            .unwrap_or_else(|| panic!("no fixture project {id}"))
    }

    /// Analyses of every version with a jar.
    pub fn analyses(&self) -> BTreeMap<LibraryVersionRef, Arc<ArtifactAnalysis>> {
        self.versions
            .iter()
            .filter(|v| v.jar)
            .map(|v| (v.version_ref.clone(), Arc::new(v.analysis())))
            .collect()
    }

    pub fn bug_db(&self) -> BugDb {
        let (db, diags) = BugDb::from_records(self.bugs.clone());
        assert!(diags.is_empty(), "fixture bugs invalid: {diags:?}");
        db
    }

    pub fn write(&self, root: &Path) -> io::Result<Layout> {
        let registry = root.join("registry");
        let jars: Vec<(LibraryVersionRef, Vec<u8>)> = self
            .versions
            .iter()
            .filter(|v| v.jar)
            .map(|v| (v.version_ref.clone(), v.jar_bytes()))
            .collect();
        write_fixture(&registry, &self.index(), &jars)?;

        let bugdb = root.join("bugdb.json");
        fs::write(&bugdb, self.bug_db().to_json())?;

        let mut projects = BTreeMap::new();
        let mut manifest = format!("default_crawl_date = {}\n", self.default_crawl_date);
        for p in &self.projects {
            let dir = root.join("projects").join(&p.id);
            p.write(&dir)?;
            manifest.push_str(&format!(
                "\n[[projects]]\nid = \"{}\"\npath = \"projects/{}\"\n",
                p.id, p.id
            ));
            if let Some(c) = p.crawl_date {
                manifest.push_str(&format!("crawl_date = {c}\n"));
            }
            projects.insert(p.id.clone(), dir);
        }
        let manifest_path = root.join("corpus.toml");
        fs::write(&manifest_path, manifest)?;
        Ok(Layout {
            root: root.to_path_buf(),
            registry,
            bugdb,
            manifest: manifest_path,
            projects,
        })
    }
}

pub fn vref(coord: &str) -> LibraryVersionRef {
    LibraryVersionRef::parse(coord).unwrap_or_else(|| panic!("bad coordinate {coord}"))
}

/// A `pom.xml` declaring `(group:name:version, scope)` dependencies.
pub fn pom(artifact: &str, deps: &[(String, Option<&str>)]) -> String {
    let mut out = format!(
        "<?xml version=\"1.0\"?>\n<project xmlns=\"http://maven.apache.org/POM/4.0.0\">\n  <modelVersion>4.0.0</modelVersion>\n  <groupId>org.fixture</groupId>\n  <artifactId>{artifact}</artifactId>\n  <version>1.0</version>\n  <dependencies>\n"
    );
    for (coord, scope) in deps {
        let mut parts = coord.splitn(3, ':');
        let (g, n, v) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
        out.push_str(&format!(
            "    <dependency>\n      <groupId>{g}</groupId>\n      <artifactId>{n}</artifactId>\n      <version>{v}</version>\n"
        ));
        if let Some(s) = scope {
            out.push_str(&format!("      <scope>{s}</scope>\n"));
        }
        out.push_str("    </dependency>\n");
    }
    out.push_str("  </dependencies>\n</project>\n");
    out
}

/// A `build.gradle` declaring `implementation` dependencies.
pub fn gradle(deps: &[String]) -> String {
    let mut out = String::from("plugins {\n    id 'java'\n}\n\ndependencies {\n");
    for d in deps {
        out.push_str(&format!("    implementation '{d}'\n"));
    }
    out.push_str("}\n");
    out
}
