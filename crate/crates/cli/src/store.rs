//! Registry access shared by the commands: release lists and analyzed
//! artifacts, each fetched at most once per run.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use depscope_core::alert::ArtifactSource;
use depscope_core::bytecode::{load_artifact, ApiUniverse, ArtifactAnalysis, ClassModel};
use depscope_core::registry::{
    Cache, FixtureRegistry, MavenCentral, Registry, RegistryClient, RegistryError, Transport, VersionRelease,
};
use depscope_core::{Diagnostics, Library, LibraryVersionRef};

use crate::config::{RegistryMode, WorkspaceConfig};

pub struct Artifact {
    pub analysis: Arc<ArtifactAnalysis>,
    pub classes: Vec<ClassModel>,
}

type Memo<K, V> = Mutex<BTreeMap<K, Result<V, String>>>;

pub struct Store {
    registry: Box<dyn Registry>,
    artifacts: Memo<LibraryVersionRef, Arc<Artifact>>,
    releases: Memo<Library, Arc<Vec<VersionRelease>>>,
    diagnostics: Mutex<Diagnostics>,
}

impl Store {
    pub fn new(config: &WorkspaceConfig, transport: Arc<dyn Transport>) -> Store {
        let registry: Box<dyn Registry> = match &config.registry {
            RegistryMode::Fixture(dir) => Box::new(FixtureRegistry::open(dir)),
            RegistryMode::Offline => Box::new(RegistryClient::offline(Cache::new(&config.cache_root))),
            RegistryMode::Network => Box::new(RegistryClient::online(
                Cache::new(&config.cache_root),
                MavenCentral::new(transport, config.upstream.clone()),
            )),
        };
        Store::with_registry(registry)
    }

    pub fn with_registry(registry: Box<dyn Registry>) -> Store {
        Store {
            registry,
            artifacts: Mutex::new(BTreeMap::new()),
            releases: Mutex::new(BTreeMap::new()),
            diagnostics: Mutex::new(Diagnostics::new()),
        }
    }

    fn note(&self, code: &str, subject: String, message: String) {
        self.diagnostics.lock().unwrap().push(code, subject, message);
    }

    /// Diagnostics raised while fetching, sorted.
    pub fn take_diagnostics(&self) -> Diagnostics {
        let mut d = std::mem::take(&mut *self.diagnostics.lock().unwrap());
        d.normalize();
        d
    }

    pub fn artifact(&self, version_ref: &LibraryVersionRef) -> Result<Arc<Artifact>, String> {
        if let Some(hit) = self.artifacts.lock().unwrap().get(version_ref) {
            return hit.clone();
        }
        let result = self.load(version_ref).map(Arc::new);
        if let Err(e) = &result {
            self.note("artifact_unavailable", version_ref.to_string(), e.clone());
        }
        self.artifacts
            .lock()
            .unwrap()
            .insert(version_ref.clone(), result.clone());
        result
    }

    fn load(&self, version_ref: &LibraryVersionRef) -> Result<Artifact, String> {
        let handle = self.registry.fetch_artifact(version_ref).map_err(|e| e.to_string())?;
        let loaded = load_artifact(&handle).map_err(|e| e.to_string())?;
        let analysis = ArtifactAnalysis::from_classes(version_ref, &handle.checksum, &loaded);
        Ok(Artifact {
            analysis: Arc::new(analysis),
            classes: loaded.classes,
        })
    }

    pub fn releases(&self, library: &Library) -> Result<Arc<Vec<VersionRelease>>, String> {
        if let Some(hit) = self.releases.lock().unwrap().get(library) {
            return hit.clone();
        }
        let result = match self.registry.fetch_releases(library) {
            Ok(list) => {
                if list.stale {
                    self.note("stale_release_list", library.to_string(), "served from cache".into());
                }
                Ok(Arc::new(list.releases))
            }
            Err(e) => {
                self.note("no_release_list", library.to_string(), e.to_string());
                Err(e.to_string())
            }
        };
        self.releases.lock().unwrap().insert(library.clone(), result.clone());
        result
    }

    /// APIs and class hierarchy of every available version in `versions`.
    pub fn universe<'a>(&self, versions: impl IntoIterator<Item = &'a LibraryVersionRef>) -> ApiUniverse {
        let mut universe = ApiUniverse::new();
        let versions: BTreeSet<&LibraryVersionRef> = versions.into_iter().collect();
        for v in versions {
            if let Ok(a) = self.artifact(v) {
                universe.add_apis(&a.analysis.apis);
                universe.add_hierarchy(&a.classes);
            }
        }
        universe
    }
}

impl ArtifactSource for Store {
    fn analysis(&self, version_ref: &LibraryVersionRef) -> Result<Arc<ArtifactAnalysis>, RegistryError> {
        self.artifact(version_ref)
            .map(|a| a.analysis.clone())
            .map_err(|detail| RegistryError::NotFound(format!("{version_ref} ({detail})")))
    }
}
