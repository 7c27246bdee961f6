//! Release metadata and jar artifacts from package repositories.
//!
//! Three sources share one on-disk layout: a directory holding `index.json`
//! (mapping `"group:name"` to `[{version, release_date}]`) and
//! `jars/group__name__version.jar`. A [`FixtureRegistry`] reads such a
//! directory as-is. A [`RegistryClient`] keeps a [`Cache`] in the same layout
//! and fills it from Maven Central when network access is enabled.

mod transport;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Cursor, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::manifest::{Library, LibraryVersionRef};
use crate::version::{compare_raw, VersionString};

use transport::Limiter;
pub use transport::{DenyTransport, HttpResponse, HttpTransport, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionRelease {
    pub version_ref: LibraryVersionRef,
    /// UTC seconds.
    pub release_date: i64,
    /// Set when the registry listed several builds for this version and the
    /// latest timestamp was taken.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseList {
    pub library: Library,
    pub releases: Vec<VersionRelease>,
    /// Served from cache without a fresh upstream fetch.
    pub stale: bool,
    pub fetched_at: Option<i64>,
}

impl ReleaseList {
    pub fn release_date(&self, version: &str) -> Option<i64> {
        self.releases
            .iter()
            .find(|r| r.version_ref.version.as_str() == version)
            .map(|r| r.release_date)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHandle {
    pub version_ref: LibraryVersionRef,
    pub cache_path: PathBuf,
    /// Lowercase hex SHA-256 of the jar bytes.
    pub checksum: String,
}

impl ArtifactHandle {
    pub fn read(&self) -> io::Result<Vec<u8>> {
        fs::read(&self.cache_path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnavailableReason {
    SnapshotGone,
    Missing,
    /// Upstream could not be reached and nothing usable was cached.
    Network,
}

impl UnavailableReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UnavailableReason::SnapshotGone => "snapshot_gone",
            UnavailableReason::Missing => "missing",
            UnavailableReason::Network => "network",
        }
    }

    fn for_version(version: &VersionString) -> Self {
        if version.is_snapshot() {
            UnavailableReason::SnapshotGone
        } else {
            UnavailableReason::Missing
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{0} not found at registry")]
    NotFound(String),
    #[error("{subject} unavailable ({}){}", reason.as_str(), detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default())]
    Unavailable {
        subject: String,
        reason: UnavailableReason,
        detail: Option<String>,
    },
    #[error("{subject} is corrupt: {message}")]
    Corrupt { subject: String, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl RegistryError {
    pub fn unavailable_reason(&self) -> Option<UnavailableReason> {
        match self {
            RegistryError::Unavailable { reason, .. } => Some(*reason),
            _ => None,
        }
    }
}

/// Source of release lists and jars.
pub trait Registry: Send + Sync {
    fn fetch_releases(&self, library: &Library) -> Result<ReleaseList, RegistryError>;
    fn fetch_artifact(&self, version_ref: &LibraryVersionRef) -> Result<ArtifactHandle, RegistryError>;
}

impl<R: Registry + ?Sized> Registry for Arc<R> {
    fn fetch_releases(&self, library: &Library) -> Result<ReleaseList, RegistryError> {
        (**self).fetch_releases(library)
    }
    fn fetch_artifact(&self, version_ref: &LibraryVersionRef) -> Result<ArtifactHandle, RegistryError> {
        (**self).fetch_artifact(version_ref)
    }
}

// --- shared layout ---------------------------------------------------------

/// One entry of `index.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub version: String,
    pub release_date: i64,
}

pub type Index = BTreeMap<String, Vec<IndexEntry>>;

pub const INDEX_FILE: &str = "index.json";
pub const FETCHED_FILE: &str = "fetched.json";
pub const JARS_DIR: &str = "jars";

pub fn jar_file_name(version_ref: &LibraryVersionRef) -> String {
    format!(
        "{}__{}__{}.jar",
        version_ref.library.group, version_ref.library.name, version_ref.version
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Deduplicates by version (latest date wins, record flagged) and sorts
/// ascending. Entries without a usable version or date are dropped.
pub fn normalize_releases(library: &Library, entries: &[IndexEntry]) -> Vec<VersionRelease> {
    let mut by_version: Vec<VersionRelease> = Vec::new();
    let mut sorted: Vec<&IndexEntry> = entries
        .iter()
        .filter(|e| e.release_date > 0 && !e.version.trim().is_empty())
        .collect();
    sorted.sort_by(|a, b| compare_raw(&a.version, &b.version).then(a.release_date.cmp(&b.release_date)));
    for entry in sorted {
        match by_version.last_mut() {
            Some(last) if compare_raw(last.version_ref.version.as_str(), &entry.version).is_eq() => {
                last.release_date = last.release_date.max(entry.release_date);
                last.flagged = true;
            }
            _ => by_version.push(VersionRelease {
                version_ref: LibraryVersionRef::new(
                    library.clone(),
                    VersionString::new(entry.version.trim()).expect("filtered above"),
                ),
                release_date: entry.release_date,
                flagged: false,
            }),
        }
    }
    by_version
}

fn validate_jar(subject: &str, bytes: &[u8]) -> Result<(), RegistryError> {
    zip::ZipArchive::new(Cursor::new(bytes))
        .map(|_| ())
        .map_err(|e| RegistryError::Corrupt {
            subject: subject.to_string(),
            message: e.to_string(),
        })
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: &Path) -> Result<T, RegistryError> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| RegistryError::Corrupt {
            subject: path.display().to_string(),
            message: e.to_string(),
        }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(T::default()),
        Err(e) => Err(e.into()),
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir)?;
    tmp.1.write_all(bytes)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    fs::rename(&tmp.0, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp.0);
    })
}

fn tempfile_in(dir: &Path) -> io::Result<(PathBuf, fs::File)> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    loop {
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => return Ok((path, f)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
}

fn handle_for(path: PathBuf, version_ref: &LibraryVersionRef) -> Result<Option<ArtifactHandle>, RegistryError> {
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    validate_jar(&version_ref.to_string(), &bytes)?;
    Ok(Some(ArtifactHandle {
        version_ref: version_ref.clone(),
        cache_path: path,
        checksum: sha256_hex(&bytes),
    }))
}

// --- fixture ---------------------------------------------------------------

/// Read-only registry backed by a fixture directory.
#[derive(Debug)]
pub struct FixtureRegistry {
    root: PathBuf,
    index: OnceLock<Result<Index, String>>,
}

impl FixtureRegistry {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        FixtureRegistry {
            root: root.into(),
            index: OnceLock::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index(&self) -> Result<&Index, RegistryError> {
        let path = self.root.join(INDEX_FILE);
        self.index
            .get_or_init(|| read_json::<Index>(&path).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|message| RegistryError::Corrupt {
                subject: path.display().to_string(),
                message: message.clone(),
            })
    }
}

impl Registry for FixtureRegistry {
    fn fetch_releases(&self, library: &Library) -> Result<ReleaseList, RegistryError> {
        let entries = self
            .index()?
            .get(&library.to_string())
            .ok_or_else(|| RegistryError::NotFound(library.to_string()))?;
        Ok(ReleaseList {
            library: library.clone(),
            releases: normalize_releases(library, entries),
            stale: false,
            fetched_at: None,
        })
    }

    fn fetch_artifact(&self, version_ref: &LibraryVersionRef) -> Result<ArtifactHandle, RegistryError> {
        let path = self.root.join(JARS_DIR).join(jar_file_name(version_ref));
        handle_for(path, version_ref)?.ok_or_else(|| RegistryError::Unavailable {
            subject: version_ref.to_string(),
            reason: UnavailableReason::for_version(&version_ref.version),
            detail: None,
        })
    }
}

// --- cache -----------------------------------------------------------------

/// On-disk cache in the fixture layout plus a `fetched.json` sidecar that
/// records when each release list was fetched.
#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache {
            root: root.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn releases(&self, library: &Library) -> Result<Option<(Vec<VersionRelease>, Option<i64>)>, RegistryError> {
        let index: Index = read_json(&self.root.join(INDEX_FILE))?;
        let Some(entries) = index.get(&library.to_string()) else {
            return Ok(None);
        };
        let fetched: BTreeMap<String, i64> = read_json(&self.root.join(FETCHED_FILE))?;
        Ok(Some((
            normalize_releases(library, entries),
            fetched.get(&library.to_string()).copied(),
        )))
    }

    pub fn store_releases(
        &self,
        library: &Library,
        releases: &[VersionRelease],
        fetched_at: i64,
    ) -> Result<(), RegistryError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let key = library.to_string();
        let mut index: Index = read_json(&self.root.join(INDEX_FILE))?;
        index.insert(
            key.clone(),
            releases
                .iter()
                .map(|r| IndexEntry {
                    version: r.version_ref.version.to_string(),
                    release_date: r.release_date,
                })
                .collect(),
        );
        let mut fetched: BTreeMap<String, i64> = read_json(&self.root.join(FETCHED_FILE))?;
        fetched.insert(key, fetched_at);
        write_atomic(
            &self.root.join(INDEX_FILE),
            &serde_json::to_vec_pretty(&index).expect("serializable"),
        )?;
        write_atomic(
            &self.root.join(FETCHED_FILE),
            &serde_json::to_vec_pretty(&fetched).expect("serializable"),
        )?;
        Ok(())
    }

    pub fn jar_path(&self, version_ref: &LibraryVersionRef) -> PathBuf {
        self.root.join(JARS_DIR).join(jar_file_name(version_ref))
    }

    pub fn artifact(&self, version_ref: &LibraryVersionRef) -> Result<Option<ArtifactHandle>, RegistryError> {
        handle_for(self.jar_path(version_ref), version_ref)
    }

    pub fn store_artifact(
        &self,
        version_ref: &LibraryVersionRef,
        bytes: &[u8],
    ) -> Result<ArtifactHandle, RegistryError> {
        validate_jar(&version_ref.to_string(), bytes)?;
        let path = self.jar_path(version_ref);
        write_atomic(&path, bytes)?;
        Ok(ArtifactHandle {
            version_ref: version_ref.clone(),
            cache_path: path,
            checksum: sha256_hex(bytes),
        })
    }
}

// --- Maven Central ---------------------------------------------------------

#[derive(Debug, Clone)]
pub struct UpstreamConfig {
    pub search_url: String,
    pub repository_url: String,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub page_size: usize,
}

impl Default for UpstreamConfig {
    fn default() -> Self {
        UpstreamConfig {
            search_url: "https://search.maven.org/solrsearch/select".into(),
            repository_url: "https://repo1.maven.org/maven2".into(),
            max_in_flight: 4,
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            page_size: 200,
        }
    }
}

/// Maven Central client: the search API for release lists (artifact
/// timestamps as release dates) and the repository for jars.
pub struct MavenCentral {
    transport: Arc<dyn Transport>,
    config: UpstreamConfig,
    limiter: Limiter,
}

enum Fetch {
    Ok(Vec<u8>),
    NotFound,
    Failed(String),
}

#[derive(Deserialize)]
struct SearchResponse {
    response: SearchBody,
}

#[derive(Deserialize)]
struct SearchBody {
    #[serde(rename = "numFound")]
    num_found: usize,
    docs: Vec<SearchDoc>,
}

#[derive(Deserialize)]
struct SearchDoc {
    v: String,
    timestamp: i64,
}

fn coordinate_is_safe(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_' | '+'))
}

impl MavenCentral {
    pub fn new(transport: Arc<dyn Transport>, config: UpstreamConfig) -> Self {
        let limiter = Limiter::new(config.max_in_flight);
        MavenCentral {
            transport,
            config,
            limiter,
        }
    }

    fn get(&self, url: &str) -> Fetch {
        let mut delay = self.config.initial_backoff;
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            let result = {
                let _permit = self.limiter.acquire();
                self.transport.get(url)
            };
            match result {
                Ok(r) if (200..300).contains(&r.status) => return Fetch::Ok(r.body),
                Ok(r) if r.status == 404 || r.status == 410 => return Fetch::NotFound,
                Ok(r) if r.status == 429 || r.status >= 500 => last = format!("HTTP {}", r.status),
                Ok(r) => return Fetch::Failed(format!("HTTP {}", r.status)),
                Err(e) => last = e.0,
            }
            log::debug!("retrying {url}: {last}");
        }
        Fetch::Failed(last)
    }

    pub fn releases(&self, library: &Library) -> Result<Vec<VersionRelease>, RegistryError> {
        if !coordinate_is_safe(&library.group) || !coordinate_is_safe(&library.name) {
            return Err(RegistryError::NotFound(library.to_string()));
        }
        let mut entries = Vec::new();
        let mut start = 0;
        loop {
            let url = format!(
                "{}?q=g:%22{}%22+AND+a:%22{}%22&core=gav&rows={}&start={}&wt=json",
                self.config.search_url, library.group, library.name, self.config.page_size, start
            );
            let body = match self.get(&url) {
                Fetch::Ok(b) => b,
                Fetch::NotFound => return Err(RegistryError::NotFound(library.to_string())),
                Fetch::Failed(detail) => {
                    return Err(RegistryError::Unavailable {
                        subject: library.to_string(),
                        reason: UnavailableReason::Network,
                        detail: Some(detail),
                    })
                }
            };
            let parsed: SearchResponse = serde_json::from_slice(&body).map_err(|e| RegistryError::Corrupt {
                subject: library.to_string(),
                message: format!("search response: {e}"),
            })?;
            let page = parsed.response.docs.len();
            entries.extend(parsed.response.docs.into_iter().map(|d| IndexEntry {
                version: d.v,
                release_date: d.timestamp.div_euclid(1000),
            }));
            start += page;
            if page == 0 || start >= parsed.response.num_found {
                break;
            }
        }
        if entries.is_empty() {
            return Err(RegistryError::NotFound(library.to_string()));
        }
        Ok(normalize_releases(library, &entries))
    }

    pub fn jar(&self, version_ref: &LibraryVersionRef) -> Result<Vec<u8>, RegistryError> {
        let lib = &version_ref.library;
        let version = version_ref.version.as_str();
        if !coordinate_is_safe(&lib.group) || !coordinate_is_safe(&lib.name) || !coordinate_is_safe(version) {
            return Err(RegistryError::Unavailable {
                subject: version_ref.to_string(),
                reason: UnavailableReason::for_version(&version_ref.version),
                detail: Some("unsupported characters in coordinate".into()),
            });
        }
        let url = format!(
            "{}/{}/{}/{}/{}-{}.jar",
            self.config.repository_url,
            lib.group.replace('.', "/"),
            lib.name,
            version,
            lib.name,
            version
        );
        match self.get(&url) {
            Fetch::Ok(b) => Ok(b),
            Fetch::NotFound => Err(RegistryError::Unavailable {
                subject: version_ref.to_string(),
                reason: UnavailableReason::for_version(&version_ref.version),
                detail: None,
            }),
            Fetch::Failed(detail) => Err(RegistryError::Unavailable {
                subject: version_ref.to_string(),
                reason: UnavailableReason::Network,
                detail: Some(detail),
            }),
        }
    }
}

// --- client ----------------------------------------------------------------

/// Cache-backed registry, optionally refreshing from upstream.
pub struct RegistryClient {
    cache: Cache,
    upstream: Option<MavenCentral>,
}

impl RegistryClient {
    /// Serves only what is already cached.
    pub fn offline(cache: Cache) -> Self {
        RegistryClient { cache, upstream: None }
    }

    pub fn online(cache: Cache, upstream: MavenCentral) -> Self {
        RegistryClient {
            cache,
            upstream: Some(upstream),
        }
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }
}

fn now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

impl Registry for RegistryClient {
    fn fetch_releases(&self, library: &Library) -> Result<ReleaseList, RegistryError> {
        let mut failure = None;
        if let Some(upstream) = &self.upstream {
            match upstream.releases(library) {
                Ok(releases) => {
                    let fetched_at = now();
                    self.cache.store_releases(library, &releases, fetched_at)?;
                    return Ok(ReleaseList {
                        library: library.clone(),
                        releases,
                        stale: false,
                        fetched_at: Some(fetched_at),
                    });
                }
                Err(e @ RegistryError::Unavailable { .. }) => failure = Some(e),
                Err(e) => return Err(e),
            }
        }
        match self.cache.releases(library)? {
            Some((releases, fetched_at)) => Ok(ReleaseList {
                library: library.clone(),
                releases,
                stale: true,
                fetched_at,
            }),
            None => Err(failure.unwrap_or_else(|| RegistryError::Unavailable {
                subject: library.to_string(),
                reason: UnavailableReason::Network,
                detail: Some("not cached and network access is disabled".into()),
            })),
        }
    }

    fn fetch_artifact(&self, version_ref: &LibraryVersionRef) -> Result<ArtifactHandle, RegistryError> {
        if let Some(handle) = self.cache.artifact(version_ref)? {
            return Ok(handle);
        }
        match &self.upstream {
            Some(upstream) => {
                let bytes = upstream.jar(version_ref)?;
                self.cache.store_artifact(version_ref, &bytes)
            }
            None => Err(RegistryError::Unavailable {
                subject: version_ref.to_string(),
                reason: UnavailableReason::for_version(&version_ref.version),
                detail: Some("not cached and network access is disabled".into()),
            }),
        }
    }
}

/// Writes `index.json` and jars in the shared layout.
pub fn write_fixture(root: &Path, index: &Index, jars: &[(LibraryVersionRef, Vec<u8>)]) -> io::Result<()> {
    fs::create_dir_all(root.join(JARS_DIR))?;
    write_atomic(
        &root.join(INDEX_FILE),
        &serde_json::to_vec_pretty(index).expect("serializable"),
    )?;
    for (vref, bytes) in jars {
        write_atomic(&root.join(JARS_DIR).join(jar_file_name(vref)), bytes)?;
    }
    Ok(())
}
