//! Bug-driven alerts: risk analysis, effort analysis for candidate upgrades,
//! and whether a version update changes anything a project calls.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bugdb::BugDb;
use crate::bytecode::{analyze_artifact, diff_apis, ApiCall, ApiElement, ArtifactAnalysis, BytecodeError, MemberRef};
use crate::history::VersionUpdate;
use crate::manifest::{LibraryVersionRef, SourceSet};
use crate::registry::{Registry, RegistryError, VersionRelease};
use crate::version::{compare_raw, VersionString};

#[derive(Debug, thiserror::Error)]
pub enum AlertError {
    #[error("cannot assess {subject}: {reason}")]
    RiskUnavailable { subject: String, reason: String },
    #[error("no higher release of {0}")]
    EmptyCandidateSet(String),
    #[error("indeterminate: {0}")]
    Indeterminate(String),
    #[error(transparent)]
    Bytecode(#[from] BytecodeError),
}

/// Analyzed library versions, by reference.
pub trait ArtifactSource: Send + Sync {
    fn analysis(&self, version_ref: &LibraryVersionRef) -> Result<Arc<ArtifactAnalysis>, RegistryError>;
}

/// Analyzes artifacts fetched from a registry, once per version.
pub struct RegistryArtifacts<R> {
    registry: R,
    memo: Mutex<HashMap<LibraryVersionRef, Arc<ArtifactAnalysis>>>,
}

impl<R: Registry> RegistryArtifacts<R> {
    pub fn new(registry: R) -> Self {
        RegistryArtifacts {
            registry,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn registry(&self) -> &R {
        &self.registry
    }
}

impl<R: Registry> ArtifactSource for RegistryArtifacts<R> {
    fn analysis(&self, version_ref: &LibraryVersionRef) -> Result<Arc<ArtifactAnalysis>, RegistryError> {
        if let Some(a) = self.memo.lock().unwrap().get(version_ref) {
            return Ok(a.clone());
        }
        let handle = self.registry.fetch_artifact(version_ref)?;
        let analysis = analyze_artifact(&handle).map_err(|e| RegistryError::Corrupt {
            subject: version_ref.to_string(),
            message: e.to_string(),
        })?;
        let a = Arc::new(analysis);
        self.memo.lock().unwrap().insert(version_ref.clone(), a.clone());
        Ok(a)
    }
}

/// In-memory source for already analyzed versions.
impl ArtifactSource for BTreeMap<LibraryVersionRef, Arc<ArtifactAnalysis>> {
    fn analysis(&self, version_ref: &LibraryVersionRef) -> Result<Arc<ArtifactAnalysis>, RegistryError> {
        self.get(version_ref)
            .cloned()
            .ok_or_else(|| RegistryError::NotFound(version_ref.to_string()))
    }
}

/// A value with its total, rendered `value(total)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Count {
    pub value: u64,
    pub total: u64,
}

impl Count {
    pub fn new(value: u64, total: u64) -> Self {
        Count { value, total }
    }
}

impl std::ops::Add for Count {
    type Output = Count;
    fn add(self, o: Count) -> Count {
        Count::new(self.value + o.value, self.total + o.total)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.value, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiRisk {
    pub api: ApiElement,
    pub bugs: BTreeSet<String>,
    pub sites: u64,
    pub main_sites: u64,
    pub test_sites: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskReport {
    pub project_id: String,
    pub library_version: LibraryVersionRef,
    pub nb: Count,
    pub na: Count,
    /// Call instructions to buggy APIs, over all call instructions to the version.
    pub nc: Count,
    /// The same restricted to non-test code.
    pub nc_main: Count,
    pub per_api: Vec<ApiRisk>,
    pub safe: bool,
}

#[derive(Default)]
struct SiteCount {
    all: u64,
    main: u64,
    test: u64,
}

fn called_sites<'a>(calls: &'a [ApiCall], version_ref: &LibraryVersionRef) -> BTreeMap<&'a ApiElement, SiteCount> {
    let mut out: BTreeMap<&ApiElement, SiteCount> = BTreeMap::new();
    for c in calls.iter().filter(|c| &c.callee.version_ref == version_ref) {
        let s = out.entry(&c.callee).or_default();
        let n = u64::from(c.site_count);
        s.all += n;
        match c.caller.source_set {
            SourceSet::Test => s.test += n,
            _ => s.main += n,
        }
    }
    out
}

/// Bugs whose buggy methods are reachable from `api` in the version's graph.
fn reached_bugs(
    api: &MemberRef,
    analysis: &ArtifactAnalysis,
    buggy: &BTreeMap<MemberRef, BTreeSet<String>>,
) -> BTreeSet<String> {
    if buggy.is_empty() {
        return BTreeSet::new();
    }
    let reach = if analysis.graph.nodes.contains(api) {
        analysis.graph.reachable_by_call(api)
    } else {
        [api.clone()].into()
    };
    reach.iter().filter_map(|m| buggy.get(m)).flatten().cloned().collect()
}

fn unavailable(version_ref: &LibraryVersionRef, e: RegistryError) -> AlertError {
    AlertError::RiskUnavailable {
        subject: version_ref.to_string(),
        reason: e.to_string(),
    }
}

/// Decides whether the project's calls into `version_ref` reach methods of
/// bugs affecting that version.
pub fn risk_analysis(
    project_id: &str,
    calls: &[ApiCall],
    version_ref: &LibraryVersionRef,
    db: &BugDb,
    artifacts: &dyn ArtifactSource,
) -> Result<RiskReport, AlertError> {
    let analysis = artifacts
        .analysis(version_ref)
        .map_err(|e| unavailable(version_ref, e))?;
    let buggy = db.buggy_methods(version_ref);
    let total_bugs = db.bugs_affecting(version_ref).count() as u64;
    let sites = called_sites(calls, version_ref);

    let mut bugs = BTreeSet::new();
    let mut per_api = Vec::new();
    let (mut total_sites, mut total_main) = (0, 0);
    for (api, s) in &sites {
        total_sites += s.all;
        total_main += s.main;
        let reached = reached_bugs(&api.member(), &analysis, &buggy);
        if reached.is_empty() {
            continue;
        }
        bugs.extend(reached.iter().cloned());
        per_api.push(ApiRisk {
            api: (*api).clone(),
            bugs: reached,
            sites: s.all,
            main_sites: s.main,
            test_sites: s.test,
        });
    }
    per_api.sort_by(|a, b| {
        b.sites
            .cmp(&a.sites)
            .then_with(|| a.api.to_string().cmp(&b.api.to_string()))
    });
    let buggy_sites = per_api.iter().map(|a| a.sites).sum();
    let buggy_main = per_api.iter().map(|a| a.main_sites).sum();
    Ok(RiskReport {
        project_id: project_id.to_string(),
        library_version: version_ref.clone(),
        nb: Count::new(bugs.len() as u64, total_bugs),
        na: Count::new(per_api.len() as u64, sites.len() as u64),
        nc: Count::new(buggy_sites, total_sites),
        nc_main: Count::new(buggy_main, total_main),
        safe: bugs.is_empty(),
        per_api,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    StillBuggy,
    ArtifactUnavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Effort {
    pub nad: u64,
    pub nac: u64,
    pub ncd: u64,
    pub ncc: u64,
}

impl Effort {
    fn key(&self) -> (u64, u64) {
        (self.ncd + self.ncc, self.nad + self.nac)
    }
}

impl std::ops::Add for Effort {
    type Output = Effort;
    fn add(self, o: Effort) -> Effort {
        Effort {
            nad: self.nad + o.nad,
            nac: self.nac + o.nac,
            ncd: self.ncd + o.ncd,
            ncc: self.ncc + o.ncc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Accepted(Effort),
    Skipped { reason: SkipReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffortReport {
    pub candidate_version: VersionString,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl EffortReport {
    pub fn effort(&self) -> Option<&Effort> {
        match &self.outcome {
            Outcome::Accepted(e) => Some(e),
            Outcome::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffortAnalysis {
    pub project_id: String,
    pub current: LibraryVersionRef,
    /// Number of accepted candidates.
    pub sl: u64,
    pub candidates: Vec<EffortReport>,
    /// Accepted candidate needing the least work: fewest affected call
    /// sites, then fewest affected APIs, then the lowest version.
    pub suggested: Option<VersionString>,
}

impl EffortAnalysis {
    pub fn suggested_effort(&self) -> Option<&Effort> {
        let v = self.suggested.as_ref()?;
        self.candidates.iter().find(|c| &c.candidate_version == v)?.effort()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EffortOptions {
    pub include_snapshots: bool,
}

/// Walks higher releases of the current version, skipping those whose
/// surviving called APIs still reach a bug, and measures the API change
/// each remaining candidate implies relative to the current version.
pub fn effort_analysis(
    project_id: &str,
    calls: &[ApiCall],
    current: &LibraryVersionRef,
    db: &BugDb,
    releases: &[VersionRelease],
    artifacts: &dyn ArtifactSource,
    options: EffortOptions,
) -> Result<EffortAnalysis, AlertError> {
    let mut candidates: Vec<&VersionString> = releases
        .iter()
        .filter(|r| r.version_ref.library == current.library)
        .map(|r| &r.version_ref.version)
        .filter(|v| compare_raw(v.as_str(), current.version.as_str()).is_gt())
        .filter(|v| options.include_snapshots || !v.is_snapshot())
        .collect();
    candidates.sort_by(|a, b| compare_raw(a.as_str(), b.as_str()));
    candidates.dedup_by(|a, b| compare_raw(a.as_str(), b.as_str()).is_eq());
    if candidates.is_empty() {
        return Err(AlertError::EmptyCandidateSet(current.to_string()));
    }
    let base = artifacts.analysis(current).map_err(|e| unavailable(current, e))?;
    let sites = called_sites(calls, current);
    let called: BTreeSet<ApiElement> = sites.keys().map(|a| (*a).clone()).collect();

    let reports: Vec<Result<EffortReport, AlertError>> = candidates
        .par_iter()
        .map(|v| {
            let vref = LibraryVersionRef::new(current.library.clone(), (*v).clone());
            let skipped = |reason| EffortReport {
                candidate_version: (*v).clone(),
                outcome: Outcome::Skipped { reason },
            };
            let Ok(next) = artifacts.analysis(&vref) else {
                return Ok(skipped(SkipReason::ArtifactUnavailable));
            };
            let diff = diff_apis(&base, &next, &called)?;
            let buggy = db.buggy_methods(&vref);
            let still_buggy = diff
                .changed
                .iter()
                .chain(&diff.unchanged)
                .any(|api| !reached_bugs(&api.member(), &next, &buggy).is_empty());
            if still_buggy {
                return Ok(skipped(SkipReason::StillBuggy));
            }
            let site_sum = |set: &BTreeSet<ApiElement>| set.iter().map(|a| sites[a].all).sum();
            Ok(EffortReport {
                candidate_version: (*v).clone(),
                outcome: Outcome::Accepted(Effort {
                    nad: diff.deleted.len() as u64,
                    nac: diff.changed.len() as u64,
                    ncd: site_sum(&diff.deleted),
                    ncc: site_sum(&diff.changed),
                }),
            })
        })
        .collect();
    let candidates = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let suggested = candidates
        .iter()
        .filter_map(|c| c.effort().map(|e| (e.key(), c)))
        .min_by_key(|(k, _)| *k)
        .map(|(_, c)| c.candidate_version.clone());
    Ok(EffortAnalysis {
        project_id: project_id.to_string(),
        current: current.clone(),
        sl: candidates.iter().filter(|c| c.effort().is_some()).count() as u64,
        candidates,
        suggested,
    })
}

/// Whether an update changes any API the project called before it: an
/// API deleted in the new version, or one whose closure digest differs.
pub fn update_matters(
    update: &VersionUpdate,
    calls: &[ApiCall],
    artifacts: &dyn ArtifactSource,
) -> Result<bool, AlertError> {
    let from = LibraryVersionRef::new(update.library.clone(), update.ver_from.clone());
    let to = LibraryVersionRef::new(update.library.clone(), update.ver_to.clone());
    let old = artifacts
        .analysis(&from)
        .map_err(|e| AlertError::Indeterminate(format!("{from}: {e}")))?;
    let new = artifacts
        .analysis(&to)
        .map_err(|e| AlertError::Indeterminate(format!("{to}: {e}")))?;
    let called: BTreeSet<ApiElement> = calls
        .iter()
        .filter(|c| c.callee.version_ref == from)
        .map(|c| c.callee.clone())
        .collect();
    let diff = diff_apis(&old, &new, &called)?;
    Ok(!diff.deleted.is_empty() || !diff.changed.is_empty())
}

/// One project's line of the alert table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub p: String,
    /// Used library versions reported unsafe.
    pub bl: u64,
    pub nb: Count,
    pub na: Count,
    pub nc: Count,
    pub sl: u64,
    pub nad: u64,
    pub nac: u64,
    pub ncd: u64,
    pub ncc: u64,
}

/// Sums the unsafe risk reports of a project and the suggested candidates
/// of their effort analyses.
pub fn table_row(project_id: &str, risks: &[RiskReport], efforts: &[EffortAnalysis]) -> TableRow {
    let unsafe_reports: Vec<&RiskReport> = risks.iter().filter(|r| !r.safe).collect();
    let sum = |f: fn(&RiskReport) -> Count| unsafe_reports.iter().map(|r| f(r)).fold(Count::default(), |a, b| a + b);
    let effort = efforts
        .iter()
        .filter_map(|e| e.suggested_effort().copied())
        .fold(Effort::default(), |a, b| a + b);
    TableRow {
        p: project_id.to_string(),
        bl: unsafe_reports.len() as u64,
        nb: sum(|r| r.nb),
        na: sum(|r| r.na),
        nc: sum(|r| r.nc),
        sl: efforts.iter().map(|e| e.sl).sum(),
        nad: effort.nad,
        nac: effort.nac,
        ncd: effort.ncd,
        ncc: effort.ncc,
    }
}

const HEADERS: [&str; 10] = ["P", "BL", "NB", "NA", "NC", "SL", "NAD", "NAC", "NCD", "NCC"];

/// Plain-text table with one line per row.
pub fn render_table(rows: &[TableRow]) -> String {
    let cells: Vec<[String; 10]> = rows
        .iter()
        .map(|r| {
            [
                r.p.clone(),
                r.bl.to_string(),
                r.nb.to_string(),
                r.na.to_string(),
                r.nc.to_string(),
                r.sl.to_string(),
                r.nad.to_string(),
                r.nac.to_string(),
                r.ncd.to_string(),
                r.ncc.to_string(),
            ]
        })
        .collect();
    let mut widths = HEADERS.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |row: &[String]| {
        let padded: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&HEADERS.map(String::from));
    for row in &cells {
        out.push_str(&line(row));
    }
    out
}

/// Text rendering of one risk report.
pub fn render_risk(r: &RiskReport) -> String {
    let mut out = format!(
        "{} uses {}: {}\n  NB {}  NA {}  NC {}  (main-only NC {})\n",
        r.project_id,
        r.library_version,
        if r.safe { "safe" } else { "UNSAFE" },
        r.nb,
        r.na,
        r.nc,
        r.nc_main
    );
    for a in &r.per_api {
        out.push_str(&format!(
            "  {} sites={} main={} test={} bugs={}\n",
            a.api,
            a.sites,
            a.main_sites,
            a.test_sites,
            a.bugs.iter().cloned().collect::<Vec<_>>().join(",")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_display() {
        assert_eq!(Count::new(1, 18).to_string(), "1(18)");
    }

    #[test]
    fn table_text() {
        let row = TableRow {
            p: "3".into(),
            bl: 1,
            nb: Count::new(1, 18),
            na: Count::new(1, 21),
            nc: Count::new(7, 181),
            sl: 15,
            nad: 0,
            nac: 15,
            ncd: 0,
            ncc: 144,
        };
        let text = render_table(&[row]);
        let last = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = last.split_whitespace().collect();
        assert_eq!(
            fields,
            ["3", "1", "1(18)", "1(21)", "7(181)", "15", "0", "15", "0", "144"]
        );
    }

    #[test]
    fn outcome_json() {
        let r = EffortReport {
            candidate_version: VersionString::new("2.0").unwrap(),
            outcome: Outcome::Skipped {
                reason: SkipReason::StillBuggy,
            },
        };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"candidate_version":"2.0","status":"skipped","reason":"still_buggy"}"#
        );
        assert_eq!(serde_json::from_str::<EffortReport>(&json).unwrap(), r);
    }
}
