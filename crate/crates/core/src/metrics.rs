//! Usage intensity, outdatedness, update intensity and update delay, with
//! multiple-version and snapshot statistics and binned distributions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bytecode::{ApiCall, ProjectMethod};
use crate::diag::Diagnostics;
use crate::history::VersionUpdate;
use crate::manifest::{Library, LibraryDependency, LibraryVersionRef, SourceSet};
use crate::registry::VersionRelease;
use crate::version::compare_raw;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Arithmetic mean over defined terms, with the number of terms left out.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mean {
    pub value: Option<f64>,
    pub terms: usize,
    pub excluded: usize,
}

impl Mean {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Mean {
        let mut sum = 0.0;
        let mut terms = 0;
        let mut excluded = 0;
        for v in values {
            match v {
                Some(v) => {
                    sum += v;
                    terms += 1;
                }
                None => excluded += 1,
            }
        }
        Mean {
            value: (terms > 0).then(|| sum / terms as f64),
            terms,
            excluded,
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

// --- usage intensity -----------------------------------------------------------

/// Distinct libraries per project and distinct projects per library.
pub fn usage_intensity_lib(deps: &[LibraryDependency]) -> (BTreeMap<String, usize>, BTreeMap<Library, usize>) {
    let mut per_project: BTreeMap<String, BTreeSet<&Library>> = BTreeMap::new();
    let mut per_library: BTreeMap<Library, BTreeSet<&str>> = BTreeMap::new();
    for d in deps {
        per_project
            .entry(d.project_id.clone())
            .or_default()
            .insert(&d.version_ref.library);
        per_library
            .entry(d.version_ref.library.clone())
            .or_default()
            .insert(&d.project_id);
    }
    (
        per_project.into_iter().map(|(p, s)| (p, s.len())).collect(),
        per_library.into_iter().map(|(l, s)| (l, s.len())).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProjectMethodUsage {
    /// Main methods calling an API over all main methods.
    pub main: Option<f64>,
    /// The same over main and test methods together.
    pub all: Option<f64>,
    pub methods: usize,
    pub calling_methods: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MethodUsage {
    pub per_project: BTreeMap<String, ProjectMethodUsage>,
    pub per_library: BTreeMap<Library, Option<f64>>,
    pub per_version: BTreeMap<LibraryVersionRef, Option<f64>>,
    pub diagnostics: Diagnostics,
}

/// Share of project methods calling library APIs, and for each library the
/// largest share of a used version's APIs that projects call.
/// `api_counts` lists every used version with its number of APIs.
pub fn usage_intensity_method(
    calls: &[ApiCall],
    methods: &BTreeSet<ProjectMethod>,
    api_counts: &BTreeMap<LibraryVersionRef, usize>,
) -> MethodUsage {
    let mut out = MethodUsage::default();
    let mut by_project: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for m in methods {
        let e = by_project.entry(&m.project_id).or_default();
        e.1 += 1;
        if m.source_set != SourceSet::Test {
            e.0 += 1;
        }
    }
    let callers: HashSet<&ProjectMethod> = calls
        .iter()
        .map(|c| &c.caller)
        .filter(|m| methods.contains(*m))
        .collect();
    let mut calling: HashMap<&str, (usize, usize)> = HashMap::new();
    for m in &callers {
        let e = calling.entry(&m.project_id).or_default();
        e.1 += 1;
        if m.source_set != SourceSet::Test {
            e.0 += 1;
        }
    }
    for (project, (main, all)) in by_project {
        let (cmain, call) = calling.get(project).copied().unwrap_or_default();
        if main == 0 {
            out.diagnostics
                .push("no_project_methods", project, "no main methods; usi2 undefined");
        }
        out.per_project.insert(
            project.to_string(),
            ProjectMethodUsage {
                main: ratio(cmain, main),
                all: ratio(call, all),
                methods: all,
                calling_methods: call,
            },
        );
    }

    let mut called: BTreeMap<&LibraryVersionRef, BTreeSet<_>> = BTreeMap::new();
    for c in calls {
        called
            .entry(&c.callee.version_ref)
            .or_default()
            .insert(c.callee.member());
    }
    for (v, &n) in api_counts {
        let k = called.get(v).map_or(0, BTreeSet::len);
        let share = ratio(k.min(n), n);
        out.per_version.insert(v.clone(), share);
        let slot = out.per_library.entry(v.library.clone()).or_insert(None);
        if let Some(s) = share {
            *slot = Some(slot.map_or(s, |cur: f64| cur.max(s)));
        }
    }
    for (lib, v) in &out.per_library {
        if v.is_none() {
            out.diagnostics.push(
                "no_library_apis",
                lib.to_string(),
                "no extractable APIs; usi2 undefined",
            );
        }
    }
    out
}

// --- outdatedness ----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outdatedness {
    pub value: u64,
    /// The dependency's own version is not in the release list.
    pub unknown_version: bool,
}

/// Releases of the dependency's library with a higher version that were
/// published before `crawl_date`.
pub fn usage_outdatedness(dep: &LibraryDependency, releases: &[VersionRelease], crawl_date: i64) -> Outdatedness {
    let own = dep.version_ref.version.as_str();
    let mut value = 0;
    let mut known = false;
    for r in releases {
        let v = r.version_ref.version.as_str();
        let ord = compare_raw(v, own);
        if ord.is_eq() {
            known = true;
        }
        if ord.is_gt() && r.release_date < crawl_date {
            value += 1;
        }
    }
    Outdatedness {
        value,
        unknown_version: !known,
    }
}

// --- multiple versions and snapshots ----------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MultiVersion {
    pub library_count: usize,
    pub cases: Vec<(Library, usize)>,
}

pub fn multiple_version_stats(deps: &[LibraryDependency]) -> BTreeMap<String, MultiVersion> {
    let mut versions: BTreeMap<&str, BTreeMap<&Library, BTreeSet<&str>>> = BTreeMap::new();
    for d in deps {
        versions
            .entry(&d.project_id)
            .or_default()
            .entry(&d.version_ref.library)
            .or_default()
            .insert(d.version_ref.version.as_str());
    }
    versions
        .into_iter()
        .map(|(p, libs)| {
            let cases: Vec<(Library, usize)> = libs
                .into_iter()
                .filter(|(_, v)| v.len() > 1)
                .map(|(l, v)| (l.clone(), v.len()))
                .collect();
            (
                p.to_string(),
                MultiVersion {
                    library_count: cases.len(),
                    cases,
                },
            )
        })
        .collect()
}

/// Distinct snapshot library versions per project.
pub fn snapshot_stats(deps: &[LibraryDependency]) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<&str, BTreeSet<&LibraryVersionRef>> = BTreeMap::new();
    for d in deps {
        let e = out.entry(&d.project_id).or_default();
        if d.version_ref.version.is_snapshot() {
            e.insert(&d.version_ref);
        }
    }
    out.into_iter().map(|(p, s)| (p.to_string(), s.len())).collect()
}

// --- update intensity and delay ------------------------------------------------

/// Share of a project's current (file, library) dependencies that were ever
/// updated in that file, and share of a library's current projects that
/// ever updated it.
pub fn update_intensity(
    current: &[LibraryDependency],
    updates: &[VersionUpdate],
) -> (BTreeMap<String, Option<f64>>, BTreeMap<Library, Option<f64>>) {
    let updated_in_file: HashSet<(&str, &str, &Library)> = updates
        .iter()
        .map(|u| (u.project_id.as_str(), u.config_file.as_str(), &u.library))
        .collect();
    let updated_in_project: HashSet<(&str, &Library)> =
        updates.iter().map(|u| (u.project_id.as_str(), &u.library)).collect();

    let mut file_deps: BTreeMap<&str, BTreeSet<(&str, &Library)>> = BTreeMap::new();
    let mut lib_projects: BTreeMap<&Library, BTreeSet<&str>> = BTreeMap::new();
    for d in current {
        file_deps
            .entry(&d.project_id)
            .or_default()
            .insert((&d.config_file, &d.version_ref.library));
        lib_projects
            .entry(&d.version_ref.library)
            .or_default()
            .insert(&d.project_id);
    }
    let per_project = file_deps
        .into_iter()
        .map(|(p, deps)| {
            let hit = deps
                .iter()
                .filter(|(f, l)| updated_in_file.contains(&(p, *f, *l)))
                .count();
            (p.to_string(), ratio(hit, deps.len()))
        })
        .collect();
    let per_library = lib_projects
        .into_iter()
        .map(|(l, ps)| {
            let hit = ps.iter().filter(|p| updated_in_project.contains(&(**p, l))).count();
            (l.clone(), ratio(hit, ps.len()))
        })
        .collect();
    (per_project, per_library)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DelayError {
    #[error("release date of {0} is unresolvable")]
    Unresolvable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delay {
    pub days: f64,
    /// The commit predates the recorded release.
    pub negative: bool,
}

/// Days between the update's commit and the release of its target version.
pub fn update_delay(update: &VersionUpdate, releases: &[VersionRelease]) -> Result<Delay, DelayError> {
    let target = update.ver_to.as_str();
    let release = releases
        .iter()
        .find(|r| r.version_ref.library == update.library && r.version_ref.version.as_str() == target)
        .ok_or_else(|| DelayError::Unresolvable(format!("{}:{}", update.library, target)))?;
    let days = (update.commit.date - release.release_date) as f64 / SECONDS_PER_DAY;
    Ok(Delay {
        days,
        negative: days < 0.0,
    })
}

// --- distributions -----------------------------------------------------------

/// Bin upper edges. `n` edges make `n + 1` bins: `(-inf, e0]`, `(e0, e1]`,
/// ..., `(e_{n-1}, +inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub edges: Vec<f64>,
}

impl Binning {
    pub fn new(mut edges: Vec<f64>) -> Self {
        edges.retain(|e| e.is_finite());
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        Binning { edges }
    }

    pub fn bin_of(&self, v: f64) -> usize {
        self.edges.partition_point(|&e| e < v)
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        let mut lower: Option<f64> = None;
        for e in &self.edges {
            out.push(match lower {
                None => format!("<={e}"),
                Some(l) => format!("({l},{e}]"),
            });
            lower = Some(*e);
        }
        out.push(match lower {
            None => "all".to_string(),
            Some(l) => format!(">{l}"),
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub metric: String,
    pub edges: Vec<f64>,
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    /// Median of the annotation values per bin, when annotations were given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Vec<Option<f64>>>,
    pub population: u64,
    /// Undefined values left out of the bins.
    pub excluded: u64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn emit_distribution(metric: &str, values: &[Option<f64>], binning: &Binning) -> Distribution {
    let pairs: Vec<Option<(f64, Option<f64>)>> = values.iter().map(|v| v.map(|v| (v, None))).collect();
    build_distribution(metric, &pairs, binning, false)
}

/// Like [`emit_distribution`], annotating each bin with the median of the
/// second component (e.g. project size).
pub fn emit_annotated_distribution(metric: &str, values: &[Option<(f64, f64)>], binning: &Binning) -> Distribution {
    let pairs: Vec<Option<(f64, Option<f64>)>> = values.iter().map(|v| v.map(|(a, b)| (a, Some(b)))).collect();
    build_distribution(metric, &pairs, binning, true)
}

fn build_distribution(
    metric: &str,
    values: &[Option<(f64, Option<f64>)>],
    binning: &Binning,
    annotated: bool,
) -> Distribution {
    let n = binning.edges.len() + 1;
    let mut counts = vec![0u64; n];
    let mut notes: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut excluded = 0;
    for v in values {
        match v {
            Some((x, note)) if x.is_finite() => {
                let b = binning.bin_of(*x);
                counts[b] += 1;
                if let Some(a) = note {
                    notes[b].push(*a);
                }
            }
            _ => excluded += 1,
        }
    }
    Distribution {
        metric: metric.to_string(),
        edges: binning.edges.clone(),
        labels: binning.labels(),
        population: counts.iter().sum(),
        counts,
        annotations: annotated.then(|| notes.into_iter().map(median).collect()),
        excluded,
    }
}

/// Bin edges per metric; overridable from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinConfig {
    pub usi1_project: Vec<f64>,
    pub usi1_library: Vec<f64>,
    pub usi2: Vec<f64>,
    pub uso: Vec<f64>,
    pub upi: Vec<f64>,
    pub upd: Vec<f64>,
    pub multi_version: Vec<f64>,
    pub snapshot: Vec<f64>,
}

impl Default for BinConfig {
    fn default() -> Self {
        BinConfig {
            usi1_project: vec![0.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            usi1_library: vec![1.0, 2.0, 5.0, 10.0, 50.0],
            usi2: vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.5],
            uso: vec![0.0, 1.0, 5.0, 10.0, 20.0, 50.0],
            upi: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            upd: vec![0.0, 30.0, 60.0, 120.0, 180.0, 365.0],
            multi_version: vec![0.0, 1.0, 2.0, 5.0],
            snapshot: vec![0.0, 1.0, 2.0, 5.0],
        }
    }
}

// --- corpus reports --------------------------------------------------------------

/// Everything the metric families read, for a whole corpus.
#[derive(Debug, Clone, Default)]
pub struct MetricsInput {
    /// Dependencies at each project's latest commit.
    pub dependencies: Vec<LibraryDependency>,
    pub updates: Vec<VersionUpdate>,
    pub methods: BTreeSet<ProjectMethod>,
    pub calls: Vec<ApiCall>,
    pub api_counts: BTreeMap<LibraryVersionRef, usize>,
    pub releases: BTreeMap<Library, Vec<VersionRelease>>,
    /// Crawl date per project; `default_crawl_date` otherwise.
    pub crawl_dates: BTreeMap<String, i64>,
    pub default_crawl_date: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRow {
    pub project_id: String,
    pub usi1: usize,
    pub usi2: Option<f64>,
    pub usi2_with_tests: Option<f64>,
    pub uso: Option<f64>,
    pub uso_excluded: usize,
    pub upi: Option<f64>,
    pub upd: Option<f64>,
    pub upd_excluded: usize,
    pub multi_version_library_count: usize,
    pub multi_version_cases: String,
    pub snapshot_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryRow {
    pub library: String,
    pub usi1: usize,
    pub usi2: Option<f64>,
    pub uso: Option<f64>,
    pub uso_excluded: usize,
    pub upi: Option<f64>,
    pub upd: Option<f64>,
    pub upd_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub projects: Vec<ProjectRow>,
    pub libraries: Vec<LibraryRow>,
    pub distributions: Vec<Distribution>,
    pub diagnostics: Diagnostics,
}

struct DepTerms {
    uso: Vec<Option<f64>>,
}

pub fn compute_metrics(input: &MetricsInput, bins: &BinConfig) -> MetricsReport {
    let mut diagnostics = Diagnostics::new();
    let (usi1_p, usi1_l) = usage_intensity_lib(&input.dependencies);
    let method_usage = usage_intensity_method(&input.calls, &input.methods, &input.api_counts);
    diagnostics.extend(method_usage.diagnostics.clone());
    let (upi_p, upi_l) = update_intensity(&input.dependencies, &input.updates);
    let multi = multiple_version_stats(&input.dependencies);
    let snapshots = snapshot_stats(&input.dependencies);

    // Per-dependency outdatedness, computed per project in parallel.
    let mut by_project: BTreeMap<&str, Vec<&LibraryDependency>> = BTreeMap::new();
    for d in &input.dependencies {
        by_project.entry(&d.project_id).or_default().push(d);
    }
    let empty: Vec<VersionRelease> = Vec::new();
    let dep_terms: Vec<(&str, Vec<(&Library, Option<f64>)>, Diagnostics)> = by_project
        .par_iter()
        .map(|(p, deps)| {
            let crawl = input.crawl_dates.get(*p).copied().unwrap_or(input.default_crawl_date);
            let mut diags = Diagnostics::new();
            let terms = deps
                .iter()
                .map(|d| {
                    let lib = &d.version_ref.library;
                    let Some(releases) = input.releases.get(lib) else {
                        diags.push("no_release_list", d.version_ref.to_string(), "outdatedness undefined");
                        return (lib, None);
                    };
                    let o = usage_outdatedness(d, releases, crawl);
                    if o.unknown_version {
                        diags.push(
                            "unknown_version",
                            d.version_ref.to_string(),
                            "version absent from release list",
                        );
                    }
                    (lib, Some(o.value as f64))
                })
                .collect();
            (*p, terms, diags)
        })
        .collect();
    let mut uso_l_terms: BTreeMap<&Library, DepTerms> = BTreeMap::new();
    let mut uso_p: BTreeMap<&str, Mean> = BTreeMap::new();
    for (p, terms, d) in dep_terms {
        diagnostics.extend(d);
        uso_p.insert(p, Mean::of(terms.iter().map(|t| t.1)));
        for (lib, v) in terms {
            uso_l_terms
                .entry(lib)
                .or_insert(DepTerms { uso: Vec::new() })
                .uso
                .push(v);
        }
    }

    let mut upd_p_terms: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    let mut upd_l_terms: BTreeMap<&Library, Vec<Option<f64>>> = BTreeMap::new();
    for u in &input.updates {
        let d = match update_delay(u, input.releases.get(&u.library).unwrap_or(&empty)) {
            Ok(d) => {
                if d.negative {
                    diagnostics.push(
                        "negative_delay",
                        format!("{}@{}", u.library, u.commit.id),
                        format!("{:.2} days", d.days),
                    );
                }
                Some(d.days)
            }
            Err(e) => {
                diagnostics.push(
                    "unresolvable_release_date",
                    format!("{}:{}", u.library, u.ver_to),
                    e.to_string(),
                );
                None
            }
        };
        upd_p_terms.entry(&u.project_id).or_default().push(d);
        upd_l_terms.entry(&u.library).or_default().push(d);
    }

    let projects: Vec<ProjectRow> = usi1_p
        .iter()
        .map(|(p, &usi1)| {
            let mu = method_usage.per_project.get(p);
            let uso = uso_p.get(p.as_str()).copied().unwrap_or_default();
            let upd = Mean::of(upd_p_terms.get(p.as_str()).cloned().unwrap_or_default());
            let mv = multi.get(p).cloned().unwrap_or_default();
            ProjectRow {
                project_id: p.clone(),
                usi1,
                usi2: mu.and_then(|m| m.main),
                usi2_with_tests: mu.and_then(|m| m.all),
                uso: uso.value,
                uso_excluded: uso.excluded,
                upi: upi_p.get(p).copied().flatten(),
                upd: upd.value,
                upd_excluded: upd.excluded,
                multi_version_library_count: mv.library_count,
                multi_version_cases: mv
                    .cases
                    .iter()
                    .map(|(l, n)| format!("{l}={n}"))
                    .collect::<Vec<_>>()
                    .join(";"),
                snapshot_count: snapshots.get(p).copied().unwrap_or(0),
            }
        })
        .collect();
    let libraries: Vec<LibraryRow> = usi1_l
        .iter()
        .map(|(l, &usi1)| {
            let uso = uso_l_terms
                .get(l)
                .map(|t| Mean::of(t.uso.iter().copied()))
                .unwrap_or_default();
            let upd = Mean::of(upd_l_terms.get(l).cloned().unwrap_or_default());
            LibraryRow {
                library: l.to_string(),
                usi1,
                usi2: method_usage.per_library.get(l).copied().flatten(),
                uso: uso.value,
                uso_excluded: uso.excluded,
                upi: upi_l.get(l).copied().flatten(),
                upd: upd.value,
                upd_excluded: upd.excluded,
            }
        })
        .collect();

    let col = |f: &dyn Fn(&ProjectRow) -> Option<f64>| projects.iter().map(f).collect::<Vec<_>>();
    let lcol = |f: &dyn Fn(&LibraryRow) -> Option<f64>| libraries.iter().map(f).collect::<Vec<_>>();
    let all_delays: Vec<Option<f64>> = upd_p_terms.values().flatten().copied().collect();
    let b = |e: &Vec<f64>| Binning::new(e.clone());
    let distributions = vec![
        emit_distribution("usi1_project", &col(&|r| Some(r.usi1 as f64)), &b(&bins.usi1_project)),
        emit_distribution("usi1_library", &lcol(&|r| Some(r.usi1 as f64)), &b(&bins.usi1_library)),
        emit_distribution("usi2_project", &col(&|r| r.usi2), &b(&bins.usi2)),
        emit_distribution("usi2_library", &lcol(&|r| r.usi2), &b(&bins.usi2)),
        emit_distribution("uso_project", &col(&|r| r.uso), &b(&bins.uso)),
        emit_distribution("uso_library", &lcol(&|r| r.uso), &b(&bins.uso)),
        emit_distribution("upi_project", &col(&|r| r.upi), &b(&bins.upi)),
        emit_distribution("upi_library", &lcol(&|r| r.upi), &b(&bins.upi)),
        emit_distribution("upd_update", &all_delays, &b(&bins.upd)),
        emit_distribution("upd_project", &col(&|r| r.upd), &b(&bins.upd)),
        emit_distribution("upd_library", &lcol(&|r| r.upd), &b(&bins.upd)),
        emit_distribution(
            "multi_version_project",
            &col(&|r| Some(r.multi_version_library_count as f64)),
            &b(&bins.multi_version),
        ),
        emit_distribution(
            "snapshot_project",
            &col(&|r| Some(r.snapshot_count as f64)),
            &b(&bins.snapshot),
        ),
    ];
    diagnostics.normalize();
    MetricsReport {
        schema_version: crate::SCHEMA_VERSION,
        projects,
        libraries,
        distributions,
        diagnostics,
    }
}

/// Writes one CSV row per subject. Undefined values are empty cells.
pub fn write_csv<T: Serialize>(rows: &[T], writer: impl io::Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    w.flush()
}
