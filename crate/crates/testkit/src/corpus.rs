//! Seeded synthetic corpus: libraries with release histories and projects
//! with scripted config-file histories and compiled classes. The script is
//! kept alongside the written workspace so tests can recompute every metric
//! from it directly.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use depscope_core::bugdb::{BugRecord, BugSource, Priority};
use depscope_core::history::{SnapshotLine, VersionUpdate};
use depscope_core::metrics::MetricsInput;
use depscope_core::registry::VersionRelease;
use depscope_core::version::classify_update;
use depscope_core::{CommitRef, Library, LibraryDependency, LibraryVersionRef, SourceSet, VersionString};

use crate::spec::{ClassSpec, Op};
use crate::{gradle, pom, ProjectFixture, VersionFixture, Workspace};

const DAY: i64 = 86_400;

#[derive(Debug, Clone)]
pub struct SynthVersion {
    pub version: String,
    pub release_date: i64,
    /// Public API methods `f0..f{apis-1}` of the library's `Api` class.
    pub apis: usize,
    pub listed: bool,
    pub jar: bool,
}

/// Versions are kept in ascending order.
#[derive(Debug, Clone)]
pub struct SynthLibrary {
    pub library: Library,
    pub versions: Vec<SynthVersion>,
}

impl SynthLibrary {
    pub fn rank(&self, version: &str) -> usize {
        self.versions
            .iter()
            .position(|v| v.version == version)
            .unwrap_or_else(|| panic!("{} has no version {version}", self.library))
    }

    pub fn get(&self, version: &str) -> &SynthVersion {
        &self.versions[self.rank(version)]
    }

    pub fn api_owner(&self) -> String {
        api_owner(&self.library)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SynthDep {
    pub file: String,
    pub library: Library,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthUpdate {
    pub file: String,
    pub library: Library,
    pub from: String,
    pub to: String,
    pub date: i64,
}

#[derive(Debug, Clone)]
pub struct SynthMethod {
    pub owner: String,
    pub name: String,
    pub test: bool,
    /// Called API method names per library, one entry per call site.
    pub calls: Vec<(Library, String)>,
}

#[derive(Debug, Clone)]
pub struct SynthProject {
    pub id: String,
    pub crawl_date: i64,
    pub final_deps: Vec<SynthDep>,
    pub updates: Vec<SynthUpdate>,
    pub methods: Vec<SynthMethod>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub libraries: Vec<SynthLibrary>,
    pub projects: Vec<SynthProject>,
    pub bugs: Vec<BugRecord>,
    pub workspace: Workspace,
}

impl Corpus {
    pub fn library(&self, l: &Library) -> &SynthLibrary {
        self.libraries.iter().find(|s| &s.library == l).expect("known library")
    }

    /// Final dependencies, scripted updates and listed releases as metric
    /// input. Methods and calls are left empty.
    pub fn metrics_input(&self) -> MetricsInput {
        let v = |s: &str| VersionString::new(s).expect("corpus version");
        let mut m = MetricsInput::default();
        for p in &self.projects {
            m.crawl_dates.insert(p.id.clone(), p.crawl_date);
            for d in &p.final_deps {
                m.dependencies.push(LibraryDependency {
                    project_id: p.id.clone(),
                    config_file: d.file.clone(),
                    commit: CommitRef::new("head", 0),
                    version_ref: LibraryVersionRef::new(d.library.clone(), v(&d.version)),
                    source_set: SourceSet::Main,
                    optional: false,
                    provenance: Vec::new(),
                });
            }
            for (i, u) in p.updates.iter().enumerate() {
                let (from, to) = (v(&u.from), v(&u.to));
                m.updates.push(VersionUpdate {
                    project_id: p.id.clone(),
                    config_file: u.file.clone(),
                    commit: CommitRef::new(format!("c{i}"), u.date),
                    library: u.library.clone(),
                    classification: classify_update(&from, &to),
                    ver_from: from,
                    ver_to: to,
                });
            }
        }
        for l in &self.libraries {
            let releases = l
                .versions
                .iter()
                .filter(|s| s.listed)
                .map(|s| VersionRelease {
                    version_ref: LibraryVersionRef::new(l.library.clone(), v(&s.version)),
                    release_date: s.release_date,
                    flagged: false,
                })
                .collect();
            m.releases.insert(l.library.clone(), releases);
        }
        m
    }
}

fn api_owner(l: &Library) -> String {
    format!("{}/{}/Api", l.group.replace('.', "/"), l.name)
}

fn version_classes(l: &Library, apis: usize) -> Vec<ClassSpec> {
    let base = format!("{}/{}", l.group.replace('.', "/"), l.name);
    let imp = format!("{base}/Impl");
    let mut api = ClassSpec::class(&format!("{base}/Api"));
    for j in 0..apis {
        api = api.stat(&format!("f{j}"), vec![Op::Const(j as i32), Op::stat(&imp, "work")]);
    }
    let internal = ClassSpec::class(&imp)
        .package_private()
        .stat("work", vec![Op::Const(7)]);
    vec![api, internal]
}

fn next_version(rng: &mut ChaCha8Rng, (ma, mi, pa): (u32, u32, u32)) -> (u32, u32, u32) {
    let r: f64 = rng.random();
    if r < 0.15 {
        (ma + 1, 0, 0)
    } else if r < 0.6 {
        (ma, mi + 1, 0)
    } else {
        (ma, mi, pa + 1)
    }
}

fn render((ma, mi, pa): (u32, u32, u32)) -> String {
    if pa == 0 {
        format!("{ma}.{mi}")
    } else {
        format!("{ma}.{mi}.{pa}")
    }
}

fn gen_libraries(rng: &mut ChaCha8Rng, n: usize) -> Vec<SynthLibrary> {
    (0..n)
        .map(|k| {
            let library = Library::new("org.synth", format!("lib{k}"));
            let count = rng.random_range(4..=7);
            let mut v = (1, 0, 0);
            let mut date = 1_300_000_000 + k as i64 * 3 * DAY;
            let mut versions = Vec::new();
            for i in 0..count {
                versions.push(SynthVersion {
                    version: render(v),
                    release_date: date,
                    apis: 3 + i,
                    listed: true,
                    jar: true,
                });
                v = next_version(rng, v);
                date += rng.random_range(5..120) * DAY;
            }
            SynthLibrary { library, versions }
        })
        .collect()
}

type State = BTreeMap<String, BTreeMap<Library, String>>;

fn render_file(project: &str, file: &str, deps: &BTreeMap<Library, String>) -> String {
    let coords: Vec<String> = deps.iter().map(|(l, v)| format!("{l}:{v}")).collect();
    if file.ends_with(".gradle") {
        gradle(&coords)
    } else {
        let with_scope: Vec<(String, Option<&str>)> = coords.into_iter().map(|c| (c, None)).collect();
        pom(&format!("{project}-{}", file.replace('/', "-")), &with_scope)
    }
}

/// Listed versions of `lib` released before `date`, or the first one.
fn latest_before(lib: &SynthLibrary, date: i64) -> String {
    lib.versions
        .iter()
        .filter(|v| v.listed && v.release_date < date)
        .last()
        .unwrap_or(&lib.versions[0])
        .version
        .clone()
}

/// Generates and lays out a corpus. `n_projects >= 6`, `n_libraries >= 4`.
pub fn generate(seed: u64, n_projects: usize, n_libraries: usize) -> Corpus {
    assert!(n_projects >= 6 && n_libraries >= 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut libraries = gen_libraries(&mut rng, n_libraries);

    // lib1 has a listed version whose jar is gone; lib2 has an unlisted
    // snapshot between two releases.
    libraries[1].versions[2].jar = false;
    let snap_after = libraries[2].versions[1].clone();
    libraries[2].versions.insert(
        2,
        SynthVersion {
            version: format!("{}.1-SNAPSHOT", snap_after.version),
            release_date: 0,
            apis: snap_after.apis,
            listed: false,
            jar: false,
        },
    );
    let snapshot = libraries[2].versions[2].version.clone();

    let default_crawl_date = 1_400_000_000;
    let mut projects = Vec::new();
    let mut fixtures = Vec::new();
    for pi in 0..n_projects {
        let id = format!("p{pi:02}");
        let files: Vec<String> = if pi % 4 == 3 {
            vec!["build.gradle".into()]
        } else if pi % 3 == 0 {
            vec!["pom.xml".into(), "core/pom.xml".into()]
        } else {
            vec!["pom.xml".into()]
        };
        let crawl_date = if pi % 3 == 1 {
            default_crawl_date - rng.random_range(30..400) * DAY
        } else {
            default_crawl_date
        };

        let mut date = 1_330_000_000 + rng.random_range(0..60) * DAY;
        let mut state: State = BTreeMap::new();
        let mut history = Vec::new();
        let mut updates = Vec::new();

        // Initial commit.
        for f in &files {
            let mut libs: Vec<&SynthLibrary> = libraries.iter().collect();
            libs.shuffle(&mut rng);
            let n = rng.random_range(1..=3);
            let deps = state.entry(f.clone()).or_default();
            for l in libs.into_iter().take(n) {
                deps.insert(l.library.clone(), latest_before(l, date));
            }
        }
        if pi == 0 {
            let l0 = &libraries[0];
            state
                .get_mut("pom.xml")
                .unwrap()
                .insert(l0.library.clone(), l0.versions[1].version.clone());
            state
                .get_mut("core/pom.xml")
                .unwrap()
                .insert(l0.library.clone(), l0.versions[0].version.clone());
        }
        if pi == 2 {
            let l2 = &libraries[2];
            state
                .get_mut(&files[0])
                .unwrap()
                .insert(l2.library.clone(), l2.versions[0].version.clone());
        }
        let commit_line = |history: &mut Vec<SnapshotLine>, c: usize, date: i64, file: &str, state: &State| {
            history.push(SnapshotLine {
                commit_id: format!("{id}-c{c:02}"),
                date,
                path: file.to_string(),
                content: Some(render_file(&id, file, &state[file])),
            });
        };
        for f in &files {
            commit_line(&mut history, 0, date, f, &state);
        }

        let commits = rng.random_range(4..=8);
        for c in 1..=commits {
            date += rng.random_range(3..40) * DAY;
            let f = files.choose(&mut rng).unwrap().clone();
            let deps = state.get_mut(&f).unwrap();
            let r: f64 = rng.random();
            let bumpable: Vec<Library> = deps
                .keys()
                .filter(|l| !(pi == 0 && l.name == "lib0"))
                .filter(|l| !(pi == 2 && l.name == "lib2"))
                .cloned()
                .collect();
            if r < 0.6 && !bumpable.is_empty() {
                let l = bumpable.choose(&mut rng).unwrap();
                let lib = libraries.iter().find(|s| &s.library == l).unwrap();
                let cur = lib.rank(&deps[l]);
                let choices: Vec<usize> = (0..lib.versions.len())
                    .filter(|&i| i != cur && lib.versions[i].listed)
                    .filter(|&i| i > cur || rng.random_bool(0.15))
                    .collect();
                let Some(&to) = choices.choose(&mut rng) else {
                    continue;
                };
                let from = deps.insert(l.clone(), lib.versions[to].version.clone()).unwrap();
                updates.push(SynthUpdate {
                    file: f.clone(),
                    library: l.clone(),
                    from,
                    to: lib.versions[to].version.clone(),
                    date,
                });
            } else if r < 0.8 || deps.len() < 2 {
                let absent: Vec<&SynthLibrary> = libraries.iter().filter(|l| !deps.contains_key(&l.library)).collect();
                let Some(l) = absent.choose(&mut rng) else {
                    continue;
                };
                deps.insert(l.library.clone(), latest_before(l, date));
            } else {
                let l = bumpable.choose(&mut rng).or(deps.keys().next()).unwrap().clone();
                deps.remove(&l);
            }
            commit_line(&mut history, c, date, &f, &state);
        }
        if pi == 2 {
            date += 10 * DAY;
            let f = files[0].clone();
            let l2 = libraries[2].library.clone();
            let from = state.get_mut(&f).unwrap().insert(l2.clone(), snapshot.clone()).unwrap();
            updates.push(SynthUpdate {
                file: f.clone(),
                library: l2,
                from,
                to: snapshot.clone(),
                date,
            });
            commit_line(&mut history, commits + 1, date, &f, &state);
        }

        let final_deps: Vec<SynthDep> = state
            .iter()
            .flat_map(|(f, deps)| {
                deps.iter().map(move |(l, v)| SynthDep {
                    file: f.clone(),
                    library: l.clone(),
                    version: v.clone(),
                })
            })
            .collect();

        // Classes calling APIs of the final dependencies.
        let mut per_lib_max: BTreeMap<Library, usize> = BTreeMap::new();
        for d in &final_deps {
            let lib = libraries.iter().find(|s| s.library == d.library).unwrap();
            let e = per_lib_max.entry(d.library.clone()).or_default();
            *e = (*e).max(lib.get(&d.version).apis);
        }
        let used: Vec<(Library, usize)> = per_lib_max.into_iter().collect();
        let mut methods = Vec::new();
        let mut main = Vec::new();
        let mut test = Vec::new();
        let class_count = if pi == 5 { 0 } else { rng.random_range(1..=3) };
        for ci in 0..class_count {
            for is_test in [false, true] {
                if is_test && rng.random_bool(0.4) {
                    continue;
                }
                let owner = if is_test {
                    format!("proj/{id}/C{ci}Test")
                } else {
                    format!("proj/{id}/C{ci}")
                };
                let mut class = ClassSpec::class(&owner);
                for mi in 0..rng.random_range(1..=4) {
                    let mut calls = Vec::new();
                    if rng.random_bool(0.7) {
                        for _ in 0..rng.random_range(1..=4) {
                            let (l, n) = used.choose(&mut rng).unwrap();
                            calls.push((l.clone(), format!("f{}", rng.random_range(0..*n))));
                        }
                    }
                    let body = calls.iter().map(|(l, name)| Op::stat(&api_owner(l), name)).collect();
                    let name = format!("m{mi}");
                    class = class.stat(&name, body);
                    methods.push(SynthMethod {
                        owner: owner.clone(),
                        name,
                        test: is_test,
                        calls,
                    });
                }
                if is_test {
                    test.push(class);
                } else {
                    main.push(class);
                }
            }
        }

        let mut fixture = ProjectFixture::new(&id);
        for (f, deps) in &state {
            fixture.files.insert(f.clone(), render_file(&id, f, deps));
        }
        fixture.main = main;
        fixture.test = test;
        fixture.history = history;
        fixture.crawl_date = (crawl_date != default_crawl_date).then_some(crawl_date);
        fixtures.push(fixture);
        projects.push(SynthProject {
            id,
            crawl_date,
            final_deps,
            updates,
            methods,
        });
    }

    let bugs = gen_bugs(&mut rng, &libraries);
    let versions = libraries
        .iter()
        .flat_map(|l| {
            l.versions.iter().map(|v| VersionFixture {
                version_ref: LibraryVersionRef::new(l.library.clone(), VersionString::new(&v.version).unwrap()),
                release_date: v.release_date,
                classes: version_classes(&l.library, v.apis),
                listed: v.listed,
                jar: v.jar,
                debug: false,
            })
        })
        .collect();
    let workspace = Workspace {
        versions,
        projects: fixtures,
        bugs: bugs.clone(),
        default_crawl_date,
    };
    Corpus {
        libraries,
        projects,
        bugs,
        workspace,
    }
}

fn gen_bugs(rng: &mut ChaCha8Rng, libraries: &[SynthLibrary]) -> Vec<BugRecord> {
    let mut out = Vec::new();
    for l in libraries {
        let listed: Vec<&SynthVersion> = l.versions.iter().filter(|v| v.listed).collect();
        for b in 0..rng.random_range(0..=3) {
            let start = rng.random_range(0..listed.len());
            let len = rng.random_range(1..=3).min(listed.len() - start);
            out.push(BugRecord {
                issue_id: format!("{}-{}", l.library.name.to_uppercase(), 100 + b),
                priority: *[Priority::Major, Priority::Critical, Priority::Blocker]
                    .choose(rng)
                    .unwrap(),
                library: l.library.clone(),
                affected_versions: listed[start..start + len]
                    .iter()
                    .map(|v| VersionString::new(&v.version).unwrap())
                    .collect(),
                buggy_methods: BTreeMap::new(),
                source: BugSource::Local,
                methods_provenance: None,
            });
        }
    }
    out
}
