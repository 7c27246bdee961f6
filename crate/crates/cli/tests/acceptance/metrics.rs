//! Recomputes every corpus metric from the generator's script with plain
//! set arithmetic and compares it with the `metrics` command's output.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use depscope_core::Library;
use depscope_testkit::corpus::{generate, Corpus, SynthProject};

use crate::{close, depscope, fixture_flag, read_json, s};

const DAY: f64 = 86_400.0;
const UPD_EDGES: [f64; 6] = [0.0, 30.0, 60.0, 120.0, 180.0, 365.0];

#[derive(Debug, Default)]
struct Expected {
    usi1: usize,
    usi2: Option<f64>,
    usi2_with_tests: Option<f64>,
    uso: Option<f64>,
    upi: Option<f64>,
    upd: Option<f64>,
    upd_excluded: usize,
    multi_version: usize,
    snapshots: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn ratio(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

/// Versions of `lib` the project declares in any file.
fn used<'a>(p: &'a SynthProject, lib: &Library) -> BTreeSet<&'a str> {
    p.final_deps
        .iter()
        .filter(|d| &d.library == lib)
        .map(|d| d.version.as_str())
        .collect()
}

/// Whether a call to `Api.f{n}` lands in some used version with a jar.
fn lands(c: &Corpus, p: &SynthProject, lib: &Library, api: &str) -> bool {
    let n: usize = api[1..].parse().unwrap();
    let l = c.library(lib);
    used(p, lib).iter().any(|v| {
        let v = l.get(v);
        v.jar && v.apis > n
    })
}

fn outdatedness(c: &Corpus, lib: &Library, version: &str, crawl: i64) -> f64 {
    let l = c.library(lib);
    let own = l.rank(version);
    l.versions
        .iter()
        .enumerate()
        .filter(|(i, v)| v.listed && *i > own && v.release_date < crawl)
        .count() as f64
}

fn delay(c: &Corpus, lib: &Library, to: &str, date: i64) -> Option<f64> {
    let v = c.library(lib).get(to);
    v.listed.then(|| (date - v.release_date) as f64 / DAY)
}

fn project_oracle(c: &Corpus, p: &SynthProject) -> Expected {
    let libs: BTreeSet<&Library> = p.final_deps.iter().map(|d| &d.library).collect();
    let calling = |include_tests: bool| {
        let methods: Vec<_> = p.methods.iter().filter(|m| include_tests || !m.test).collect();
        let hit = methods
            .iter()
            .filter(|m| m.calls.iter().any(|(l, api)| lands(c, p, l, api)))
            .count();
        ratio(hit, methods.len())
    };
    let uso: Vec<f64> = p
        .final_deps
        .iter()
        .map(|d| outdatedness(c, &d.library, &d.version, p.crawl_date))
        .collect();
    let pairs: BTreeSet<(&str, &Library)> = p.final_deps.iter().map(|d| (d.file.as_str(), &d.library)).collect();
    let updated: BTreeSet<(&str, &Library)> = p.updates.iter().map(|u| (u.file.as_str(), &u.library)).collect();
    let delays: Vec<Option<f64>> = p.updates.iter().map(|u| delay(c, &u.library, &u.to, u.date)).collect();
    let known: Vec<f64> = delays.iter().flatten().copied().collect();
    let snapshots: BTreeSet<(&Library, &str)> = p
        .final_deps
        .iter()
        .filter(|d| d.version.ends_with("-SNAPSHOT"))
        .map(|d| (&d.library, d.version.as_str()))
        .collect();
    Expected {
        usi1: libs.len(),
        usi2: calling(false),
        usi2_with_tests: calling(true),
        uso: mean(&uso),
        upi: ratio(pairs.intersection(&updated).count(), pairs.len()),
        upd: mean(&known),
        upd_excluded: delays.len() - known.len(),
        multi_version: libs.iter().filter(|l| used(p, l).len() > 1).count(),
        snapshots: snapshots.len(),
    }
}

fn library_oracle(c: &Corpus, lib: &Library) -> Expected {
    let users: Vec<&SynthProject> = c
        .projects
        .iter()
        .filter(|p| p.final_deps.iter().any(|d| &d.library == lib))
        .collect();
    let l = c.library(lib);

    // Distinct APIs called per used version, from every project using it.
    let mut called: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for p in &users {
        let names: BTreeSet<usize> = p
            .methods
            .iter()
            .flat_map(|m| m.calls.iter())
            .filter(|(cl, _)| cl == lib)
            .map(|(_, api)| api[1..].parse().unwrap())
            .collect();
        for v in used(p, lib) {
            let apis = l.get(v).apis;
            called.entry(v).or_default().extend(names.iter().filter(|&&n| n < apis));
        }
    }
    let usi2 = called
        .iter()
        .filter(|(v, _)| l.get(v).jar)
        .map(|(v, set)| set.len() as f64 / l.get(v).apis as f64)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));

    let uso: Vec<f64> = users
        .iter()
        .flat_map(|p| {
            p.final_deps
                .iter()
                .filter(|d| &d.library == lib)
                .map(|d| outdatedness(c, lib, &d.version, p.crawl_date))
        })
        .collect();
    let updaters = users
        .iter()
        .filter(|p| p.updates.iter().any(|u| &u.library == lib))
        .count();
    let delays: Vec<Option<f64>> = c
        .projects
        .iter()
        .flat_map(|p| p.updates.iter())
        .filter(|u| &u.library == lib)
        .map(|u| delay(c, lib, &u.to, u.date))
        .collect();
    let known: Vec<f64> = delays.iter().flatten().copied().collect();
    Expected {
        usi1: users.len(),
        usi2,
        uso: mean(&uso),
        upi: ratio(updaters, users.len()),
        upd: mean(&known),
        upd_excluded: delays.len() - known.len(),
        ..Default::default()
    }
}

fn opt(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn same(what: &str, got: Option<f64>, want: Option<f64>) {
    let ok = match (got, want) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    };
    assert!(ok, "{what}: got {got:?}, want {want:?}");
}

fn count(row: &Value, key: &str) -> usize {
    row[key].as_u64().unwrap_or_else(|| panic!("{key} missing")) as usize
}

pub fn check() -> String {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = generate(7, 12, 10);
    let layout = corpus.workspace.write(&tmp.path().join("ws")).unwrap();
    let out = tmp.path().join("out");
    let reg = fixture_flag(&layout);
    let code = depscope(&[
        "--registry",
        &reg,
        "--bugdb",
        s(&layout.bugdb),
        "--out",
        s(&out),
        "metrics",
        s(&layout.manifest),
    ]);
    assert_eq!(code, 0, "metrics exit code");
    let report = read_json(out.join("metrics.json"));
    let mut values = 0;

    let rows = report["projects"].as_array().unwrap();
    assert_eq!(rows.len(), corpus.projects.len(), "project rows");
    for row in rows {
        let id = row["project_id"].as_str().unwrap();
        let p = corpus.projects.iter().find(|p| p.id == id).unwrap();
        let e = project_oracle(&corpus, p);
        let at = |k: &str| format!("{id} {k}");
        assert_eq!(count(row, "usi1"), e.usi1, "{}", at("usi1"));
        same(&at("usi2"), opt(&row["usi2"]), e.usi2);
        same(&at("usi2_with_tests"), opt(&row["usi2_with_tests"]), e.usi2_with_tests);
        same(&at("uso"), opt(&row["uso"]), e.uso);
        same(&at("upi"), opt(&row["upi"]), e.upi);
        same(&at("upd"), opt(&row["upd"]), e.upd);
        assert_eq!(count(row, "upd_excluded"), e.upd_excluded, "{}", at("upd_excluded"));
        assert_eq!(
            count(row, "multi_version_library_count"),
            e.multi_version,
            "{}",
            at("multi_version")
        );
        assert_eq!(count(row, "snapshot_count"), e.snapshots, "{}", at("snapshot_count"));
        values += 10;
    }

    let used_libs: BTreeSet<&Library> = corpus
        .projects
        .iter()
        .flat_map(|p| p.final_deps.iter().map(|d| &d.library))
        .collect();
    let rows = report["libraries"].as_array().unwrap();
    assert_eq!(rows.len(), used_libs.len(), "library rows");
    for row in rows {
        let name = row["library"].as_str().unwrap();
        let lib = Library::parse(name).unwrap();
        let e = library_oracle(&corpus, &lib);
        let at = |k: &str| format!("{name} {k}");
        assert_eq!(count(row, "usi1"), e.usi1, "{}", at("usi1"));
        same(&at("usi2"), opt(&row["usi2"]), e.usi2);
        same(&at("uso"), opt(&row["uso"]), e.uso);
        same(&at("upi"), opt(&row["upi"]), e.upi);
        same(&at("upd"), opt(&row["upd"]), e.upd);
        assert_eq!(count(row, "upd_excluded"), e.upd_excluded, "{}", at("upd_excluded"));
        values += 6;
    }

    // Per-update delays binned with upper-inclusive edges.
    let mut bins = vec![0u64; UPD_EDGES.len() + 1];
    let mut excluded = 0;
    for p in &corpus.projects {
        for u in &p.updates {
            match delay(&corpus, &u.library, &u.to, u.date) {
                Some(d) => bins[UPD_EDGES.iter().filter(|&&e| e < d).count()] += 1,
                None => excluded += 1,
            }
        }
    }
    assert!(excluded > 0, "corpus should contain an update to an unlisted snapshot");
    let dists = read_json(out.join("distributions.json"));
    let upd = dists["distributions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["metric"] == "upd_update")
        .expect("upd_update distribution");
    let got: Vec<u64> = upd["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(got, bins, "upd_update bins");
    assert_eq!(upd["excluded"].as_u64(), Some(excluded), "upd_update excluded");

    // Bugs whose affected versions name each release.
    let mut rdr = csv_rows(&out.join("rib.csv"));
    let header = rdr.remove(0);
    let col = |k: &str| header.iter().position(|h| h == k).unwrap();
    let (li, vi, ri) = (col("library"), col("version"), col("rib"));
    let listed: usize = corpus
        .libraries
        .iter()
        .filter(|l| rdr.iter().any(|r| r[li] == l.library.to_string()))
        .map(|l| l.versions.iter().filter(|v| v.listed).count())
        .sum();
    assert_eq!(rdr.len(), listed, "rib rows");
    let mut total = 0;
    for r in &rdr {
        let want = corpus
            .bugs
            .iter()
            .filter(|b| b.library.to_string() == r[li] && b.affected_versions.iter().any(|v| v.as_str() == r[vi]))
            .count();
        assert_eq!(r[ri].parse::<usize>().unwrap(), want, "rib {}:{}", r[li], r[vi]);
        total += want;
    }
    values += rdr.len() + bins.len();
    format!("{values} values, {total} bug-release pairs")
}

fn csv_rows(p: &std::path::Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
