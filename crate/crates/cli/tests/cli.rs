use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::Value;

use depscope_cli::{run, Context, EXIT_ANALYSIS, EXIT_OK, EXIT_UNSAFE, EXIT_USAGE};
use depscope_core::registry::DenyTransport;
use depscope_testkit::alerts::{effort_chain, p3, update_cases, update_workspace};
use depscope_testkit::corpus::generate;
use depscope_testkit::Layout;

const NOW: i64 = 1_700_000_000;

fn ctx() -> (Context, Arc<DenyTransport>) {
    let deny = Arc::new(DenyTransport::new());
    (
        Context {
            transport: Some(deny.clone()),
            now: NOW,
        },
        deny,
    )
}

fn depscope(args: &[&str]) -> i32 {
    let (ctx, deny) = ctx();
    let code = run(std::iter::once("depscope").chain(args.iter().copied()), &ctx);
    assert_eq!(deny.attempts(), 0, "fixture runs must not touch the network");
    code
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture_flag(layout: &Layout) -> String {
    format!("fixture:{}", layout.registry.display())
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

#[test]
fn help_and_bad_usage() {
    assert_eq!(depscope(&["--help"]), EXIT_OK);
    assert_eq!(depscope(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(depscope(&["risk"]), EXIT_USAGE);
    assert_eq!(depscope(&["--registry", "sideways", "report", "."]), EXIT_USAGE);
    assert_eq!(depscope(&["--jobs", "0", "report", "."]), EXIT_USAGE);
}

#[test]
fn extract_and_mine() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = generate(3, 6, 4);
    let layout = corpus.workspace.write(&tmp.path().join("ws")).unwrap();
    let out = tmp.path().join("out");
    let p = &corpus.projects[1];
    let dir = &layout.projects[&p.id];

    assert_eq!(
        depscope(&["--out", s(&out), "extract-deps", s(dir), "--project-id", &p.id]),
        EXIT_OK
    );
    let deps = read_json(out.join("dependencies.json"));
    assert_eq!(deps["schema_version"], 1);
    let mut got: Vec<(String, String)> = deps["dependencies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| {
            (
                format!("{}:{}", d["group"].as_str().unwrap(), d["name"].as_str().unwrap()),
                d["version"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    got.sort();
    let mut want: Vec<(String, String)> = p
        .final_deps
        .iter()
        .map(|d| (d.library.to_string(), d.version.clone()))
        .collect();
    want.sort();
    want.dedup();
    assert_eq!(got, want);
    assert!(out.join("dependencies.csv").is_file());

    assert_eq!(
        depscope(&["--out", s(&out), "mine-updates", s(dir), "--project-id", &p.id]),
        EXIT_OK
    );
    let ups = read_json(out.join("updates.json"));
    assert_eq!(ups["updates"].as_array().unwrap().len(), p.updates.len());
}

#[test]
fn mine_without_history_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        depscope(&["--out", s(&tmp.path().join("o")), "mine-updates", s(tmp.path())]),
        EXIT_USAGE
    );
}

#[test]
fn metrics_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = generate(11, 6, 4);
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
    assert_eq!(code, EXIT_OK);
    let m = read_json(out.join("metrics.json"));
    assert_eq!(m["projects"].as_array().unwrap().len(), corpus.projects.len());
    for f in [
        "projects.csv",
        "libraries.csv",
        "distributions.json",
        "rib.csv",
        "dependencies.csv",
        "updates.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let d = read_json(out.join("distributions.json"));
    assert_eq!(d["distributions"].as_array().unwrap().len(), 13);
}

#[test]
fn metrics_on_empty_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("corpus.toml");
    fs::write(&manifest, "default_crawl_date = 0\n").unwrap();
    let out = tmp.path().join("out");
    assert_eq!(
        depscope(&[
            "--registry",
            &format!("fixture:{}", tmp.path().display()),
            "--out",
            s(&out),
            "metrics",
            s(&manifest)
        ]),
        EXIT_OK
    );
    let m = read_json(out.join("metrics.json"));
    assert!(m["projects"].as_array().unwrap().is_empty());
}

#[test]
fn risk_effort_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = p3();
    let layout = ws.write(&tmp.path().join("ws")).unwrap();
    let reg = fixture_flag(&layout);
    let out = tmp.path().join("results/3");
    let dir = s(&layout.projects["3"]);
    let common = [
        "--registry",
        reg.as_str(),
        "--bugdb",
        s(&layout.bugdb),
        "--out",
        s(&out),
    ];

    let args: Vec<&str> = common
        .iter()
        .copied()
        .chain(["risk", dir, "--project-id", "3"])
        .collect();
    assert_eq!(depscope(&args), EXIT_UNSAFE);
    let r = read_json(out.join("risk.json"));
    let rep = &r["reports"][0];
    assert_eq!(
        (rep["nb"]["value"].as_u64(), rep["nb"]["total"].as_u64()),
        (Some(1), Some(18))
    );
    assert_eq!(
        (rep["nc"]["value"].as_u64(), rep["nc"]["total"].as_u64()),
        (Some(7), Some(181))
    );

    let args: Vec<&str> = common
        .iter()
        .copied()
        .chain(["effort", dir, "--project-id", "3"])
        .collect();
    assert_eq!(depscope(&args), EXIT_OK);
    let e = read_json(out.join("effort.json"));
    assert_eq!(e["analyses"][0]["sl"], 15);

    let table_out = tmp.path().join("table");
    assert_eq!(
        depscope(&["--out", s(&table_out), "report", s(&tmp.path().join("results"))]),
        EXIT_OK
    );
    let text = fs::read_to_string(table_out.join("alert-table.txt")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["3", "1", "1(18)", "1(21)", "7(181)", "15", "0", "15", "0", "144"]);
}

#[test]
fn effort_skips_missing_snapshot_only_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = effort_chain().write(&tmp.path().join("ws")).unwrap();
    let reg = fixture_flag(&layout);
    let out = tmp.path().join("out");
    let dir = s(&layout.projects["chain"]);
    for (flag, n) in [(None, 6), (Some("--include-snapshots"), 7)] {
        let mut args = vec![
            "--registry",
            reg.as_str(),
            "--bugdb",
            s(&layout.bugdb),
            "--out",
            s(&out),
            "effort",
            dir,
        ];
        args.extend(flag);
        assert_eq!(depscope(&args), EXIT_OK);
        let e = read_json(out.join("effort.json"));
        let a = &e["analyses"][0];
        assert_eq!(a["candidates"].as_array().unwrap().len(), n);
        assert_eq!(a["suggested"], "1.1");
        assert_eq!(a["sl"], 3);
    }
}

#[test]
fn risk_without_bugdb_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        depscope(&["--out", s(&tmp.path().join("o")), "risk", s(tmp.path())]),
        EXIT_USAGE
    );
}

#[test]
fn update_matters_per_case() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = update_cases();
    let layout = update_workspace(&cases).write(&tmp.path().join("ws")).unwrap();
    let reg = fixture_flag(&layout);
    let changed = [
        "body-change",
        "transitive-only",
        "deleted",
        "descriptor",
        "field-type",
        "retargeted",
        "override-change",
    ];
    for c in &cases {
        let out = tmp.path().join("out").join(c.name);
        let dir = s(&layout.projects[&c.project.id]);
        assert_eq!(
            depscope(&[
                "--registry",
                &reg,
                "--out",
                s(&out),
                "update-matters",
                dir,
                "--commit",
                "c2"
            ]),
            EXIT_OK
        );
        let m = read_json(out.join("update-matters.json"));
        let ups = m["updates"].as_array().unwrap();
        assert_eq!(ups.len(), 1, "{}", c.name);
        assert_eq!(
            ups[0]["matters"].as_bool(),
            Some(changed.contains(&c.name)),
            "{}",
            c.name
        );
    }
}

#[test]
fn update_matters_indeterminate_without_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cases = update_cases();
    cases.truncate(1);
    cases[0].new.jar = false;
    let layout = update_workspace(&cases).write(&tmp.path().join("ws")).unwrap();
    let out = tmp.path().join("out");
    let dir = s(&layout.projects[&cases[0].project.id]);
    let code = depscope(&[
        "--registry",
        &fixture_flag(&layout),
        "--out",
        s(&out),
        "update-matters",
        dir,
        "--commit",
        "c2",
    ]);
    assert_eq!(code, EXIT_ANALYSIS);
    let m = read_json(out.join("update-matters.json"));
    assert!(m["updates"][0]["matters"].is_null());
    assert!(out.join("diagnostics.json").is_file());
}

#[test]
fn ingest_from_saved_issues() {
    let tmp = tempfile::tempdir().unwrap();
    let issues = serde_json::json!({
        "total": 3,
        "issues": [
            {"key": "X-1", "fields": {"issuetype": {"name": "Bug"}, "priority": {"name": "Major"}, "status": {"name": "Closed"}, "resolution": {"name": "Fixed"}, "versions": [{"name": "1.0"}]}},
            {"key": "X-2", "fields": {"issuetype": {"name": "Bug"}, "priority": {"name": "Minor"}, "status": {"name": "Closed"}, "resolution": {"name": "Fixed"}, "versions": [{"name": "1.0"}]}},
            {"key": "X-3", "fields": {"issuetype": {"name": "Improvement"}, "priority": {"name": "Major"}, "status": {"name": "Closed"}, "resolution": {"name": "Fixed"}, "versions": [{"name": "1.0"}]}}
        ]
    });
    let file = tmp.path().join("issues.json");
    fs::write(&file, issues.to_string()).unwrap();
    let db = tmp.path().join("bugs.json");
    let args = [
        "--bugdb",
        s(&db),
        "bugdb",
        "ingest",
        "--tracker",
        "jira",
        "--project",
        "X",
        "--library",
        "org.x:x",
        "--issues",
        s(&file),
    ];
    assert_eq!(depscope(&args), EXIT_OK);
    let first = fs::read_to_string(&db).unwrap();
    assert!(first.contains("X-1") && !first.contains("X-2") && !first.contains("X-3"));
    assert_eq!(depscope(&args), EXIT_OK);
    assert_eq!(fs::read_to_string(&db).unwrap(), first);
}

#[test]
fn config_file_supplies_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = p3().write(&tmp.path().join("ws")).unwrap();
    let cfg = tmp.path().join("depscope.toml");
    fs::write(
        &cfg,
        format!(
            "registry = \"fixture:{}\"\nbugdb = \"{}\"\nout = \"cfg-out\"\njobs = 2\n",
            layout.registry.display(),
            layout.bugdb.display()
        ),
    )
    .unwrap();
    assert_eq!(
        depscope(&["--config", s(&cfg), "risk", s(&layout.projects["3"])]),
        EXIT_UNSAFE
    );
    assert!(tmp.path().join("cfg-out/risk.json").is_file());
}
