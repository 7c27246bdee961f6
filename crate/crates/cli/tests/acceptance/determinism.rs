//! Two complete fixture-mode runs at different wall-clock times must write
//! the same bytes apart from the timestamp line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use walkdir::WalkDir;

use depscope_testkit::alerts::{p3, update_cases, update_workspace};
use depscope_testkit::corpus::generate;
use depscope_testkit::Layout;

use crate::{depscope_at, fixture_flag, s, NOW};

struct Inputs {
    corpus: Layout,
    p3: Layout,
    updates: Layout,
}

fn pipeline(inputs: &Inputs, out: &Path, now: i64) -> Vec<i32> {
    let mut codes = Vec::new();
    let mut run = |layout: &Layout, sub: &str, tail: &[&str]| {
        let reg = fixture_flag(layout);
        let dir = out.join(sub);
        let mut args = vec![
            "--registry",
            reg.as_str(),
            "--bugdb",
            s(&layout.bugdb),
            "--out",
            s(&dir),
        ];
        args.extend_from_slice(tail);
        codes.push(depscope_at(now, &args));
    };

    let c = &inputs.corpus;
    run(c, "metrics", &["metrics", s(&c.manifest)]);
    run(c, "bugdb", &["bugdb", "validate"]);
    for (id, dir) in &c.projects {
        run(c, &format!("deps/{id}"), &["extract-deps", s(dir), "--project-id", id]);
        run(
            c,
            &format!("updates/{id}"),
            &["mine-updates", s(dir), "--project-id", id],
        );
    }
    let dir = s(&inputs.p3.projects["3"]);
    run(&inputs.p3, "results/3", &["risk", dir, "--project-id", "3"]);
    run(&inputs.p3, "results/3", &["effort", dir, "--project-id", "3"]);
    for (id, dir) in &inputs.updates.projects {
        run(
            &inputs.updates,
            &format!("matters/{id}"),
            &["update-matters", s(dir), "--commit", "c2"],
        );
    }
    let results = out.join("results");
    codes.push(depscope_at(
        now,
        &["--out", s(&out.join("table")), "report", s(&results)],
    ));
    codes
}

fn snapshot(root: &Path) -> BTreeMap<String, String> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let text = fs::read_to_string(e.path()).unwrap();
            let kept: Vec<&str> = text
                .lines()
                .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
                .collect();
            (
                e.path().strip_prefix(root).unwrap().display().to_string(),
                kept.join("\n"),
            )
        })
        .collect()
}

pub fn check() -> String {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = Inputs {
        corpus: generate(5, 10, 8).workspace.write(&tmp.path().join("corpus")).unwrap(),
        p3: p3().write(&tmp.path().join("p3")).unwrap(),
        updates: update_workspace(&update_cases())
            .write(&tmp.path().join("updates"))
            .unwrap(),
    };
    let first = pipeline(&inputs, &tmp.path().join("run1"), NOW);
    let second = pipeline(&inputs, &tmp.path().join("run2"), NOW + 86_400 * 3 + 17);
    assert_eq!(first, second, "exit codes differ");
    assert!(
        first.iter().all(|c| [0, 1, 3].contains(c)),
        "unexpected exit codes {first:?}"
    );

    let a = snapshot(&tmp.path().join("run1"));
    let b = snapshot(&tmp.path().join("run2"));
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "file sets differ"
    );
    for (name, text) in &a {
        assert!(text == &b[name], "{name} differs between runs");
    }
    let raw1 = fs::read_to_string(tmp.path().join("run1/metrics/metrics.json")).unwrap();
    let raw2 = fs::read_to_string(tmp.path().join("run2/metrics/metrics.json")).unwrap();
    assert_ne!(raw1, raw2, "timestamps should differ");
    format!(
        "{} commands, {} files identical, no network attempts",
        first.len(),
        a.len()
    )
}
