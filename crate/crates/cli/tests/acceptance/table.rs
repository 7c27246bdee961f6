//! The crafted P=3 project run through risk, effort and report, with every
//! cell recomputed from the fixture.

use std::collections::BTreeSet;

use depscope_testkit::alerts::{p3, p3_sites, P3_API, P3_CURRENT};

use crate::disasm::{Node, World};
use crate::matters::{closure_changed, read_all};
use crate::{depscope, fixture_flag, read_json, s};

pub fn check() -> String {
    let ws = p3();
    let sites = p3_sites();
    let current = ws.version(P3_CURRENT);
    let old = read_all(&current.classes, false);
    let old_world = World::new(old.iter());
    let api = |i: usize| Node::Method(P3_API.into(), format!("a{i}"), "()V".into());

    // Risk cells.
    let bugs: Vec<_> = ws
        .bugs
        .iter()
        .filter(|b| b.affected_versions.iter().any(|v| v == &current.version_ref.version))
        .collect();
    let buggy = |i: usize| -> BTreeSet<String> {
        let reached = old_world.closure(&[api(i)]);
        bugs.iter()
            .filter(|b| {
                b.buggy_methods
                    .values()
                    .flatten()
                    .any(|m| reached.contains(&Node::Method(m.owner.clone(), m.name.clone(), m.descriptor.clone())))
            })
            .map(|b| b.issue_id.clone())
            .collect()
    };
    let reached_bugs: BTreeSet<String> = (0..sites.len()).flat_map(buggy).collect();
    let risky: Vec<usize> = (0..sites.len()).filter(|&i| !buggy(i).is_empty()).collect();
    let risky_sites: usize = risky.iter().map(|&i| sites[i]).sum();
    let total_sites: usize = sites.iter().sum();

    // Effort cells: every higher release is a fix; the suggested one is the
    // lowest among equals since all share the same changes.
    let candidates: Vec<_> = ws
        .versions
        .iter()
        .filter(|v| v.version_ref.library == current.version_ref.library && v.version_ref != current.version_ref)
        .collect();
    let first = read_all(&candidates[0].classes, false);
    let first_api = first.iter().find(|c| c.name == P3_API).unwrap();
    let (deleted, kept): (Vec<usize>, Vec<usize>) =
        (0..sites.len()).partition(|&i| first_api.method(&format!("a{i}"), "()V").is_none());
    let changed: Vec<usize> = kept
        .into_iter()
        .filter(|&i| closure_changed(&old, &first, &[api(i)]))
        .collect();
    let count = |set: &[usize]| set.iter().map(|&i| sites[i]).sum::<usize>();

    let want: Vec<String> = vec![
        "3".into(),
        usize::from(!reached_bugs.is_empty()).to_string(),
        format!("{}({})", reached_bugs.len(), bugs.len()),
        format!("{}({})", risky.len(), sites.len()),
        format!("{risky_sites}({total_sites})"),
        candidates.len().to_string(),
        deleted.len().to_string(),
        changed.len().to_string(),
        count(&deleted).to_string(),
        count(&changed).to_string(),
    ];
    assert_eq!(
        want,
        ["3", "1", "1(18)", "1(21)", "7(181)", "15", "0", "15", "0", "144"],
        "oracle row"
    );

    let tmp = tempfile::tempdir().unwrap();
    let layout = ws.write(&tmp.path().join("ws")).unwrap();
    let reg = fixture_flag(&layout);
    let results = tmp.path().join("results");
    let dir = s(&layout.projects["3"]);
    let out = results.join("3");
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
    assert_eq!(depscope(&args), 3, "risk exit code");
    let args: Vec<&str> = common
        .iter()
        .copied()
        .chain(["effort", dir, "--project-id", "3"])
        .collect();
    assert_eq!(depscope(&args), 0, "effort exit code");
    let table = tmp.path().join("table");
    assert_eq!(
        depscope(&["--out", s(&table), "report", s(&results)]),
        0,
        "report exit code"
    );

    let text = std::fs::read_to_string(table.join("alert-table.txt")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["P", "BL", "NB", "NA", "NC", "SL", "NAD", "NAC", "NCD", "NCC"]);
    let row: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(row, want, "emitted row");
    let json = read_json(table.join("alert-table.json"));
    assert_eq!(json["rows"][0]["nc"]["value"], 7);
    assert_eq!(json["rows"][0]["nc"]["total"], 181);
    row.join(" ")
}
