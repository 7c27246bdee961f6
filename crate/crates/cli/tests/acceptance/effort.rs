//! The candidate chain: skipped versions, per-candidate counts and the
//! deleted/changed/unchanged split of the called APIs.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use depscope_core::bytecode::{diff_apis, ApiElement};
use depscope_testkit::alerts::{effort_chain, CHAIN_API, CHAIN_LIBRARY, CHAIN_SITES};
use depscope_testkit::vref;

use crate::{depscope, fixture_flag, read_json, s};

fn names(set: &BTreeSet<ApiElement>) -> Vec<&str> {
    set.iter().map(|a| a.member_name.as_str()).collect()
}

fn sites(list: &[&str]) -> u64 {
    CHAIN_SITES
        .iter()
        .filter(|(n, _)| list.contains(n))
        .map(|(_, k)| *k as u64)
        .sum()
}

pub fn check() -> String {
    let ws = effort_chain();

    // Partition of the called set, straight from the artifact analyses.
    let analyses = ws.analyses();
    let current = &analyses[&vref(&format!("{CHAIN_LIBRARY}:1.0"))];
    let called: BTreeSet<ApiElement> = current
        .apis
        .iter()
        .filter(|a| a.owner_class == CHAIN_API && CHAIN_SITES.iter().any(|(n, _)| *n == a.member_name))
        .cloned()
        .collect();
    assert_eq!(called.len(), CHAIN_SITES.len());
    let expected_split: [(&str, &[&str], &[&str]); 6] = [
        ("1.1", &[], &["a"]),
        ("1.2", &[], &["a", "c"]),
        ("1.3", &[], &["a", "c"]),
        ("1.4", &[], &["a", "c"]),
        ("1.5", &["d"], &["a", "c"]),
        ("1.6", &["b", "d"], &["a", "c"]),
    ];
    let mut want_candidates = Vec::new();
    for (v, deleted, changed) in expected_split {
        let new = &analyses[&vref(&format!("{CHAIN_LIBRARY}:{v}"))];
        let d = diff_apis(current, new, &called).unwrap();
        assert!(
            d.deleted.is_disjoint(&d.changed)
                && d.deleted.is_disjoint(&d.unchanged)
                && d.changed.is_disjoint(&d.unchanged),
            "{v} overlap"
        );
        let union: BTreeSet<ApiElement> = d
            .deleted
            .iter()
            .chain(&d.changed)
            .chain(&d.unchanged)
            .cloned()
            .collect();
        assert_eq!(union, called, "{v} does not cover the called set");
        assert_eq!(names(&d.deleted), deleted, "{v} deleted");
        assert_eq!(names(&d.changed), changed, "{v} changed");
        let still_buggy = matches!(v, "1.2" | "1.3" | "1.4");
        want_candidates.push(if still_buggy {
            json!({"candidate_version": v, "status": "skipped", "reason": "still_buggy"})
        } else {
            json!({
                "candidate_version": v,
                "status": "accepted",
                "nad": deleted.len(),
                "nac": changed.len(),
                "ncd": sites(deleted),
                "ncc": sites(changed),
            })
        });
    }

    let tmp = tempfile::tempdir().unwrap();
    let layout = ws.write(&tmp.path().join("ws")).unwrap();
    let out = tmp.path().join("out");
    let reg = fixture_flag(&layout);
    let code = depscope(&[
        "--registry",
        &reg,
        "--bugdb",
        s(&layout.bugdb),
        "--out",
        s(&out),
        "effort",
        s(&layout.projects["chain"]),
    ]);
    assert_eq!(code, 0, "effort exit code");
    let e = read_json(out.join("effort.json"));
    let a = &e["analyses"][0];
    assert_eq!(a["candidates"], Value::Array(want_candidates), "candidates");
    assert_eq!(a["sl"], 3, "sl");
    assert_eq!(a["suggested"], "1.1", "suggested");
    "3 accepted, 1.2..1.4 skipped as still buggy, partitions exact".into()
}
