use proptest::prelude::*;

use depscope_core::bugdb::{potential_risk, BugDb, BugRecord};
use depscope_core::registry::VersionRelease;
use depscope_core::{Library, LibraryVersionRef, VersionString};
use depscope_testkit::alerts::bug;

const LIBRARIES: [&str; 3] = ["org.a:one", "org.a:two", "org.b:three"];
const VERSIONS: [&str; 5] = ["1.0", "1.1", "1.2", "2.0", "2.0.1"];

fn records() -> impl Strategy<Value = Vec<BugRecord>> {
    prop::collection::vec(
        (
            0..LIBRARIES.len(),
            prop::sample::subsequence(VERSIONS.to_vec(), 1..4),
            any::<bool>(),
        ),
        0..16,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (l, versions, methods))| {
                let m: &[(&str, &str)] = if methods { &[("org/a/Core", "run")] } else { &[] };
                bug(LIBRARIES[l], &format!("BUG-{i}"), &versions, m)
            })
            .collect()
    })
}

fn releases() -> Vec<VersionRelease> {
    LIBRARIES
        .iter()
        .flat_map(|l| {
            VERSIONS.iter().map(move |v| VersionRelease {
                version_ref: LibraryVersionRef::new(Library::parse(l).unwrap(), VersionString::new(*v).unwrap()),
                release_date: 0,
                flagged: false,
            })
        })
        .collect()
}

proptest! {
    #[test]
    fn risk_over_releases_counts_every_pair(records in records()) {
        let (db, diags) = BugDb::from_records(records);
        prop_assert!(diags.is_empty());
        let total: usize = releases().iter().map(|r| potential_risk(r, &db)).sum();
        prop_assert_eq!(total, db.pairs().len());
    }

    #[test]
    fn merging_twice_changes_nothing(base in records(), incoming in records()) {
        let (mut db, _) = BugDb::from_records(base);
        db.merge(incoming.clone());
        let once = db.to_json();
        prop_assert_eq!(db.merge(incoming), 0);
        prop_assert_eq!(db.to_json(), once);
    }
}
