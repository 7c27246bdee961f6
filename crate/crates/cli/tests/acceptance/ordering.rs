//! Maven version ordering and update classification on known vectors.

use std::cmp::Ordering;

use depscope_core::version::{classify_update, compare_raw, Direction, Magnitude};
use depscope_core::VersionString;

/// Each list is strictly ascending.
const QUALIFIER_CHAIN: &[&str] = &[
    "1-alpha2snapshot",
    "1-alpha2",
    "1-alpha-123",
    "1-beta-2",
    "1-beta123",
    "1-m2",
    "1-m11",
    "1-rc",
    "1-cr2",
    "1-rc123",
    "1-SNAPSHOT",
    "1",
    "1-sp",
    "1-sp2",
    "1-sp123",
    "1-abc",
    "1-def",
    "1-pom-1",
    "1-1-snapshot",
    "1-1",
    "1-2",
    "1-123",
];

const NUMBER_CHAIN: &[&str] = &[
    "2.0", "2-1", "2.0.a", "2.0.0.a", "2.0.2", "2.0.123", "2.1.0", "2.1-a", "2.1b", "2.1-c", "2.1-1", "2.1.0.1", "2.2",
    "2.123", "11.a2", "11.a11", "11.b2", "11.b11", "11.m2", "11.m11", "11", "11.a", "11b", "11c", "11m",
];

const EQUAL: &[(&str, &str)] = &[
    ("1", "1.0"),
    ("1", "1.0.0"),
    ("1.0", "1.0.0"),
    ("1", "1-0"),
    ("1", "1.0-0"),
    ("1.0", "1.0-0"),
    ("1a", "1-a"),
    ("1a", "1.0-a"),
    ("1a", "1.0.0-a"),
    ("1x", "1-x"),
    ("1ga", "1"),
    ("1release", "1"),
    ("1final", "1"),
    ("1-final", "1"),
    ("1cr", "1rc"),
    ("1a1", "1-alpha-1"),
    ("1b2", "1-beta-2"),
    ("1m3", "1-milestone-3"),
    ("1X", "1x"),
    ("1A", "1a"),
    ("1B", "1b"),
    ("1M", "1m"),
    ("1Cr", "1Rc"),
    ("1cR", "1rC"),
    ("1m3", "1Milestone3"),
];

use Direction::{Downgrade, Unknown as Dunknown, Upgrade};
use Magnitude::*;

const LABELED: &[(&str, &str, Direction, Magnitude)] = &[
    ("1.2.3", "1.3.0", Upgrade, Minor),
    ("1.2.3", "1.2.3", Dunknown, Unknown),
    ("2.1", "2.1-SNAPSHOT", Downgrade, ToSnapshot),
    ("1.2.3", "2.0.0", Upgrade, Major),
    ("1.2.3", "1.2.4", Upgrade, Patch),
    ("1.3.0", "1.2.9", Downgrade, Minor),
    ("2.0", "1.9", Downgrade, Major),
    ("1.0", "1.0.1", Upgrade, Patch),
    ("1.0", "1.1", Upgrade, Minor),
    ("1.0-SNAPSHOT", "1.0", Upgrade, FromSnapshot),
    ("1.1-SNAPSHOT", "1.0", Downgrade, FromSnapshot),
    ("1.0", "1.1-SNAPSHOT", Upgrade, ToSnapshot),
    ("28.0-jre", "28.0-android", Dunknown, Unknown),
    ("1.0", "1.0.0", Dunknown, Unknown),
    ("1.2.3.4", "1.2.3.5", Upgrade, Unknown),
    ("1", "2", Upgrade, Unknown),
    ("1.0-beta", "1.0-alpha", Downgrade, Unknown),
    ("2.5", "2.10", Upgrade, Minor),
    ("1.9.9", "1.10.0", Upgrade, Minor),
    ("10.0.0", "9.9.9", Downgrade, Major),
    ("1.0.0-SNAPSHOT", "1.0.0-SNAPSHOT", Dunknown, Unknown),
    ("1.2-SNAPSHOT", "1.3-SNAPSHOT", Upgrade, Minor),
    ("3.1", "3.1.2", Upgrade, Patch),
    ("5.0.0", "4.3", Downgrade, Major),
];

fn chain(list: &[&str]) -> usize {
    let mut n = 0;
    for (i, a) in list.iter().enumerate() {
        for (j, b) in list.iter().enumerate() {
            let want = i.cmp(&j);
            assert_eq!(compare_raw(a, b), want, "{a} vs {b}");
            n += 1;
        }
    }
    n
}

pub fn check() -> String {
    let mut pairs = chain(QUALIFIER_CHAIN) + chain(NUMBER_CHAIN);
    for (a, b) in EQUAL {
        assert_eq!(compare_raw(a, b), Ordering::Equal, "{a} = {b}");
        assert_eq!(compare_raw(b, a), Ordering::Equal, "{b} = {a}");
        pairs += 2;
    }
    for (from, to, dir, mag) in LABELED {
        let c = classify_update(&VersionString::new(*from).unwrap(), &VersionString::new(*to).unwrap());
        assert_eq!((c.direction, c.magnitude), (*dir, *mag), "{from} -> {to}");
    }
    let vectors = QUALIFIER_CHAIN.len() + NUMBER_CHAIN.len() - 2 + EQUAL.len();
    format!(
        "{vectors} ordering vectors ({pairs} comparisons), {} labeled updates",
        LABELED.len()
    )
}
