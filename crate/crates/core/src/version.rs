//! Version strings, Maven-compatible ordering and update classification.
//!
//! Ordering follows Maven's `ComparableVersion`: the string is split into
//! numeric and qualifier items at `.`, `-` and digit/letter transitions, a
//! hyphen or transition opens a nested list, trailing "null" items (`0`, `""`,
//! `final`, `ga`, `release`) are trimmed from each list, and lists are compared
//! item by item with well-known qualifiers ranked
//! `alpha < beta < milestone < rc = cr < snapshot < "" = final = ga < sp`
//! and unknown qualifiers sorted lexically after them.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A version exactly as declared in a manifest or registry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VersionString(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("version string must not be empty")]
pub struct EmptyVersion;

impl VersionString {
    pub fn new(raw: impl Into<String>) -> Result<Self, EmptyVersion> {
        let raw = raw.into();
        if raw.is_empty() {
            Err(EmptyVersion)
        } else {
            Ok(VersionString(raw))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse(&self) -> ParsedVersion {
        parse_version(self)
    }

    pub fn is_snapshot(&self) -> bool {
        is_snapshot(&self.0)
    }
}

impl TryFrom<String> for VersionString {
    type Error = EmptyVersion;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        VersionString::new(value)
    }
}

impl TryFrom<&str> for VersionString {
    type Error = EmptyVersion;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        VersionString::new(value)
    }
}

impl From<VersionString> for String {
    fn from(v: VersionString) -> String {
        v.0
    }
}

impl fmt::Display for VersionString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for VersionString {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemverShape {
    /// `X.Y` optionally followed by a qualifier.
    Xy,
    /// `X.Y.Z` optionally followed by a qualifier.
    Xyz,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedVersion {
    pub raw: VersionString,
    pub numeric_parts: Vec<u64>,
    pub qualifier_parts: Vec<String>,
    pub is_snapshot: bool,
    pub semver_shape: SemverShape,
    items: Vec<Item>,
}

impl ParsedVersion {
    /// Compares under the Maven ordering. Equivalent to [`compare_versions`].
    pub fn compare(&self, other: &ParsedVersion) -> Ordering {
        compare_lists(&self.items, &other.items)
    }

    /// `X.Y.Z` with `X.Y` read as `X.Y.0`, for magnitude classification only.
    fn semver_triple(&self) -> Option<[u64; 3]> {
        match self.semver_shape {
            SemverShape::Xy => Some([self.numeric_parts[0], self.numeric_parts[1], 0]),
            SemverShape::Xyz => Some([self.numeric_parts[0], self.numeric_parts[1], self.numeric_parts[2]]),
            SemverShape::Other => None,
        }
    }
}

fn is_snapshot(raw: &str) -> bool {
    tokenize(raw).last().is_some_and(|t| t.eq_ignore_ascii_case("snapshot"))
}

/// Splits on `.`, `-`, `_` and letter/digit boundaries. Empty tokens vanish.
fn tokenize(raw: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start = 0;
    let mut prev_digit: Option<bool> = None;
    for (i, c) in raw.char_indices() {
        if matches!(c, '.' | '-' | '_') {
            if i > start {
                tokens.push(&raw[start..i]);
            }
            start = i + c.len_utf8();
            prev_digit = None;
            continue;
        }
        let digit = c.is_ascii_digit();
        if prev_digit.is_some_and(|p| p != digit) && i > start {
            tokens.push(&raw[start..i]);
            start = i;
        }
        prev_digit = Some(digit);
    }
    if start < raw.len() {
        tokens.push(&raw[start..]);
    }
    tokens
}

/// Counts the leading dot-separated integer groups: two is `X.Y`, three is
/// `X.Y.Z`, anything after the last group is a qualifier.
fn semver_shape(raw: &str) -> SemverShape {
    let bytes = raw.as_bytes();
    let mut groups = 0;
    let mut pos = 0;
    loop {
        let begin = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == begin {
            break;
        }
        groups += 1;
        if pos < bytes.len() && bytes[pos] == b'.' {
            pos += 1;
        } else {
            break;
        }
    }
    match groups {
        2 => SemverShape::Xy,
        3 => SemverShape::Xyz,
        _ => SemverShape::Other,
    }
}

/// Parses any string; never fails. Non-numeric strings produce empty
/// `numeric_parts` and [`SemverShape::Other`].
pub fn parse_version(raw: &VersionString) -> ParsedVersion {
    let text = raw.as_str();
    let mut numeric_parts = Vec::new();
    let mut qualifier_parts = Vec::new();
    let mut in_numeric = true;
    for token in tokenize(text) {
        if in_numeric && token.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(n) = token.parse::<u64>() {
                numeric_parts.push(n);
                continue;
            }
        }
        in_numeric = false;
        qualifier_parts.push(token.to_lowercase());
    }
    ParsedVersion {
        raw: raw.clone(),
        numeric_parts,
        qualifier_parts,
        is_snapshot: is_snapshot(text),
        semver_shape: semver_shape(text),
        items: comparable_items(text),
    }
}

/// Total order on versions (Maven `ComparableVersion` semantics).
pub fn compare_versions(a: &ParsedVersion, b: &ParsedVersion) -> Ordering {
    a.compare(b)
}

/// Convenience wrapper comparing two raw strings.
pub fn compare_raw(a: &str, b: &str) -> Ordering {
    compare_lists(&comparable_items(a), &comparable_items(b))
}

// --- ComparableVersion items -------------------------------------------------

const QUALIFIERS: [&str; 7] = ["alpha", "beta", "milestone", "rc", "snapshot", "", "sp"];
const RELEASE_RANK: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Item {
    /// Decimal digits with leading zeros stripped ("" is zero).
    Int(String),
    Str(String),
    List(Vec<Item>),
}

impl Item {
    fn int(digits: &str) -> Item {
        Item::Int(digits.trim_start_matches('0').to_string())
    }

    fn string(value: &str, followed_by_digit: bool) -> Item {
        let value = if followed_by_digit && value.len() == 1 {
            match value {
                "a" => "alpha",
                "b" => "beta",
                "m" => "milestone",
                other => other,
            }
        } else {
            value
        };
        let value = match value {
            "ga" | "final" | "release" => "",
            "cr" => "rc",
            other => other,
        };
        Item::Str(value.to_string())
    }

    fn is_null(&self) -> bool {
        match self {
            Item::Int(d) => d.is_empty(),
            Item::Str(s) => s.is_empty(),
            Item::List(l) => l.is_empty(),
        }
    }
}

fn parse_item(is_digit: bool, text: &str) -> Item {
    if is_digit {
        Item::int(text)
    } else {
        Item::string(text, false)
    }
}

/// Sorting key for a qualifier: known qualifiers by rank, unknown ones after
/// all known ranks and then lexically.
fn qualifier_key(q: &str) -> (usize, &str) {
    match QUALIFIERS.iter().position(|k| *k == q) {
        Some(rank) => (rank, ""),
        None => (QUALIFIERS.len(), q),
    }
}

fn compare_ints(a: &str, b: &str) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

fn compare_item(left: &Item, right: Option<&Item>) -> Ordering {
    match (left, right) {
        (Item::Int(d), None) => {
            if d.is_empty() {
                Ordering::Equal
            } else {
                Ordering::Greater
            }
        }
        (Item::Int(a), Some(Item::Int(b))) => compare_ints(a, b),
        (Item::Int(_), Some(_)) => Ordering::Greater,
        (Item::Str(s), None) => qualifier_key(s).cmp(&(RELEASE_RANK, "")),
        (Item::Str(_), Some(Item::Int(_))) => Ordering::Less,
        (Item::Str(a), Some(Item::Str(b))) => qualifier_key(a).cmp(&qualifier_key(b)),
        (Item::Str(_), Some(Item::List(_))) => Ordering::Less,
        (Item::List(items), None) => items
            .iter()
            .map(|i| compare_item(i, None))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal),
        (Item::List(_), Some(Item::Int(_))) => Ordering::Less,
        (Item::List(_), Some(Item::Str(_))) => Ordering::Greater,
        (Item::List(a), Some(Item::List(b))) => compare_lists(a, b),
    }
}

fn compare_lists(a: &[Item], b: &[Item]) -> Ordering {
    let len = a.len().max(b.len());
    for i in 0..len {
        let ord = match (a.get(i), b.get(i)) {
            (None, None) => Ordering::Equal,
            (None, Some(r)) => compare_item(r, None).reverse(),
            (Some(l), r) => compare_item(l, r),
        };
        if ord.is_ne() {
            return ord;
        }
    }
    Ordering::Equal
}

fn normalize(list: &mut Vec<Item>) {
    let mut i = list.len();
    while i > 0 {
        i -= 1;
        if list[i].is_null() {
            list.remove(i);
        } else if !matches!(list[i], Item::List(_)) {
            break;
        }
    }
}

fn comparable_items(version: &str) -> Vec<Item> {
    let version = version.to_lowercase();
    // stack[0] is the root list; each later entry is a nested list that will
    // become the last element of the entry below it.
    let mut stack: Vec<Vec<Item>> = vec![Vec::new()];
    let mut is_digit = false;
    let mut start = 0;

    for (i, c) in version.char_indices() {
        if c == '.' || c == '-' {
            let current = stack.last_mut().expect("stack never empty");
            if i == start {
                current.push(Item::Int(String::new()));
            } else {
                current.push(parse_item(is_digit, &version[start..i]));
            }
            start = i + 1;
            if c == '-' {
                stack.push(Vec::new());
            }
        } else if c.is_ascii_digit() {
            if !is_digit && i > start {
                let current = stack.last_mut().expect("stack never empty");
                current.push(Item::string(&version[start..i], true));
                start = i;
                stack.push(Vec::new());
            }
            is_digit = true;
        } else {
            if is_digit && i > start {
                let current = stack.last_mut().expect("stack never empty");
                current.push(parse_item(true, &version[start..i]));
                start = i;
                stack.push(Vec::new());
            }
            is_digit = false;
        }
    }
    if version.len() > start {
        let current = stack.last_mut().expect("stack never empty");
        current.push(parse_item(is_digit, &version[start..]));
    }

    while stack.len() > 1 {
        let mut inner = stack.pop().expect("len > 1");
        normalize(&mut inner);
        stack.last_mut().expect("len >= 1").push(Item::List(inner));
    }
    let mut root = stack.pop().expect("root list");
    normalize(&mut root);
    root
}

// --- update classification ---------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upgrade,
    Downgrade,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Major,
    Minor,
    Patch,
    ToSnapshot,
    FromSnapshot,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UpdateClass {
    pub direction: Direction,
    pub magnitude: Magnitude,
}

const RANKED_QUALIFIERS: [&str; 13] = [
    "alpha",
    "a",
    "beta",
    "b",
    "milestone",
    "m",
    "rc",
    "cr",
    "snapshot",
    "ga",
    "final",
    "release",
    "sp",
];

fn has_ranking(qualifiers: &[String]) -> bool {
    qualifiers
        .iter()
        .all(|q| q.bytes().all(|b| b.is_ascii_digit()) || RANKED_QUALIFIERS.contains(&q.as_str()))
}

fn numeric_tie(a: &[u64], b: &[u64]) -> bool {
    let len = a.len().max(b.len());
    (0..len).all(|i| a.get(i).copied().unwrap_or(0) == b.get(i).copied().unwrap_or(0))
}

/// Classifies a version change by direction and semantic-versioning magnitude.
///
/// Direction is unknown when the versions compare equal, or when their numeric
/// parts tie and they differ only in qualifiers that have no recognised rank
/// (e.g. `28.0-jre` vs `28.0-android`).
pub fn classify_update(from: &VersionString, to: &VersionString) -> UpdateClass {
    let a = parse_version(from);
    let b = parse_version(to);

    let unranked_tie = numeric_tie(&a.numeric_parts, &b.numeric_parts)
        && a.qualifier_parts != b.qualifier_parts
        && !(has_ranking(&a.qualifier_parts) && has_ranking(&b.qualifier_parts));
    let direction = if unranked_tie {
        Direction::Unknown
    } else {
        match a.compare(&b) {
            Ordering::Less => Direction::Upgrade,
            Ordering::Greater => Direction::Downgrade,
            Ordering::Equal => Direction::Unknown,
        }
    };

    let magnitude = if a.is_snapshot != b.is_snapshot {
        if b.is_snapshot {
            Magnitude::ToSnapshot
        } else {
            Magnitude::FromSnapshot
        }
    } else if direction == Direction::Unknown {
        Magnitude::Unknown
    } else {
        match (a.semver_triple(), b.semver_triple()) {
            (Some(x), Some(y)) if x[0] != y[0] => Magnitude::Major,
            (Some(x), Some(y)) if x[1] != y[1] => Magnitude::Minor,
            (Some(x), Some(y)) if x[2] != y[2] => Magnitude::Patch,
            _ => Magnitude::Unknown,
        }
    };

    UpdateClass { direction, magnitude }
}
