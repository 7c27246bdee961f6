//! Mapping fix patches onto the methods they change.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bytecode::MemberRef;
use crate::diag::Diagnostics;

/// Inclusive source line span of one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpan {
    pub method: MemberRef,
    pub start: u32,
    pub end: u32,
}

/// Source path to method spans, for the pre-fix revision.
pub type ClassIndex = BTreeMap<String, Vec<MethodSpan>>;

struct Hunk {
    /// Old-side lines removed or replaced.
    removed: Vec<u32>,
    /// Old-side line after which new lines were inserted (0 = file start).
    inserted_after: Vec<u32>,
}

fn strip_prefix(path: &str) -> &str {
    let path = path.split('\t').next().unwrap_or(path).trim();
    path.strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path)
}

fn parse_range(s: &str) -> Option<u32> {
    s.trim_start_matches(['-', '+']).split(',').next()?.parse().ok()
}

fn parse_diff(diff: &str) -> Vec<(String, Vec<Hunk>)> {
    let mut files: Vec<(String, Vec<Hunk>)> = Vec::new();
    let mut old_line = 0u32;
    let mut lines = diff.lines().peekable();
    while let Some(line) = lines.next() {
        if let Some(p) = line.strip_prefix("--- ") {
            if lines.peek().is_some_and(|n| n.starts_with("+++ ")) {
                let old = strip_prefix(p).to_string();
                let new = strip_prefix(&lines.next().unwrap()[4..]).to_string();
                let path = if old == "/dev/null" { new } else { old };
                files.push((path, Vec::new()));
                continue;
            }
        }
        if let Some(rest) = line.strip_prefix("@@ ") {
            let old = rest.split_whitespace().next().and_then(parse_range).unwrap_or(1);
            // A zero-length old range starts after line `old`.
            let empty_old = rest.split_whitespace().next().is_some_and(|r| r.ends_with(",0"));
            old_line = if empty_old { old + 1 } else { old };
            if let Some((_, hunks)) = files.last_mut() {
                hunks.push(Hunk {
                    removed: Vec::new(),
                    inserted_after: Vec::new(),
                });
            }
            continue;
        }
        let Some(hunk) = files.last_mut().and_then(|(_, h)| h.last_mut()) else {
            continue;
        };
        match line.as_bytes().first() {
            Some(b'-') => {
                hunk.removed.push(old_line);
                old_line += 1;
            }
            Some(b'+') => hunk.inserted_after.push(old_line.saturating_sub(1)),
            Some(b'\\') => {}
            _ => old_line += 1,
        }
    }
    files
}

/// Methods of the pre-fix source whose span a hunk touches: a removed line
/// inside the span, or an insertion strictly between its first and last line.
pub fn buggy_methods_from_patch(diff: &str, class_index: &ClassIndex) -> (BTreeSet<MemberRef>, Diagnostics) {
    let mut out = BTreeSet::new();
    let mut diags = Diagnostics::new();
    for (path, hunks) in parse_diff(diff) {
        let Some(spans) = class_index.get(&path) else {
            if !hunks.is_empty() {
                diags.push("unindexed_file", &path, format!("{} hunk(s) skipped", hunks.len()));
            }
            continue;
        };
        for h in &hunks {
            for s in spans {
                let removed = h.removed.iter().any(|&l| l >= s.start && l <= s.end);
                let inserted = h.inserted_after.iter().any(|&l| l >= s.start && l < s.end);
                if removed || inserted {
                    out.insert(s.method.clone());
                }
            }
        }
    }
    (out, diags)
}
