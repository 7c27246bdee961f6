use std::fmt;

use serde::{Deserialize, Serialize};

/// A non-fatal finding produced while analysing an input.
///
/// Diagnostics never abort a pipeline stage; they are collected and written
/// next to the stage's results so that excluded records can be audited.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Stable machine-readable code, e.g. `unresolved_property`.
    pub code: String,
    /// What the diagnostic is about (file path, library, method, ...).
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: &str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            code: code.to_string(),
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    pub fn new() -> Self {
        Diagnostics(Vec::new())
    }

    pub fn push(&mut self, code: &str, subject: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic::new(code, subject, message));
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.0.extend(other.0);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Diagnostic> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, code: &str) -> usize {
        self.0.iter().filter(|d| d.code == code).count()
    }

    pub fn has(&self, code: &str) -> bool {
        self.0.iter().any(|d| d.code == code)
    }

    /// Sorts and removes exact duplicates so output is independent of
    /// scheduling order.
    pub fn normalize(&mut self) {
        self.0.sort();
        self.0.dedup();
    }

    pub fn into_vec(self) -> Vec<Diagnostic> {
        self.0
    }
}

impl IntoIterator for Diagnostics {
    type Item = Diagnostic;
    type IntoIter = std::vec::IntoIter<Diagnostic>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a Diagnostics {
    type Item = &'a Diagnostic;
    type IntoIter = std::slice::Iter<'a, Diagnostic>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl FromIterator<Diagnostic> for Diagnostics {
    fn from_iter<T: IntoIterator<Item = Diagnostic>>(iter: T) -> Self {
        Diagnostics(iter.into_iter().collect())
    }
}
