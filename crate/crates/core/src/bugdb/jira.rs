//! Jira issue metadata and the severe-bug filter.

use serde::{Deserialize, Serialize};

use super::{sort_versions, BugRecord, BugSource, Priority};
use crate::diag::Diagnostics;
use crate::manifest::Library;
use crate::registry::{Transport, TransportError};
use crate::version::VersionString;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Named {
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JiraFields {
    #[serde(default)]
    pub issuetype: Option<Named>,
    #[serde(default)]
    pub priority: Option<Named>,
    #[serde(default)]
    pub status: Option<Named>,
    #[serde(default)]
    pub resolution: Option<Named>,
    /// Affects-version field; `None` when the tracker omitted it.
    #[serde(default)]
    pub versions: Option<Vec<Named>>,
}

/// One issue as returned by the Jira search API.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JiraIssue {
    pub key: String,
    #[serde(default)]
    pub fields: JiraFields,
}

impl JiraIssue {
    pub fn new(
        key: &str,
        issuetype: &str,
        priority: &str,
        status: &str,
        resolution: &str,
        versions: Option<&[&str]>,
    ) -> Self {
        let named = |s: &str| Some(Named { name: s.to_string() });
        JiraIssue {
            key: key.to_string(),
            fields: JiraFields {
                issuetype: named(issuetype),
                priority: named(priority),
                status: named(status),
                resolution: named(resolution),
                versions: versions.map(|v| v.iter().map(|n| Named { name: n.to_string() }).collect()),
            },
        }
    }
}

fn is(field: &Option<Named>, want: &str) -> bool {
    field.as_ref().is_some_and(|n| n.name.trim().eq_ignore_ascii_case(want))
}

/// Keeps closed, fixed bugs of major, critical or blocker priority.
pub fn ingest_jira(issues: &[JiraIssue], library: &Library) -> (Vec<BugRecord>, Diagnostics) {
    let mut out = Vec::new();
    let mut diags = Diagnostics::new();
    for issue in issues {
        let f = &issue.fields;
        if !(is(&f.issuetype, "bug") && is(&f.status, "closed") && is(&f.resolution, "fixed")) {
            continue;
        }
        let Some(priority) = f.priority.as_ref().and_then(|p| Priority::parse(&p.name)) else {
            continue;
        };
        let mut versions: Vec<VersionString> = f
            .versions
            .iter()
            .flatten()
            .filter_map(|v| VersionString::new(v.name.trim()).ok())
            .collect();
        if versions.is_empty() {
            diags.push("missing_affected_versions", &issue.key, "issue skipped");
            continue;
        }
        sort_versions(&mut versions);
        out.push(BugRecord {
            issue_id: issue.key.clone(),
            priority,
            library: library.clone(),
            affected_versions: versions,
            buggy_methods: Default::default(),
            source: BugSource::Jira,
            methods_provenance: None,
        });
    }
    (out, diags)
}

#[derive(Debug, Clone)]
pub struct JiraConfig {
    /// Server root, e.g. `https://issues.apache.org/jira`.
    pub base_url: String,
    pub page_size: usize,
}

impl Default for JiraConfig {
    fn default() -> Self {
        JiraConfig {
            base_url: "https://issues.apache.org/jira".into(),
            page_size: 100,
        }
    }
}

#[derive(Deserialize)]
struct SearchPage {
    #[serde(default)]
    total: usize,
    #[serde(default)]
    issues: Vec<JiraIssue>,
}

fn encode(s: &str) -> String {
    let mut out = String::new();
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Pages through the search API for the project's closed, fixed bugs.
pub fn fetch_jira_issues(
    transport: &dyn Transport,
    config: &JiraConfig,
    project_key: &str,
) -> Result<Vec<JiraIssue>, TransportError> {
    let jql = format!(
        "project = \"{}\" AND issuetype = Bug AND status = Closed AND resolution = Fixed AND priority in (Major, Critical, Blocker)",
        project_key.replace('"', "")
    );
    let mut issues = Vec::new();
    loop {
        let url = format!(
            "{}/rest/api/2/search?jql={}&startAt={}&maxResults={}&fields=issuetype,priority,status,resolution,versions",
            config.base_url.trim_end_matches('/'),
            encode(&jql),
            issues.len(),
            config.page_size
        );
        let resp = transport.get(&url)?;
        if resp.status != 200 {
            return Err(TransportError(format!("HTTP {} from {url}", resp.status)));
        }
        let page: SearchPage =
            serde_json::from_slice(&resp.body).map_err(|e| TransportError(format!("bad search response: {e}")))?;
        let n = page.issues.len();
        issues.extend(page.issues);
        if n == 0 || issues.len() >= page.total {
            return Ok(issues);
        }
    }
}
