//! `pom.xml` dependency extraction with property expansion, in-workspace
//! parent inheritance and `dependencyManagement` versions.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::tree::{join_normalized, parent_dir};
use super::{Declared, FileTree};
use crate::diag::Diagnostics;

const MAX_EXPANSION_DEPTH: usize = 16;

#[derive(Debug, Clone, Default)]
struct DepDecl {
    group_id: Option<String>,
    artifact_id: Option<String>,
    version: Option<String>,
    scope: Option<String>,
    optional: bool,
}

#[derive(Debug, Clone)]
struct ParentRef {
    group_id: Option<String>,
    artifact_id: Option<String>,
    version: Option<String>,
    relative_path: Option<String>,
}

#[derive(Debug, Clone, Default)]
struct Pom {
    path: String,
    group_id: Option<String>,
    artifact_id: Option<String>,
    version: Option<String>,
    parent: Option<ParentRef>,
    properties: BTreeMap<String, String>,
    managed: Vec<DepDecl>,
    dependencies: Vec<DepDecl>,
    has_profiles: bool,
}

impl Pom {
    fn effective_group(&self) -> Option<&str> {
        self.group_id
            .as_deref()
            .or_else(|| self.parent.as_ref().and_then(|p| p.group_id.as_deref()))
    }

    fn effective_version(&self) -> Option<&str> {
        self.version
            .as_deref()
            .or_else(|| self.parent.as_ref().and_then(|p| p.version.as_deref()))
    }
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn child_text(node: roxmltree::Node<'_, '_>, name: &str) -> Option<String> {
    child(node, name)
        .and_then(|c| c.text())
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
}

fn parse_dep(node: roxmltree::Node<'_, '_>) -> DepDecl {
    DepDecl {
        group_id: child_text(node, "groupId"),
        artifact_id: child_text(node, "artifactId"),
        version: child_text(node, "version"),
        scope: child_text(node, "scope"),
        optional: child_text(node, "optional").is_some_and(|o| o.eq_ignore_ascii_case("true")),
    }
}

fn parse_deps(container: Option<roxmltree::Node<'_, '_>>) -> Vec<DepDecl> {
    container
        .and_then(|c| child(c, "dependencies"))
        .map(|deps| {
            deps.children()
                .filter(|n| n.is_element() && n.tag_name().name() == "dependency")
                .map(parse_dep)
                .collect()
        })
        .unwrap_or_default()
}

fn parse_pom(path: &str, text: &str) -> Result<Pom, String> {
    let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.tag_name().name() != "project" {
        return Err(format!(
            "root element is <{}>, expected <project>",
            root.tag_name().name()
        ));
    }
    let parent = child(root, "parent").map(|p| ParentRef {
        group_id: child_text(p, "groupId"),
        artifact_id: child_text(p, "artifactId"),
        version: child_text(p, "version"),
        relative_path: child(p, "relativePath").map(|n| n.text().unwrap_or("").trim().to_string()),
    });
    let properties = child(root, "properties")
        .map(|props| {
            props
                .children()
                .filter(|n| n.is_element())
                .map(|n| {
                    (
                        n.tag_name().name().to_string(),
                        n.text().unwrap_or("").trim().to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(Pom {
        path: path.to_string(),
        group_id: child_text(root, "groupId"),
        artifact_id: child_text(root, "artifactId"),
        version: child_text(root, "version"),
        parent,
        properties,
        managed: parse_deps(child(root, "dependencyManagement")),
        dependencies: parse_deps(Some(root)),
        has_profiles: child(root, "profiles").is_some_and(|p| p.children().any(|c| c.is_element())),
    })
}

struct Workspace {
    poms: BTreeMap<String, Pom>,
    /// Parent path for each pom whose parent lives in the workspace.
    parents: HashMap<String, String>,
}

impl Workspace {
    fn new(poms: BTreeMap<String, Pom>, diagnostics: &mut Diagnostics) -> Self {
        let mut by_coord: HashMap<(String, String), Vec<String>> = HashMap::new();
        for pom in poms.values() {
            if let (Some(g), Some(a)) = (pom.effective_group(), pom.artifact_id.as_deref()) {
                by_coord
                    .entry((g.to_string(), a.to_string()))
                    .or_default()
                    .push(pom.path.clone());
            }
        }
        let mut parents = HashMap::new();
        for pom in poms.values() {
            let Some(parent) = &pom.parent else { continue };
            let wanted = (
                parent.group_id.clone().unwrap_or_default(),
                parent.artifact_id.clone().unwrap_or_default(),
            );
            let matches = |p: &Pom| {
                p.effective_group() == Some(wanted.0.as_str()) && p.artifact_id.as_deref() == Some(wanted.1.as_str())
            };
            let relative = parent.relative_path.as_deref().unwrap_or("../pom.xml");
            let mut found = None;
            if !relative.is_empty() {
                let rel = if relative.ends_with(".xml") {
                    relative.to_string()
                } else {
                    format!("{}/pom.xml", relative.trim_end_matches('/'))
                };
                if let Some(candidate) = join_normalized(parent_dir(&pom.path), &rel) {
                    if candidate != pom.path && poms.get(&candidate).is_some_and(matches) {
                        found = Some(candidate);
                    }
                }
            }
            if found.is_none() {
                found = by_coord
                    .get(&wanted)
                    .and_then(|paths| paths.iter().find(|p| **p != pom.path).cloned());
            }
            match found {
                Some(path) => {
                    parents.insert(pom.path.clone(), path);
                }
                None => diagnostics.push(
                    "remote_parent",
                    &pom.path,
                    format!(
                        "parent {}:{} is outside the workspace; inherited properties and managed versions unavailable",
                        wanted.0, wanted.1
                    ),
                ),
            }
        }
        Workspace { poms, parents }
    }

    /// The pom followed by its in-workspace ancestors.
    fn chain(&self, path: &str) -> Vec<&Pom> {
        let mut out = Vec::new();
        let mut current = Some(path.to_string());
        while let Some(p) = current {
            if out.iter().any(|pom: &&Pom| pom.path == p) {
                break;
            }
            let Some(pom) = self.poms.get(&p) else { break };
            out.push(pom);
            current = self.parents.get(&p).cloned();
        }
        out
    }
}

/// Property resolution in the context of one pom (Maven's effective model:
/// the child's values override inherited ones).
struct Context<'w> {
    chain: Vec<&'w Pom>,
}

impl<'w> Context<'w> {
    fn this(&self) -> &'w Pom {
        self.chain[0]
    }

    fn lookup(&self, name: &str) -> Option<(String, String)> {
        let pom = self.this();
        let builtin = match name {
            "project.version" | "pom.version" | "version" => pom.effective_version().map(str::to_string),
            "project.groupId" | "pom.groupId" | "groupId" => pom.effective_group().map(str::to_string),
            "project.artifactId" | "pom.artifactId" | "artifactId" => pom.artifact_id.clone(),
            "project.parent.version" | "parent.version" => pom.parent.as_ref().and_then(|p| p.version.clone()),
            "project.parent.groupId" | "parent.groupId" => pom.parent.as_ref().and_then(|p| p.group_id.clone()),
            _ => None,
        };
        if let Some(value) = builtin {
            return Some((value, pom.path.clone()));
        }
        self.chain
            .iter()
            .find_map(|p| p.properties.get(name).map(|v| (v.clone(), p.path.clone())))
    }

    /// Expands `${...}` references. Unresolvable references are left in place.
    fn expand(&self, text: &str, provenance: &mut Vec<String>) -> String {
        let mut current = text.to_string();
        for _ in 0..MAX_EXPANSION_DEPTH {
            let Some(start) = current.find("${") else { break };
            let Some(len) = current[start..].find('}') else { break };
            let name = current[start + 2..start + len].to_string();
            match self.lookup(&name) {
                Some((value, from)) => {
                    provenance.push(format!("${{{name}}} = {value} ({from})"));
                    current.replace_range(start..start + len + 1, &value);
                }
                None => break,
            }
        }
        current
    }

    fn managed_version(&self, group: &str, artifact: &str) -> Option<(String, Vec<String>)> {
        for pom in &self.chain {
            for m in &pom.managed {
                if m.scope.as_deref() == Some("import") {
                    continue;
                }
                let mut prov = Vec::new();
                let mg = m.group_id.as_deref().map(|g| self.expand(g, &mut prov));
                let ma = m.artifact_id.as_deref().map(|a| self.expand(a, &mut prov));
                if mg.as_deref() == Some(group) && ma.as_deref() == Some(artifact) {
                    let Some(v) = &m.version else { continue };
                    let version = self.expand(v, &mut prov);
                    prov.insert(0, format!("managed version from {}", pom.path));
                    return Some((version, prov));
                }
            }
        }
        None
    }
}

pub(super) fn extract(tree: &dyn FileTree, paths: &[String], diagnostics: &mut Diagnostics) -> Vec<Declared> {
    let parsed: Vec<(String, Result<Pom, String>)> = paths
        .par_iter()
        .map(|path| {
            let result = tree.read(path).map_err(|e| e.to_string()).and_then(|bytes| {
                let text = String::from_utf8_lossy(&bytes);
                parse_pom(path, &text)
            });
            (path.clone(), result)
        })
        .collect();

    let mut poms = BTreeMap::new();
    for (path, result) in parsed {
        match result {
            Ok(pom) => {
                poms.insert(path, pom);
            }
            Err(e) => diagnostics.push("malformed_pom", &path, e),
        }
    }

    let workspace = Workspace::new(poms, diagnostics);
    let mut out = Vec::new();
    for pom in workspace.poms.values() {
        if pom.has_profiles {
            diagnostics.push(
                "profiles_ignored",
                &pom.path,
                "dependencies declared in profiles are not analysed",
            );
        }
        if pom.managed.iter().any(|m| m.scope.as_deref() == Some("import")) {
            diagnostics.push("bom_import_ignored", &pom.path, "imported BOMs are not resolved");
        }
        let ctx = Context {
            chain: workspace.chain(&pom.path),
        };
        for dep in &pom.dependencies {
            let mut provenance = Vec::new();
            let group = dep.group_id.as_deref().map(|g| ctx.expand(g, &mut provenance));
            let artifact = dep.artifact_id.as_deref().map(|a| ctx.expand(a, &mut provenance));
            let (Some(group), Some(artifact)) = (group, artifact) else {
                diagnostics.push(
                    "incomplete_dependency",
                    &pom.path,
                    "dependency without groupId or artifactId",
                );
                continue;
            };
            if group.contains("${") || artifact.contains("${") {
                diagnostics.push(
                    "unresolved_property",
                    &pom.path,
                    format!("{group}:{artifact} has unresolved coordinates"),
                );
                continue;
            }
            if dep.scope.as_deref() == Some("import") {
                continue;
            }
            let version = match &dep.version {
                Some(v) => ctx.expand(v, &mut provenance),
                None => match ctx.managed_version(&group, &artifact) {
                    Some((v, prov)) => {
                        provenance.extend(prov);
                        v
                    }
                    None => {
                        diagnostics.push(
                            "unversioned_dependency",
                            &pom.path,
                            format!("{group}:{artifact} has no declared or managed version"),
                        );
                        continue;
                    }
                },
            };
            out.push(Declared {
                config_file: pom.path.clone(),
                group,
                name: artifact,
                version,
                test_scope: dep.scope.as_deref() == Some("test"),
                optional: dep.optional,
                provenance,
            });
        }
    }
    out
}
