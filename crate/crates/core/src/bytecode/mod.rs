//! Class-file analysis: library API surfaces, project call sites, call
//! graphs and body fingerprints.

pub mod builder;
pub mod classfile;
pub mod insn;
pub mod jar;
pub mod model;
pub mod rewrite;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::diag::Diagnostics;
use crate::manifest::{LibraryVersionRef, SourceSet};
use crate::registry::ArtifactHandle;

use classfile::*;
pub use model::{method_fingerprint, ClassModel, Digest, MemberRef, MethodFingerprint};

/// Method or field identity within a scope: owner, name, descriptor.
pub type MethodId = MemberRef;

impl fmt::Display for MemberRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}:{}", self.owner, self.name, self.descriptor)
    }
}

impl MemberRef {
    pub fn new(owner: impl Into<String>, name: impl Into<String>, descriptor: impl Into<String>) -> Self {
        MemberRef {
            owner: owner.into(),
            name: name.into(),
            descriptor: descriptor.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BytecodeError {
    #[error("{subject} is corrupt: {message}")]
    Corrupt { subject: String, message: String },
    #[error("{0} is not in the analyzed scope")]
    NotInScope(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiKind {
    Method,
    Field,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApiElement {
    pub owner_class: String,
    pub member_name: String,
    pub descriptor: String,
    pub kind: ApiKind,
    pub version_ref: LibraryVersionRef,
}

impl ApiElement {
    pub fn member(&self) -> MemberRef {
        MemberRef::new(&self.owner_class, &self.member_name, &self.descriptor)
    }
}

impl fmt::Display for ApiElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}:{}", self.owner_class, self.member_name, self.descriptor)
    }
}

// --- descriptors -----------------------------------------------------------

fn field_type(s: &[u8], mut i: usize) -> Option<usize> {
    while s.get(i) == Some(&b'[') {
        i += 1;
    }
    match s.get(i)? {
        b'B' | b'C' | b'D' | b'F' | b'I' | b'J' | b'S' | b'Z' => Some(i + 1),
        b'L' => {
            let end = i + 1 + s[i + 1..].iter().position(|&c| c == b';')?;
            (end > i + 1).then_some(end + 1)
        }
        _ => None,
    }
}

pub fn is_field_descriptor(d: &str) -> bool {
    field_type(d.as_bytes(), 0) == Some(d.len())
}

pub fn is_method_descriptor(d: &str) -> bool {
    let s = d.as_bytes();
    if s.first() != Some(&b'(') {
        return false;
    }
    let mut i = 1;
    while s.get(i).is_some_and(|&c| c != b')') {
        match field_type(s, i) {
            Some(next) => i = next,
            None => return false,
        }
    }
    if s.get(i) != Some(&b')') {
        return false;
    }
    i += 1;
    if s.get(i) == Some(&b'V') {
        return i + 1 == s.len();
    }
    field_type(s, i) == Some(s.len())
}

// --- loading ---------------------------------------------------------------

#[derive(Debug, Default)]
pub struct LoadedClasses {
    pub classes: Vec<ClassModel>,
    pub resource_entries: usize,
    pub diagnostics: Diagnostics,
}

fn parse_entries(entries: jar::ClassEntries, subject: &str) -> LoadedClasses {
    let results: Vec<(String, Result<ClassModel, ClassFileError>)> = entries
        .entries
        .into_par_iter()
        .map(|(name, bytes)| {
            let parsed = ClassModel::parse(&bytes);
            (name, parsed)
        })
        .collect();
    let mut out = LoadedClasses {
        resource_entries: entries.resource_entries,
        diagnostics: entries.diagnostics,
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for (name, result) in results {
        match result {
            Ok(class) => {
                if class.major_version > MAX_MAJOR {
                    out.diagnostics.push(
                        "class_version_best_effort",
                        format!("{subject}!{name}"),
                        format!("major version {} parsed best-effort", class.major_version),
                    );
                }
                if seen.insert(class.name.clone()) {
                    out.classes.push(class);
                } else {
                    out.diagnostics
                        .push("duplicate_class", format!("{subject}!{name}"), "ignored");
                }
            }
            Err(e) => out
                .diagnostics
                .push("unreadable_class", format!("{subject}!{name}"), e.to_string()),
        }
    }
    out.classes.sort_by(|a, b| a.name.cmp(&b.name));
    out.diagnostics.normalize();
    out
}

pub fn load_jar_bytes(bytes: &[u8], subject: &str) -> Result<LoadedClasses, BytecodeError> {
    let entries = jar::read_jar(bytes, subject).map_err(|e| BytecodeError::Corrupt {
        subject: subject.to_string(),
        message: e.to_string(),
    })?;
    Ok(parse_entries(entries, subject))
}

/// Loads a jar file or a directory of class files.
pub fn load_classes(path: &Path) -> Result<LoadedClasses, BytecodeError> {
    let subject = path.display().to_string();
    if path.is_dir() {
        Ok(parse_entries(jar::read_class_dir(path)?, &subject))
    } else {
        load_jar_bytes(&std::fs::read(path)?, &subject)
    }
}

pub fn load_artifact(handle: &ArtifactHandle) -> Result<LoadedClasses, BytecodeError> {
    load_jar_bytes(&handle.read()?, &handle.version_ref.to_string())
}

// --- APIs --------------------------------------------------------------------

/// Public, non-synthetic methods (except bridges and static initializers)
/// and public, non-synthetic fields of exported classes.
pub fn apis_of(classes: &[ClassModel], version_ref: &LibraryVersionRef) -> BTreeSet<ApiElement> {
    let mut out = BTreeSet::new();
    for class in classes.iter().filter(|c| c.is_exported()) {
        let element = |name: &str, descriptor: &str, kind| ApiElement {
            owner_class: class.name.clone(),
            member_name: name.to_string(),
            descriptor: descriptor.to_string(),
            kind,
            version_ref: version_ref.clone(),
        };
        for m in &class.methods {
            if m.is(ACC_PUBLIC) && !m.is(ACC_SYNTHETIC) && !m.is(ACC_BRIDGE) && m.name != "<clinit>" {
                out.insert(element(&m.name, &m.descriptor, ApiKind::Method));
            }
        }
        for f in &class.fields {
            if f.access & ACC_PUBLIC != 0 && f.access & ACC_SYNTHETIC == 0 {
                out.insert(element(&f.name, &f.descriptor, ApiKind::Field));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct ApiSet {
    pub elements: BTreeSet<ApiElement>,
    pub diagnostics: Diagnostics,
}

pub fn extract_apis(artifact: &ArtifactHandle) -> Result<ApiSet, BytecodeError> {
    let loaded = load_artifact(artifact)?;
    Ok(ApiSet {
        elements: apis_of(&loaded.classes, &artifact.version_ref),
        diagnostics: loaded.diagnostics,
    })
}

// --- project calls -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProjectMethod {
    pub project_id: String,
    pub owner_class: String,
    pub member_name: String,
    pub descriptor: String,
    pub source_set: SourceSet,
}

impl fmt::Display for ProjectMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}:{}", self.owner_class, self.member_name, self.descriptor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApiCall {
    pub callee: ApiElement,
    pub caller: ProjectMethod,
    pub site_count: u32,
}

/// Library APIs a project may call, with the libraries' class hierarchy for
/// resolving references through subclasses.
#[derive(Debug, Clone, Default)]
pub struct ApiUniverse {
    by_member: HashMap<(ApiKind, MemberRef), Vec<ApiElement>>,
    supertypes: HashMap<String, Vec<String>>,
}

fn supertypes_of(class: &ClassModel) -> Vec<String> {
    class
        .super_name
        .iter()
        .chain(class.interfaces.iter())
        .cloned()
        .collect()
}

impl ApiUniverse {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_apis<'a>(&mut self, apis: impl IntoIterator<Item = &'a ApiElement>) {
        for a in apis {
            let list = self.by_member.entry((a.kind, a.member())).or_default();
            if !list.contains(a) {
                list.push(a.clone());
            }
        }
    }

    pub fn add_hierarchy(&mut self, classes: &[ClassModel]) {
        for c in classes {
            self.supertypes
                .entry(c.name.clone())
                .or_insert_with(|| supertypes_of(c));
        }
    }

    pub fn len(&self) -> usize {
        self.by_member.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_member.is_empty()
    }

    /// Elements a reference resolves to: an exact match, else the nearest
    /// match found walking supertypes breadth-first. Constructors are never
    /// inherited.
    fn resolve(
        &self,
        kind: ApiKind,
        target: &MemberRef,
        project: &HashMap<&str, Vec<String>>,
    ) -> Option<&Vec<ApiElement>> {
        if let Some(hit) = self.by_member.get(&(kind, target.clone())) {
            return Some(hit);
        }
        if target.name == "<init>" {
            return None;
        }
        let mut queue: VecDeque<String> = VecDeque::new();
        let mut seen: HashSet<String> = HashSet::new();
        let push_supers = |c: &str, queue: &mut VecDeque<String>| {
            if let Some(s) = project.get(c) {
                queue.extend(s.iter().cloned());
            } else if let Some(s) = self.supertypes.get(c) {
                queue.extend(s.iter().cloned());
            }
        };
        push_supers(&target.owner, &mut queue);
        while let Some(c) = queue.pop_front() {
            if !seen.insert(c.clone()) {
                continue;
            }
            let probe = MemberRef::new(&c, &target.name, &target.descriptor);
            if let Some(hit) = self.by_member.get(&(kind, probe)) {
                return Some(hit);
            }
            push_supers(&c, &mut queue);
        }
        None
    }
}

#[derive(Debug, Clone, Default)]
pub struct CallExtraction {
    pub methods: BTreeSet<ProjectMethod>,
    pub calls: Vec<ApiCall>,
    pub diagnostics: Diagnostics,
}

/// Project methods (everything except bridge methods) and their calls into
/// the universe. Field reads and writes count as call sites of field APIs.
pub fn extract_calls(project_id: &str, classes: &[(ClassModel, SourceSet)], universe: &ApiUniverse) -> CallExtraction {
    let project_supers: HashMap<&str, Vec<String>> = classes
        .iter()
        .map(|(c, _)| (c.name.as_str(), supertypes_of(c)))
        .collect();

    let per_class: Vec<(
        Vec<ProjectMethod>,
        HashMap<(ApiElement, ProjectMethod), u32>,
        Diagnostics,
    )> = classes
        .par_iter()
        .map(|(class, source_set)| {
            let mut methods = Vec::new();
            let mut counts: HashMap<(ApiElement, ProjectMethod), u32> = HashMap::new();
            let mut diagnostics = Diagnostics::new();
            for m in class.methods.iter().filter(|m| !m.is(ACC_BRIDGE)) {
                let caller = ProjectMethod {
                    project_id: project_id.to_string(),
                    owner_class: class.name.clone(),
                    member_name: m.name.clone(),
                    descriptor: m.descriptor.clone(),
                    source_set: *source_set,
                };
                for problem in &m.unresolved {
                    diagnostics.push("unresolved_reference", caller.to_string(), problem.clone());
                }
                for r in &m.refs {
                    let (kind, well_formed) = if (insn::op::GETSTATIC..=insn::op::PUTFIELD).contains(&r.opcode) {
                        (ApiKind::Field, is_field_descriptor(&r.target.descriptor))
                    } else {
                        (ApiKind::Method, is_method_descriptor(&r.target.descriptor))
                    };
                    if !well_formed {
                        diagnostics.push("bad_descriptor", caller.to_string(), r.target.to_string());
                        continue;
                    }
                    if let Some(hits) = universe.resolve(kind, &r.target, &project_supers) {
                        for callee in hits {
                            *counts.entry((callee.clone(), caller.clone())).or_default() += 1;
                        }
                    }
                }
                methods.push(caller);
            }
            (methods, counts, diagnostics)
        })
        .collect();

    let mut out = CallExtraction::default();
    let mut counts: HashMap<(ApiElement, ProjectMethod), u32> = HashMap::new();
    for (methods, c, d) in per_class {
        out.methods.extend(methods);
        for (k, n) in c {
            *counts.entry(k).or_default() += n;
        }
        out.diagnostics.extend(d);
    }
    out.calls = counts
        .into_iter()
        .map(|((callee, caller), site_count)| ApiCall {
            callee,
            caller,
            site_count,
        })
        .collect();
    out.calls.sort();
    out.diagnostics.normalize();
    out
}

// --- call graphs -------------------------------------------------------------

/// Class-hierarchy-analysis call graph over one jar, with body fingerprints
/// for every node and declaration digests for every field.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "GraphRepr", try_from = "GraphRepr")]
pub struct CallGraph {
    pub scope: Vec<String>,
    pub nodes: BTreeSet<MethodId>,
    pub edges: BTreeMap<MethodId, BTreeSet<MethodId>>,
    pub fingerprints: BTreeMap<MethodId, MethodFingerprint>,
    pub fields: BTreeMap<MethodId, Digest>,
    /// Overrides in subtypes that a virtual call to the key may dispatch to.
    pub dispatch: BTreeMap<MethodId, BTreeSet<MethodId>>,
    pub diagnostics: Diagnostics,
}

impl CallGraph {
    pub fn callees(&self, m: &MethodId) -> impl Iterator<Item = &MethodId> {
        self.edges.get(m).into_iter().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    /// `from` and everything reachable from it.
    pub fn reachable(&self, from: &MethodId) -> BTreeSet<MethodId> {
        self.reachable_from([from.clone()])
    }

    /// Methods a call to `m` from outside the scope may run first: `m` and
    /// its overrides.
    pub fn entry_targets(&self, m: &MethodId) -> BTreeSet<MethodId> {
        let mut out: BTreeSet<MethodId> = self.dispatch.get(m).cloned().unwrap_or_default();
        out.insert(m.clone());
        out
    }

    /// Everything reachable from a call to `m` from outside the scope.
    pub fn reachable_by_call(&self, m: &MethodId) -> BTreeSet<MethodId> {
        self.reachable_from(self.entry_targets(m))
    }

    fn reachable_from(&self, from: impl IntoIterator<Item = MethodId>) -> BTreeSet<MethodId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<MethodId> = from.into_iter().collect();
        while let Some(m) = stack.pop() {
            if !seen.insert(m.clone()) {
                continue;
            }
            stack.extend(self.callees(&m).filter(|c| !seen.contains(*c)).cloned());
        }
        seen
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRepr {
    owner: String,
    name: String,
    descriptor: String,
    fingerprint: MethodFingerprint,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    owner: String,
    name: String,
    descriptor: String,
    digest: Digest,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    scope: Vec<String>,
    nodes: Vec<NodeRepr>,
    edges: Vec<(usize, usize)>,
    #[serde(default)]
    dispatch: Vec<(usize, usize)>,
    fields: Vec<FieldRepr>,
    #[serde(default)]
    diagnostics: Diagnostics,
}

impl From<CallGraph> for GraphRepr {
    fn from(g: CallGraph) -> Self {
        let index: HashMap<&MethodId, usize> = g.nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let edges = g
            .edges
            .iter()
            .flat_map(|(from, tos)| tos.iter().map(|to| (index[from], index[to])))
            .collect();
        let dispatch = g
            .dispatch
            .iter()
            .flat_map(|(from, tos)| tos.iter().map(|to| (index[from], index[to])))
            .collect();
        GraphRepr {
            scope: g.scope.clone(),
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeRepr {
                    owner: n.owner.clone(),
                    name: n.name.clone(),
                    descriptor: n.descriptor.clone(),
                    fingerprint: g.fingerprints.get(n).copied().unwrap_or_else(Digest::empty),
                })
                .collect(),
            edges,
            dispatch,
            fields: g
                .fields
                .iter()
                .map(|(f, d)| FieldRepr {
                    owner: f.owner.clone(),
                    name: f.name.clone(),
                    descriptor: f.descriptor.clone(),
                    digest: *d,
                })
                .collect(),
            diagnostics: g.diagnostics.clone(),
        }
    }
}

impl TryFrom<GraphRepr> for CallGraph {
    type Error = String;

    fn try_from(r: GraphRepr) -> Result<Self, String> {
        let ids: Vec<MethodId> = r
            .nodes
            .iter()
            .map(|n| MemberRef::new(&n.owner, &n.name, &n.descriptor))
            .collect();
        let mut g = CallGraph {
            scope: r.scope,
            diagnostics: r.diagnostics,
            ..Default::default()
        };
        for (id, n) in ids.iter().zip(&r.nodes) {
            g.nodes.insert(id.clone());
            g.fingerprints.insert(id.clone(), n.fingerprint);
        }
        for (a, b) in r.edges {
            let (Some(from), Some(to)) = (ids.get(a), ids.get(b)) else {
                return Err(format!("edge ({a}, {b}) refers to a missing node"));
            };
            g.edges.entry(from.clone()).or_default().insert(to.clone());
        }
        for (a, b) in r.dispatch {
            let (Some(from), Some(to)) = (ids.get(a), ids.get(b)) else {
                return Err(format!("dispatch ({a}, {b}) refers to a missing node"));
            };
            g.dispatch.entry(from.clone()).or_default().insert(to.clone());
        }
        for f in r.fields {
            g.fields.insert(MemberRef::new(f.owner, f.name, f.descriptor), f.digest);
        }
        Ok(g)
    }
}

fn field_digest(descriptor: &str, access: u16) -> Digest {
    Digest::of(format!("field {descriptor} {access:04x}").as_bytes())
}

enum Resolved {
    InScope(MethodId),
    External,
    Missing,
}

struct Hierarchy<'a> {
    classes: HashMap<&'a str, &'a ClassModel>,
    subtypes: HashMap<&'a str, Vec<&'a str>>,
}

impl<'a> Hierarchy<'a> {
    fn new(classes: &'a [ClassModel]) -> Self {
        let mut subtypes: HashMap<&str, Vec<&str>> = HashMap::new();
        for c in classes {
            for s in c.super_name.iter().chain(c.interfaces.iter()) {
                subtypes.entry(s.as_str()).or_default().push(c.name.as_str());
            }
        }
        Hierarchy {
            classes: classes.iter().map(|c| (c.name.as_str(), c)).collect(),
            subtypes,
        }
    }

    fn all_subtypes(&self, class: &str) -> Vec<&'a ClassModel> {
        let mut seen: HashSet<&str> = HashSet::new();
        let mut stack: Vec<&str> = self.subtypes.get(class).cloned().unwrap_or_default();
        let mut out = Vec::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            if let Some(m) = self.classes.get(c) {
                out.push(*m);
            }
            if let Some(s) = self.subtypes.get(c) {
                stack.extend(s.iter().copied());
            }
        }
        out
    }

    /// Non-abstract instance overrides of `owner.name:desc` in subtypes.
    fn overrides(&self, owner: &str, name: &str, descriptor: &str) -> BTreeSet<MethodId> {
        let mut out = BTreeSet::new();
        for sub in self.all_subtypes(owner) {
            if let Some(o) = sub.method(name, descriptor) {
                if !o.is(ACC_ABSTRACT) && !o.is(ACC_STATIC) {
                    out.insert(MemberRef::new(&sub.name, &o.name, &o.descriptor));
                }
            }
        }
        out
    }

    /// JVM-style resolution: the superclass chain first, then
    /// superinterfaces (preferring a default method over an abstract one).
    fn resolve(&self, target: &MemberRef) -> Resolved {
        if !self.classes.contains_key(target.owner.as_str()) {
            return Resolved::External;
        }
        let mut boundary = false;
        let mut chain = Vec::new();
        let mut current = Some(target.owner.as_str());
        while let Some(name) = current {
            let Some(class) = self.classes.get(name) else {
                boundary = true;
                break;
            };
            if class.method(&target.name, &target.descriptor).is_some() {
                return Resolved::InScope(MemberRef::new(name, &target.name, &target.descriptor));
            }
            chain.push(*class);
            current = class.super_name.as_deref();
        }
        let mut abstract_hit = None;
        let mut seen = HashSet::new();
        let mut queue: VecDeque<&str> = chain
            .iter()
            .flat_map(|c| c.interfaces.iter().map(String::as_str))
            .collect();
        while let Some(name) = queue.pop_front() {
            if !seen.insert(name) {
                continue;
            }
            let Some(class) = self.classes.get(name) else {
                boundary = true;
                continue;
            };
            if let Some(m) = class.method(&target.name, &target.descriptor) {
                let id = MemberRef::new(name, &target.name, &target.descriptor);
                if !m.is(ACC_ABSTRACT) {
                    return Resolved::InScope(id);
                }
                abstract_hit.get_or_insert(id);
            }
            queue.extend(class.interfaces.iter().map(String::as_str));
        }
        match abstract_hit {
            Some(id) => Resolved::InScope(id),
            None if boundary => Resolved::External,
            None => Resolved::Missing,
        }
    }
}

/// Builds the call graph of the given classes. Static and special calls get
/// one edge to the resolved method; virtual and interface calls also get an
/// edge to every non-abstract override in a subtype of the reference owner.
pub fn call_graph_of(classes: &[ClassModel], scope: Vec<String>) -> CallGraph {
    let h = Hierarchy::new(classes);
    type Node = (MethodId, MethodFingerprint, BTreeSet<MethodId>, BTreeSet<MethodId>);
    let per_class: Vec<(Vec<Node>, Vec<(MethodId, Digest)>, Diagnostics)> = classes
        .par_iter()
        .map(|class| {
            let mut diagnostics = Diagnostics::new();
            let mut methods = Vec::new();
            for m in &class.methods {
                let id = MemberRef::new(&class.name, &m.name, &m.descriptor);
                let mut targets = BTreeSet::new();
                for r in m.refs.iter().filter(|r| r.opcode >= insn::op::INVOKEVIRTUAL) {
                    let resolved = h.resolve(&r.target);
                    let mut found = false;
                    if let Resolved::InScope(t) = &resolved {
                        targets.insert(t.clone());
                        found = true;
                    }
                    if matches!(r.opcode, insn::op::INVOKEVIRTUAL | insn::op::INVOKEINTERFACE) {
                        let o = h.overrides(&r.target.owner, &r.target.name, &r.target.descriptor);
                        found |= !o.is_empty();
                        targets.extend(o);
                    }
                    if !found {
                        let code = match resolved {
                            Resolved::Missing => "unresolved_target",
                            _ => "external_target",
                        };
                        diagnostics.push(code, r.target.to_string(), "no edge");
                    }
                }
                if m.invokedynamic_sites > 0 {
                    diagnostics.push(
                        "invokedynamic_unresolved",
                        id.to_string(),
                        format!("{} site(s) without edges", m.invokedynamic_sites),
                    );
                }
                let dispatch = if m.is(ACC_STATIC) || m.is(ACC_PRIVATE) || m.name.starts_with('<') {
                    BTreeSet::new()
                } else {
                    h.overrides(&class.name, &m.name, &m.descriptor)
                };
                methods.push((id, m.fingerprint, targets, dispatch));
            }
            let fields = class
                .fields
                .iter()
                .map(|f| {
                    (
                        MemberRef::new(&class.name, &f.name, &f.descriptor),
                        field_digest(&f.descriptor, f.access),
                    )
                })
                .collect();
            (methods, fields, diagnostics)
        })
        .collect();

    let mut g = CallGraph {
        scope,
        ..Default::default()
    };
    for (methods, fields, diagnostics) in per_class {
        for (id, fp, targets, dispatch) in methods {
            g.nodes.insert(id.clone());
            g.fingerprints.insert(id.clone(), fp);
            if !dispatch.is_empty() {
                g.dispatch.insert(id.clone(), dispatch);
            }
            if !targets.is_empty() {
                g.edges.insert(id, targets);
            }
        }
        g.fields.extend(fields);
        g.diagnostics.extend(diagnostics);
    }
    g.diagnostics.normalize();
    g
}

pub fn build_call_graph(artifact: &ArtifactHandle) -> Result<CallGraph, BytecodeError> {
    let loaded = load_artifact(artifact)?;
    let mut g = call_graph_of(&loaded.classes, vec![artifact.version_ref.to_string()]);
    g.diagnostics.extend(loaded.diagnostics);
    g.diagnostics.normalize();
    Ok(g)
}

/// Order-independent digest of a method's fingerprint and those of all
/// methods a call to it can reach, overrides included. Fields digest their
/// descriptor and flags.
pub fn closure_digest(member: &MemberRef, graph: &CallGraph) -> Result<Digest, BytecodeError> {
    if let Some(d) = graph.fields.get(member) {
        return Ok(*d);
    }
    if !graph.nodes.contains(member) {
        return Err(BytecodeError::NotInScope(member.to_string()));
    }
    let mut h = Sha256::new();
    h.update(b"closure\n");
    for m in graph.reachable_by_call(member) {
        let fp = graph.fingerprints.get(&m).copied().unwrap_or_else(Digest::empty);
        h.update(format!("{m} {fp}\n").as_bytes());
    }
    Ok(Digest(h.finalize().into()))
}

/// APIs, call graph and provenance of one library version; persisted as the
/// JSON API index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactAnalysis {
    pub schema_version: u32,
    pub version_ref: LibraryVersionRef,
    pub checksum: String,
    pub apis: BTreeSet<ApiElement>,
    pub graph: CallGraph,
    pub diagnostics: Diagnostics,
}

impl ArtifactAnalysis {
    pub fn from_classes(version_ref: &LibraryVersionRef, checksum: &str, loaded: &LoadedClasses) -> Self {
        ArtifactAnalysis {
            schema_version: crate::SCHEMA_VERSION,
            version_ref: version_ref.clone(),
            checksum: checksum.to_string(),
            apis: apis_of(&loaded.classes, version_ref),
            graph: call_graph_of(&loaded.classes, vec![version_ref.to_string()]),
            diagnostics: loaded.diagnostics.clone(),
        }
    }

    pub fn has_member(&self, kind: ApiKind, member: &MemberRef) -> bool {
        self.apis.iter().any(|a| {
            a.kind == kind
                && a.owner_class == member.owner
                && a.member_name == member.name
                && a.descriptor == member.descriptor
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub fn analyze_artifact(artifact: &ArtifactHandle) -> Result<ArtifactAnalysis, BytecodeError> {
    let loaded = load_artifact(artifact)?;
    Ok(ArtifactAnalysis::from_classes(
        &artifact.version_ref,
        &artifact.checksum,
        &loaded,
    ))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiDiff {
    pub deleted: BTreeSet<ApiElement>,
    pub changed: BTreeSet<ApiElement>,
    pub unchanged: BTreeSet<ApiElement>,
}

/// Splits `called` into members missing from `new` (a changed descriptor
/// counts as missing), members whose closure digest differs, and the rest.
pub fn diff_apis(
    old: &ArtifactAnalysis,
    new: &ArtifactAnalysis,
    called: &BTreeSet<ApiElement>,
) -> Result<ApiDiff, BytecodeError> {
    let new_members: HashSet<(ApiKind, MemberRef)> = new.apis.iter().map(|a| (a.kind, a.member())).collect();
    let mut diff = ApiDiff::default();
    for api in called {
        let member = api.member();
        if !new_members.contains(&(api.kind, member.clone())) {
            diff.deleted.insert(api.clone());
        } else if closure_digest(&member, &old.graph)? != closure_digest(&member, &new.graph)? {
            diff.changed.insert(api.clone());
        } else {
            diff.unchanged.insert(api.clone());
        }
    }
    Ok(diff)
}

#[cfg(test)]
mod tests;
