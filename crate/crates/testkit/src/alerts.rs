//! Fixtures for risk analysis, effort analysis and update relevance.

use std::collections::BTreeMap;

use depscope_core::bugdb::{BugRecord, BugSource, MethodsProvenance, Priority};
use depscope_core::bytecode::MemberRef;
use depscope_core::history::SnapshotLine;
use depscope_core::{Library, VersionString};

use crate::spec::{ClassSpec, Invoke, Op};
use crate::{pom, ProjectFixture, VersionFixture, Workspace};

const DAY: i64 = 86_400;
const BASE_DATE: i64 = 1_500_000_000;

pub fn bug(library: &str, id: &str, versions: &[&str], methods: &[(&str, &str)]) -> BugRecord {
    let library = Library::parse(library).expect("library coordinate");
    let mut buggy_methods = BTreeMap::new();
    if !methods.is_empty() {
        for v in versions {
            buggy_methods.insert(
                v.to_string(),
                methods.iter().map(|(o, n)| MemberRef::new(*o, *n, "()V")).collect(),
            );
        }
    }
    BugRecord {
        issue_id: id.into(),
        priority: Priority::Critical,
        library,
        affected_versions: versions.iter().map(|v| VersionString::new(*v).unwrap()).collect(),
        buggy_methods,
        source: BugSource::Local,
        methods_provenance: (!methods.is_empty()).then_some(MethodsProvenance::Curated),
    }
}

/// A project with one `pom.xml` and the given main classes.
pub fn project(id: &str, deps: &[&str], main: Vec<ClassSpec>) -> ProjectFixture {
    let mut p = ProjectFixture::new(id);
    let deps: Vec<(String, Option<&str>)> = deps.iter().map(|d| (d.to_string(), None)).collect();
    p.files.insert("pom.xml".into(), pom(id, &deps));
    p.main = main;
    p
}

/// Calls `ops` from one public static method of a project class.
pub fn caller(class: &str, ops: Vec<Op>) -> ClassSpec {
    ClassSpec::class(class).stat("run", ops)
}

fn repeat(op: Op, n: usize) -> Vec<Op> {
    std::iter::repeat_n(op, n).collect()
}

// --- the P=3 table row ----------------------------------------------------------

pub const P3_LIBRARY: &str = "org.acme:engine";
pub const P3_CURRENT: &str = "org.acme:engine:1.0";
pub const P3_API: &str = "org/acme/engine/Api";
const P3_CORE: &str = "org/acme/engine/Core";

/// Call sites per API `a0..a20` in the P=3 project.
pub fn p3_sites() -> Vec<usize> {
    let mut s = vec![7];
    s.extend(std::iter::repeat_n(10, 13));
    s.push(7);
    s.extend(std::iter::repeat_n(6, 5));
    s.push(7);
    s
}

fn p3_classes(fixed: bool) -> Vec<ClassSpec> {
    let mut api = ClassSpec::class(P3_API);
    for i in 0..21 {
        let body = match i {
            0 => vec![Op::stat(P3_CORE, "bug0")],
            1..=14 => vec![Op::Const(i), Op::stat(P3_CORE, "helper")],
            _ => vec![Op::Const(i)],
        };
        api = api.stat(&format!("a{i}"), body);
    }
    let mut core = ClassSpec::class(P3_CORE)
        .package_private()
        .stat("bug0", vec![Op::Const(if fixed { 100 } else { 0 })])
        .stat("helper", vec![Op::Const(if fixed { 2 } else { 1 })]);
    for k in 1..18 {
        core = core.stat(&format!("bug{k}"), vec![Op::Const(k)]);
    }
    vec![api, core]
}

/// One project calling 21 APIs of a version with 18 bugs, one of which its
/// calls reach; 15 higher releases fix it and change 15 of the called APIs.
pub fn p3() -> Workspace {
    let mut versions = vec![VersionFixture::new(P3_CURRENT, BASE_DATE, p3_classes(false))];
    for k in 1..=15 {
        versions.push(VersionFixture::new(
            &format!("{P3_LIBRARY}:1.{k}"),
            BASE_DATE + k as i64 * 30 * DAY,
            p3_classes(true),
        ));
    }
    let mut bugs = vec![bug(P3_LIBRARY, "ENGINE-1", &["1.0"], &[(P3_CORE, "bug0")])];
    for k in 1..18 {
        let name = format!("bug{k}");
        bugs.push(bug(
            P3_LIBRARY,
            &format!("ENGINE-{}", k + 1),
            &["1.0"],
            &[(P3_CORE, name.as_str())],
        ));
    }
    let mut main = Vec::new();
    for (i, n) in p3_sites().into_iter().enumerate() {
        main.push(caller(
            &format!("proj/p3/Use{i}"),
            repeat(Op::stat(P3_API, &format!("a{i}")), n),
        ));
    }
    Workspace {
        versions,
        projects: vec![project("3", &[P3_CURRENT], main)],
        bugs,
        default_crawl_date: BASE_DATE + 600 * DAY,
    }
}

// --- reachability --------------------------------------------------------------

/// A library version with buggy methods and projects that do or do not
/// reach them.
#[derive(Debug, Clone)]
pub struct ReachScenario {
    pub name: &'static str,
    pub version: VersionFixture,
    pub buggy: Vec<(String, String)>,
    pub projects: Vec<ProjectFixture>,
}

impl ReachScenario {
    fn new(name: &'static str, coord: &str, classes: Vec<ClassSpec>, buggy: &[(&str, &str)]) -> Self {
        ReachScenario {
            name,
            version: VersionFixture::new(coord, BASE_DATE, classes),
            buggy: buggy.iter().map(|(o, n)| (o.to_string(), n.to_string())).collect(),
            projects: Vec::new(),
        }
    }

    fn with(mut self, id: &str, main: Vec<ClassSpec>) -> Self {
        let coord = self.version.version_ref.to_string();
        self.projects.push(project(id, &[&coord], main));
        self
    }

    pub fn bug(&self) -> BugRecord {
        let lib = self.version.version_ref.library.to_string();
        let v = self.version.version_ref.version.as_str().to_string();
        let methods: Vec<(&str, &str)> = self.buggy.iter().map(|(o, n)| (o.as_str(), n.as_str())).collect();
        bug(&lib, &format!("{}-1", self.name.to_uppercase()), &[&v], &methods)
    }
}

pub fn reach_scenarios() -> Vec<ReachScenario> {
    let mut out = Vec::new();

    // Static chain, bug at depth 3.
    let (api, a, b, c) = ("org/r1/Api", "org/r1/A", "org/r1/B", "org/r1/C");
    out.push(
        ReachScenario::new(
            "chain",
            "org.r1:chain:1.0",
            vec![
                ClassSpec::class(api)
                    .stat("entry", vec![Op::stat(a, "x")])
                    .stat("safe", vec![Op::stat(b, "z")]),
                ClassSpec::class(a).package_private().stat("x", vec![Op::stat(b, "y")]),
                ClassSpec::class(b)
                    .package_private()
                    .stat("y", vec![Op::stat(c, "bug")])
                    .stat("z", vec![Op::Const(1)]),
                ClassSpec::class(c).package_private().stat("bug", vec![Op::Const(0)]),
            ],
            &[(c, "bug")],
        )
        .with(
            "chain-hit",
            vec![caller(
                "proj/ch/Main",
                vec![Op::stat(api, "safe"), Op::stat(api, "entry")],
            )],
        )
        .with("chain-miss", vec![caller("proj/cm/Main", vec![Op::stat(api, "safe")])]),
    );

    // Virtual dispatch to an override in a subclass.
    let (base, sub, sink) = ("org/r2/Base", "org/r2/Special", "org/r2/Sink");
    out.push(
        ReachScenario::new(
            "virtual",
            "org.r2:virt:2.0",
            vec![
                ClassSpec::class(base)
                    .inst("run", vec![Op::Const(1)])
                    .inst("other", vec![Op::Const(2)]),
                ClassSpec::class(sub)
                    .extends(base)
                    .inst("run", vec![Op::stat(sink, "bug")]),
                ClassSpec::class(sink).package_private().stat("bug", vec![Op::Const(0)]),
            ],
            &[(sink, "bug")],
        )
        .with("virtual-hit", vec![caller("proj/vh/Main", vec![Op::virt(base, "run")])])
        .with(
            "virtual-miss",
            vec![caller("proj/vm/Main", vec![Op::virt(base, "other")])],
        ),
    );

    // Interface dispatch; only one implementation is buggy.
    let (handler, h1, h2, sink) = ("org/r3/Handler", "org/r3/Plain", "org/r3/Fancy", "org/r3/Sink");
    out.push(
        ReachScenario::new(
            "interface",
            "org.r3:iface:1.2",
            vec![
                ClassSpec::interface(handler).abstract_method("handle"),
                ClassSpec::class(h1)
                    .implements(handler)
                    .inst("handle", vec![Op::Const(1)]),
                ClassSpec::class(h2)
                    .implements(handler)
                    .inst("handle", vec![Op::stat(sink, "bug")]),
                ClassSpec::class(sink).package_private().stat("bug", vec![Op::Const(0)]),
            ],
            &[(sink, "bug")],
        )
        .with(
            "interface-hit",
            vec![caller("proj/ih/Main", vec![Op::iface(handler, "handle")])],
        )
        .with(
            "interface-miss",
            vec![caller("proj/im/Main", vec![Op::virt(h1, "handle")])],
        ),
    );

    // Inherited API reached through a library subclass and a project subclass.
    let (sup, subc, sink) = ("org/r4/Super", "org/r4/Sub", "org/r4/Sink");
    out.push(
        ReachScenario::new(
            "inherited",
            "org.r4:inherit:0.9",
            vec![
                ClassSpec::class(sup).inst("helper", vec![Op::stat(sink, "bug")]),
                ClassSpec::class(subc).extends(sup).inst("own", vec![Op::Const(1)]),
                ClassSpec::class(sink).package_private().stat("bug", vec![Op::Const(0)]),
            ],
            &[(sink, "bug")],
        )
        .with(
            "inherited-hit",
            vec![caller("proj/nh/Main", vec![Op::virt(subc, "helper")])],
        )
        .with(
            "inherited-project-hit",
            vec![ClassSpec::class("proj/np/Mine")
                .extends(subc)
                .inst("go", vec![Op::virt("proj/np/Mine", "helper")])],
        )
        .with(
            "inherited-miss",
            vec![caller("proj/nm/Main", vec![Op::virt(subc, "own")])],
        ),
    );

    // The called API is itself buggy; a cycle guards another path.
    let (api, loopc) = ("org/r5/Api", "org/r5/Loop");
    out.push(
        ReachScenario::new(
            "direct",
            "org.r5:direct:3.1",
            vec![
                ClassSpec::class(api)
                    .stat("broken", vec![Op::Const(0)])
                    .stat("spin", vec![Op::stat(loopc, "a")]),
                ClassSpec::class(loopc)
                    .package_private()
                    .stat("a", vec![Op::stat(loopc, "b")])
                    .stat("b", vec![Op::stat(loopc, "a"), Op::stat(loopc, "c")])
                    .stat("c", vec![Op::Const(3)])
                    .stat("d", vec![Op::Const(4)]),
            ],
            &[(api, "broken"), (loopc, "d")],
        )
        .with(
            "direct-hit",
            vec![caller("proj/dh/Main", vec![Op::stat(api, "broken")])],
        )
        .with("direct-miss", vec![caller("proj/dm/Main", vec![Op::stat(api, "spin")])])
        .with(
            "direct-empty",
            vec![ClassSpec::class("proj/de/Main").stat("idle", vec![Op::Const(9)])],
        ),
    );

    // Bug reached through the cycle.
    let (api, loopc) = ("org/r6/Api", "org/r6/Loop");
    out.push(
        ReachScenario::new(
            "cycle",
            "org.r6:cycle:1.0.1",
            vec![
                ClassSpec::class(api)
                    .stat("spin", vec![Op::stat(loopc, "a")])
                    .stat("calm", vec![Op::Const(1)]),
                ClassSpec::class(loopc)
                    .package_private()
                    .stat("a", vec![Op::stat(loopc, "b")])
                    .stat("b", vec![Op::stat(loopc, "a"), Op::stat(loopc, "bug")])
                    .stat("bug", vec![Op::Const(0)]),
            ],
            &[(loopc, "bug")],
        )
        .with("cycle-hit", vec![caller("proj/yh/Main", vec![Op::stat(api, "spin")])])
        .with("cycle-miss", vec![caller("proj/ym/Main", vec![Op::stat(api, "calm")])]),
    );
    out
}

pub fn reach_workspace(scenarios: &[ReachScenario]) -> Workspace {
    Workspace {
        versions: scenarios.iter().map(|s| s.version.clone()).collect(),
        projects: scenarios.iter().flat_map(|s| s.projects.clone()).collect(),
        bugs: scenarios.iter().map(ReachScenario::bug).collect(),
        default_crawl_date: BASE_DATE + 600 * DAY,
    }
}

// --- effort analysis -------------------------------------------------------------

pub const CHAIN_LIBRARY: &str = "org.chain:core";
pub const CHAIN_API: &str = "org/chain/core/Api";
const CHAIN_IMPL: &str = "org/chain/core/Impl";

/// Call sites of `a`, `b`, `c` and `d` in the chain project.
pub const CHAIN_SITES: [(&str, usize); 4] = [("a", 3), ("b", 2), ("c", 5), ("d", 4)];

fn chain_classes(v: usize) -> Vec<ClassSpec> {
    let a = if v == 0 {
        vec![Op::stat(CHAIN_IMPL, "bugX")]
    } else {
        vec![Op::stat(CHAIN_IMPL, "fixedX")]
    };
    let c = match v {
        0 | 1 => vec![Op::Const(3)],
        2..=4 => vec![Op::Const(3), Op::stat(CHAIN_IMPL, "bugY")],
        _ => vec![Op::Const(3), Op::stat(CHAIN_IMPL, "fixedY")],
    };
    let mut api = ClassSpec::class(CHAIN_API).stat("a", a).stat("c", c);
    if v >= 6 {
        api = api.with_method(crate::spec::MethodSpec {
            name: "b".into(),
            desc: "(I)V".into(),
            flags: depscope_core::bytecode::classfile::ACC_PUBLIC | depscope_core::bytecode::classfile::ACC_STATIC,
            body: Some(vec![Op::Const(2)]),
        });
    } else {
        api = api.stat("b", vec![Op::Const(2)]);
    }
    if v < 5 {
        api = api.stat("d", vec![Op::Const(4)]);
    }
    api = api.stat("e", vec![Op::stat(CHAIN_IMPL, "bugZ")]);
    let imp = ClassSpec::class(CHAIN_IMPL)
        .package_private()
        .stat("bugX", vec![Op::Const(0)])
        .stat("fixedX", vec![Op::Const(10)])
        .stat("bugY", vec![Op::Const(20)])
        .stat("fixedY", vec![Op::Const(30)])
        .stat("bugZ", vec![Op::Const(40)]);
    vec![api, imp]
}

/// Versions `1.0..1.6` of a library plus an unavailable `1.7-SNAPSHOT`.
/// Bug X (reached via `a`) affects 1.0; bug Y (reached via `c`) persists
/// through 1.2..1.4; bug Z in 1.5 is reachable only from the uncalled `e`.
/// 1.5 deletes `d`; 1.6 also changes the descriptor of `b`.
pub fn effort_chain() -> Workspace {
    let mut versions: Vec<VersionFixture> = (0..=6)
        .map(|v| {
            VersionFixture::new(
                &format!("{CHAIN_LIBRARY}:1.{v}"),
                BASE_DATE + v as i64 * 20 * DAY,
                chain_classes(v),
            )
        })
        .collect();
    let mut snap = VersionFixture::new(&format!("{CHAIN_LIBRARY}:1.7-SNAPSHOT"), BASE_DATE + 200 * DAY, vec![]);
    snap.jar = false;
    versions.push(snap);
    let main = CHAIN_SITES
        .iter()
        .map(|(name, n)| {
            caller(
                &format!("proj/chain/Use{}", name.to_uppercase()),
                repeat(Op::stat(CHAIN_API, name), *n),
            )
        })
        .collect();
    Workspace {
        versions,
        projects: vec![project("chain", &[&format!("{CHAIN_LIBRARY}:1.0")], main)],
        bugs: vec![
            bug(CHAIN_LIBRARY, "CHAIN-1", &["1.0"], &[(CHAIN_IMPL, "bugX")]),
            bug(
                CHAIN_LIBRARY,
                "CHAIN-2",
                &["1.2", "1.3", "1.4"],
                &[(CHAIN_IMPL, "bugY")],
            ),
            bug(CHAIN_LIBRARY, "CHAIN-3", &["1.5"], &[(CHAIN_IMPL, "bugZ")]),
        ],
        default_crawl_date: BASE_DATE + 600 * DAY,
    }
}

// --- update relevance ------------------------------------------------------------

/// A library update seen by a project that calls some of the old version's
/// APIs.
#[derive(Debug, Clone)]
pub struct UpdateCase {
    pub name: &'static str,
    pub old: VersionFixture,
    pub new: VersionFixture,
    pub project: ProjectFixture,
}

impl UpdateCase {
    fn new(name: &'static str, old: Vec<ClassSpec>, new: Vec<ClassSpec>, calls: Vec<Op>) -> Self {
        let lib = format!("org.um:{name}");
        let old_v = VersionFixture::new(&format!("{lib}:1.0"), BASE_DATE, old);
        let new_v = VersionFixture::new(&format!("{lib}:1.1"), BASE_DATE + 30 * DAY, new);
        let id = format!("um-{name}");
        let main = vec![caller(&format!("proj/um/{}/Main", name.replace('-', "_")), calls)];
        let mut project = project(&id, &[&format!("{lib}:1.1")], main);
        let old_pom = pom(&id, &[(format!("{lib}:1.0"), None)]);
        let new_pom = project.files["pom.xml"].clone();
        project.history = vec![
            SnapshotLine {
                commit_id: "c1".into(),
                date: BASE_DATE + DAY,
                path: "pom.xml".into(),
                content: Some(old_pom),
            },
            SnapshotLine {
                commit_id: "c2".into(),
                date: BASE_DATE + 40 * DAY,
                path: "pom.xml".into(),
                content: Some(new_pom),
            },
        ];
        UpdateCase {
            name,
            old: old_v,
            new: new_v,
            project,
        }
    }

    fn debug_new(mut self) -> Self {
        self.new.debug = true;
        self
    }

    pub fn owner(&self) -> String {
        format!("org/um/{}/Api", self.name.replace('-', "_"))
    }
}

pub fn update_cases() -> Vec<UpdateCase> {
    let o = |name: &str| format!("org/um/{}/Api", name.replace('-', "_"));
    let h = |name: &str| format!("org/um/{}/Helper", name.replace('-', "_"));
    let std_api = |name: &str| {
        vec![
            ClassSpec::class(&o(name))
                .stat("f", vec![Op::Const(1), Op::stat(&h(name), "h1")])
                .stat("g", vec![Op::Const(2)])
                .field("LIMIT", "I"),
            ClassSpec::class(&h(name))
                .package_private()
                .stat("h1", vec![Op::stat(&h(name), "h2")])
                .stat("h2", vec![Op::Const(5)])
                .private("unused", vec![Op::Const(6)]),
        ]
    };
    let edit = |mut classes: Vec<ClassSpec>, class: usize, method: &str, body: Vec<Op>| {
        classes[class].method_mut(method).expect("method").body = Some(body);
        classes
    };
    let calls_f = |name: &str| vec![Op::stat(&o(name), "f")];
    let mut out = Vec::new();

    let n = "identical";
    out.push(UpdateCase::new(n, std_api(n), std_api(n), calls_f(n)));

    let n = "debug-only";
    out.push(UpdateCase::new(n, std_api(n), std_api(n), calls_f(n)).debug_new());

    let n = "body-change";
    out.push(UpdateCase::new(
        n,
        std_api(n),
        edit(std_api(n), 0, "f", vec![Op::Const(9), Op::stat(&h(n), "h1")]),
        calls_f(n),
    ));

    let n = "transitive-only";
    out.push(UpdateCase::new(
        n,
        std_api(n),
        edit(std_api(n), 1, "h2", vec![Op::Const(50)]),
        calls_f(n),
    ));

    let n = "deleted";
    let mut new = std_api(n);
    new[0].methods.retain(|m| m.name != "f");
    out.push(UpdateCase::new(n, std_api(n), new, calls_f(n)));

    let n = "descriptor";
    let mut new = std_api(n);
    new[0].method_mut("f").unwrap().desc = "(I)V".into();
    out.push(UpdateCase::new(n, std_api(n), new, calls_f(n)));

    let n = "uncalled-change";
    out.push(UpdateCase::new(
        n,
        std_api(n),
        edit(std_api(n), 0, "g", vec![Op::Const(20)]),
        calls_f(n),
    ));

    let n = "api-added";
    let mut new = std_api(n);
    new[0] = new[0].clone().stat("extra", vec![Op::Const(3)]);
    out.push(UpdateCase::new(n, std_api(n), new, calls_f(n)));

    let n = "unreachable-helper";
    out.push(UpdateCase::new(
        n,
        std_api(n),
        edit(std_api(n), 1, "unused", vec![Op::Const(60)]),
        calls_f(n),
    ));

    let n = "member-order";
    let mut new = std_api(n);
    new[0].methods.reverse();
    new[1].methods.reverse();
    out.push(UpdateCase::new(n, std_api(n), new, calls_f(n)));

    let n = "field-type";
    let mut new = std_api(n);
    new[0].fields[0].desc = "J".into();
    let field_call = vec![Op::GetStatic {
        owner: o(n),
        name: "LIMIT".into(),
        desc: "I".into(),
    }];
    out.push(UpdateCase::new(n, std_api(n), new, field_call));

    let n = "field-untouched";
    let field_call = vec![Op::GetStatic {
        owner: o(n),
        name: "LIMIT".into(),
        desc: "I".into(),
    }];
    out.push(UpdateCase::new(
        n,
        std_api(n),
        edit(std_api(n), 0, "f", vec![Op::Const(0)]),
        field_call,
    ));

    let n = "retargeted";
    out.push(UpdateCase::new(
        n,
        std_api(n),
        edit(std_api(n), 1, "h1", vec![Op::stat(&h(n), "unused")]),
        calls_f(n),
    ));

    // Virtual API whose override in a subclass changes.
    let n = "override-change";
    let (base, sub) = (o(n), format!("org/um/{}/Sub", n.replace('-', "_")));
    let classes = |k: i32| {
        vec![
            ClassSpec::class(&base).inst("run", vec![Op::Const(1)]),
            ClassSpec::class(&sub).extends(&base).inst("run", vec![Op::Const(k)]),
        ]
    };
    out.push(UpdateCase::new(
        n,
        classes(2),
        classes(3),
        vec![Op::call(Invoke::Virtual, &base, "run")],
    ));

    let n = "class-added";
    let mut new = std_api(n);
    new.push(ClassSpec::class(&format!("org/um/{}/Extra", n.replace('-', "_"))).stat("x", vec![Op::Const(1)]));
    out.push(UpdateCase::new(n, std_api(n), new, calls_f(n)));

    out
}

pub fn update_workspace(cases: &[UpdateCase]) -> Workspace {
    Workspace {
        versions: cases.iter().flat_map(|c| [c.old.clone(), c.new.clone()]).collect(),
        projects: cases.iter().map(|c| c.project.clone()).collect(),
        bugs: Vec::new(),
        default_crawl_date: BASE_DATE + 600 * DAY,
    }
}
