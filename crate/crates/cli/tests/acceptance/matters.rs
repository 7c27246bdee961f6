//! Whether an update matters, decided by comparing what the project's
//! references reach in the old and new jars, instruction by instruction.

use depscope_testkit::alerts::{update_cases, update_workspace};
use depscope_testkit::spec::ClassSpec;

use crate::disasm::{Class, Node, World};
use crate::{depscope, fixture_flag, read_json, s};

pub fn read_all(classes: &[ClassSpec], debug: bool) -> Vec<Class> {
    classes.iter().map(|c| Class::read(&c.compile(debug))).collect()
}

/// Library members referenced from project bodies, with dispatch targets.
pub fn project_entries(library: &World, project: &[Class]) -> Vec<Node> {
    let mut out = Vec::new();
    for class in project {
        for m in &class.methods {
            if let Some(code) = &m.code {
                for (op, owner, name, desc) in World::references(class, code) {
                    out.extend(library.targets(op, &owner, &name, &desc));
                }
            }
        }
    }
    out
}

fn node_differs(old: &World, new: &World, n: &Node) -> bool {
    match n {
        Node::Method(o, name, desc) => {
            let a = old
                .classes
                .get(o.as_str())
                .and_then(|c| c.method(name, desc).map(|m| (c, m)));
            let b = new
                .classes
                .get(o.as_str())
                .and_then(|c| c.method(name, desc).map(|m| (c, m)));
            match (a, b) {
                (Some((ca, ma)), Some((cb, mb))) => {
                    let body = |c: &Class, code: &Option<Vec<u8>>| code.as_deref().map(|b| c.symbolic_body(b));
                    ma.access != mb.access || body(ca, &ma.code) != body(cb, &mb.code)
                }
                _ => true,
            }
        }
        Node::Field(o, name, desc) => {
            let a = old.classes.get(o.as_str()).and_then(|c| c.field(name, desc));
            let b = new.classes.get(o.as_str()).and_then(|c| c.field(name, desc));
            match (a, b) {
                (Some(a), Some(b)) => a.access != b.access,
                _ => true,
            }
        }
    }
}

/// True when the closures of `entries` differ in membership or in any
/// member's decoded body.
pub fn closure_changed(old: &[Class], new: &[Class], entries: &[Node]) -> bool {
    let (old, new) = (World::new(old.iter()), World::new(new.iter()));
    let before = old.closure(entries);
    let after = new.closure(entries);
    before != after || before.iter().any(|n| node_differs(&old, &new, n))
}

pub fn check() -> String {
    let cases = update_cases();
    let tmp = tempfile::tempdir().unwrap();
    let layout = update_workspace(&cases).write(&tmp.path().join("ws")).unwrap();
    let reg = fixture_flag(&layout);
    let mut mattering = 0;
    for c in &cases {
        let old = read_all(&c.old.classes, c.old.debug);
        let new = read_all(&c.new.classes, c.new.debug);
        let project = read_all(&c.project.main, false);
        let entries = project_entries(&World::new(old.iter()), &project);
        assert!(!entries.is_empty(), "{}: project references nothing", c.name);
        let want = closure_changed(&old, &new, &entries);

        let out = tmp.path().join("out").join(c.name);
        let dir = s(&layout.projects[&c.project.id]);
        assert_eq!(
            depscope(&[
                "--registry",
                &reg,
                "--out",
                s(&out),
                "update-matters",
                dir,
                "--commit",
                "c2"
            ]),
            0,
            "{}",
            c.name
        );
        let m = read_json(out.join("update-matters.json"));
        let ups = m["updates"].as_array().unwrap();
        assert_eq!(ups.len(), 1, "{}: updates", c.name);
        assert_eq!(ups[0]["matters"].as_bool(), Some(want), "{}", c.name);
        match c.name {
            "transitive-only" => assert!(want, "transitive-only must matter"),
            "debug-only" => assert!(!want, "debug-only must not matter"),
            _ => {}
        }
        mattering += want as usize;
    }
    assert!(cases.len() >= 12);
    format!("{} cases, {mattering} matter", cases.len())
}
