//! Risk flags against a breadth-first search over disassembled bodies with
//! class-hierarchy dispatch.

use std::collections::BTreeSet;

use depscope_testkit::alerts::{reach_scenarios, reach_workspace, ReachScenario};
use depscope_testkit::ProjectFixture;

use crate::disasm::{Class, Node, World, INVOKESPECIAL, INVOKESTATIC, INVOKEVIRTUAL};
use crate::{depscope, fixture_flag, s};

/// Library methods a project's bodies can enter: calls resolved through
/// project supertypes first, landing on a public method of a public
/// library class, plus that method's library overrides.
fn entries(library: &[Class], project: &[Class]) -> Vec<Node> {
    let everything = World::new(library.iter().chain(project));
    let lib = World::new(library.iter());
    let mut out = Vec::new();
    for class in project {
        for m in &class.methods {
            let Some(code) = &m.code else { continue };
            for (op, owner, name, desc) in World::references(class, code) {
                if !(INVOKEVIRTUAL..=crate::disasm::INVOKEINTERFACE).contains(&op) {
                    continue;
                }
                let Some(decl) = everything.resolve_method(&owner, &name, &desc) else {
                    continue;
                };
                let Some(lib_decl) = lib.classes.get(decl.name.as_str()) else {
                    continue;
                };
                if !lib_decl.is_public() || !lib_decl.method(&name, &desc).is_some_and(|m| m.is_public()) {
                    continue;
                }
                out.push(Node::Method(decl.name.clone(), name.clone(), desc.clone()));
                if op != INVOKESTATIC && op != INVOKESPECIAL {
                    out.extend(
                        lib.overrides(&decl.name, &name, &desc)
                            .into_iter()
                            .map(|c| Node::Method(c.name.clone(), name.clone(), desc.clone())),
                    );
                }
            }
        }
    }
    out
}

fn reaches_bug(sc: &ReachScenario, p: &ProjectFixture) -> bool {
    let library: Vec<Class> = sc
        .version
        .classes
        .iter()
        .map(|c| Class::read(&c.compile(false)))
        .collect();
    let project: Vec<Class> = p.main.iter().map(|c| Class::read(&c.compile(false))).collect();
    let buggy: BTreeSet<(&str, &str)> = sc.buggy.iter().map(|(o, n)| (o.as_str(), n.as_str())).collect();
    World::new(library.iter())
        .closure(&entries(&library, &project))
        .iter()
        .any(|n| matches!(n, Node::Method(o, name, _) if buggy.contains(&(o.as_str(), name.as_str()))))
}

pub fn check() -> String {
    let scenarios = reach_scenarios();
    let tmp = tempfile::tempdir().unwrap();
    let layout = reach_workspace(&scenarios).write(&tmp.path().join("ws")).unwrap();
    let reg = fixture_flag(&layout);
    let (mut flagged, mut total) = (0, 0);
    for sc in &scenarios {
        for p in &sc.projects {
            let expected = reaches_bug(sc, p);
            assert_eq!(
                expected,
                p.id.ends_with("-hit"),
                "oracle disagrees with the fixture label of {}",
                p.id
            );
            let out = tmp.path().join("out").join(&p.id);
            let dir = s(&layout.projects[&p.id]);
            let code = depscope(&[
                "--registry",
                &reg,
                "--bugdb",
                s(&layout.bugdb),
                "--out",
                s(&out),
                "risk",
                dir,
            ]);
            let want = if expected { 3 } else { 0 };
            assert_eq!(code, want, "risk exit code for {}", p.id);
            flagged += expected as usize;
            total += 1;
        }
    }
    format!("{} jars, {flagged} of {total} projects flagged", scenarios.len())
}
