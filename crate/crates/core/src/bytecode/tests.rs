use super::builder::{Asm, ClassBuilder};
use super::*;
use crate::registry::sha256_hex;

fn vref(s: &str) -> LibraryVersionRef {
    LibraryVersionRef::parse(s).unwrap()
}

fn jar_of(classes: &[&ClassBuilder]) -> Vec<u8> {
    let entries: Vec<(String, Vec<u8>)> = classes
        .iter()
        .map(|c| (format!("{}.class", c.name()), c.to_bytes()))
        .collect();
    jar::write_jar(&entries)
}

fn analysis(classes: &[&ClassBuilder]) -> ArtifactAnalysis {
    let bytes = jar_of(classes);
    let loaded = load_jar_bytes(&bytes, "test").unwrap();
    ArtifactAnalysis::from_classes(&vref("g:n:1"), &sha256_hex(&bytes), &loaded)
}

fn ret() -> Asm {
    let mut a = Asm::new();
    a.ret();
    a
}

fn calls(targets: &[(&str, &str)]) -> Asm {
    let mut a = Asm::new();
    for (owner, name) in targets {
        a.invokestatic(owner, name, "()V");
    }
    a.ret();
    a
}

fn m(owner: &str, name: &str, desc: &str) -> MemberRef {
    MemberRef::new(owner, name, desc)
}

#[test]
fn visibility_filter() {
    let mut c = ClassBuilder::new("p/A");
    c.method("a", "()V", ACC_PUBLIC, ret())
        .method("b", "()V", ACC_PUBLIC | ACC_STATIC, ret())
        .method("c", "()V", ACC_PRIVATE, ret());
    let apis = analysis(&[&c]).apis;
    let names: Vec<&str> = apis.iter().map(|a| a.member_name.as_str()).collect();
    assert_eq!(names, ["a", "b"]);
}

#[test]
fn resource_only_jar_has_no_apis() {
    let bytes = jar::write_jar(&[
        ("META-INF/MANIFEST.MF".into(), b"x".to_vec()),
        ("a.properties".into(), vec![]),
    ]);
    let loaded = load_jar_bytes(&bytes, "r").unwrap();
    assert_eq!(loaded.resource_entries, 2);
    assert!(apis_of(&loaded.classes, &vref("g:n:1")).is_empty());
}

#[test]
fn field_included_bridge_and_synthetic_excluded() {
    let mut c = ClassBuilder::new("p/A");
    c.field("VALUE", "I", ACC_PUBLIC | ACC_STATIC)
        .field("hidden", "I", ACC_PRIVATE)
        .method("compareTo", "(Lp/A;)I", ACC_PUBLIC, {
            let mut a = Asm::new();
            a.iconst(0).ireturn();
            a
        })
        .method(
            "compareTo",
            "(Ljava/lang/Object;)I",
            ACC_PUBLIC | ACC_BRIDGE | ACC_SYNTHETIC,
            {
                let mut a = Asm::new();
                a.iconst(0).ireturn();
                a
            },
        )
        .method("<clinit>", "()V", ACC_STATIC, ret());
    let apis = analysis(&[&c]).apis;
    let got: Vec<(String, ApiKind)> = apis.iter().map(|a| (a.to_string(), a.kind)).collect();
    assert_eq!(
        got,
        [
            ("p/A.VALUE:I".to_string(), ApiKind::Field),
            ("p/A.compareTo:(Lp/A;)I".to_string(), ApiKind::Method)
        ]
    );
}

#[test]
fn nested_and_hidden_classes() {
    let mut nested = ClassBuilder::new("p/Outer$Inner");
    nested
        .nested_in("p/Outer", "Inner", ACC_PUBLIC | ACC_STATIC)
        .method("f", "()V", ACC_PUBLIC, ret());
    let mut private_nested = ClassBuilder::new("p/Outer$Hidden");
    private_nested
        .nested_in("p/Outer", "Hidden", ACC_PRIVATE | ACC_STATIC)
        .method("f", "()V", ACC_PUBLIC, ret());
    let mut anon = ClassBuilder::new("p/Outer$1");
    anon.anonymous().method("f", "()V", ACC_PUBLIC, ret());
    let mut package = ClassBuilder::new("p/Pkg");
    package.access(ACC_SUPER).method("f", "()V", ACC_PUBLIC, ret());
    let apis = analysis(&[&nested, &private_nested, &anon, &package]).apis;
    let owners: Vec<&str> = apis.iter().map(|a| a.owner_class.as_str()).collect();
    assert_eq!(owners, ["p/Outer$Inner"]);
}

#[test]
fn jar_and_directory_agree() {
    let mut a = ClassBuilder::new("p/A");
    a.method("f", "()V", ACC_PUBLIC, ret()).field("x", "J", ACC_PUBLIC);
    let mut b = ClassBuilder::new("p/q/B");
    b.method("g", "()V", ACC_PUBLIC, ret());
    let dir = tempfile::tempdir().unwrap();
    for c in [&a, &b] {
        let path = dir.path().join(format!("{}.class", c.name()));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, c.to_bytes()).unwrap();
    }
    let from_dir = load_classes(dir.path()).unwrap();
    let jar = jar_of(&[&a, &b]);
    let from_jar = load_jar_bytes(&jar, "j").unwrap();
    let v = vref("g:n:1");
    assert_eq!(apis_of(&from_dir.classes, &v), apis_of(&from_jar.classes, &v));
}

#[test]
fn corrupt_jar_and_bad_entries() {
    let mut a = ClassBuilder::new("p/A");
    a.method("f", "()V", ACC_PUBLIC, ret());
    let mut jar = jar_of(&[&a]);
    jar.truncate(jar.len() - 10);
    assert!(matches!(load_jar_bytes(&jar, "j"), Err(BytecodeError::Corrupt { .. })));

    let jar = jar::write_jar(&[
        ("p/A.class".into(), a.to_bytes()),
        ("p/B.class".into(), b"\xCA\xFE\xBA\xBE\0".to_vec()),
    ]);
    let loaded = load_jar_bytes(&jar, "j").unwrap();
    assert_eq!(loaded.classes.len(), 1);
    assert!(loaded.diagnostics.has("unreadable_class"));
}

fn library() -> (Vec<ClassModel>, BTreeSet<ApiElement>) {
    let mut base = ClassBuilder::new("lib/Base");
    base.method("f", "()V", ACC_PUBLIC | ACC_STATIC, ret())
        .method("g", "()V", ACC_PUBLIC, ret())
        .field("F", "I", ACC_PUBLIC | ACC_STATIC);
    let mut sub = ClassBuilder::new("lib/Sub");
    sub.extends("lib/Base");
    let jar = jar_of(&[&base, &sub]);
    let loaded = load_jar_bytes(&jar, "lib").unwrap();
    let apis = apis_of(&loaded.classes, &vref("lib:lib:1"));
    (loaded.classes, apis)
}

#[test]
fn call_counting_and_supertype_resolution() {
    let (classes, apis) = library();
    let mut universe = ApiUniverse::new();
    universe.add_apis(&apis);
    universe.add_hierarchy(&classes);

    let mut p = ClassBuilder::new("app/Main");
    p.method(
        "twice",
        "()V",
        ACC_PUBLIC,
        calls(&[("lib/Base", "f"), ("lib/Base", "f")]),
    )
    .method("via_sub", "()V", ACC_PUBLIC, {
        let mut a = Asm::new();
        a.aload(0)
            .invokevirtual("lib/Sub", "g", "()V")
            .getstatic("lib/Sub", "F", "I")
            .pop()
            .ret();
        a
    })
    .method("none", "()V", ACC_PUBLIC, calls(&[("app/Main", "twice")]));
    let project = vec![(ClassModel::parse(&p.to_bytes()).unwrap(), SourceSet::Main)];
    let out = extract_calls("app", &project, &universe);
    assert_eq!(out.methods.len(), 3);
    let summary: Vec<(String, String, u32)> = out
        .calls
        .iter()
        .map(|c| (c.caller.member_name.clone(), c.callee.to_string(), c.site_count))
        .collect();
    assert_eq!(
        summary,
        [
            ("via_sub".to_string(), "lib/Base.F:I".to_string(), 1),
            ("twice".to_string(), "lib/Base.f:()V".to_string(), 2),
            ("via_sub".to_string(), "lib/Base.g:()V".to_string(), 1),
        ]
    );
}

#[test]
fn project_subclass_reference_resolves() {
    let (classes, apis) = library();
    let mut universe = ApiUniverse::new();
    universe.add_apis(&apis);
    universe.add_hierarchy(&classes);
    let mut mine = ClassBuilder::new("app/Mine");
    mine.extends("lib/Base").method("h", "()V", ACC_PUBLIC, {
        let mut a = Asm::new();
        a.aload(0).invokevirtual("app/Mine", "g", "()V").ret();
        a
    });
    let project = vec![(ClassModel::parse(&mine.to_bytes()).unwrap(), SourceSet::Test)];
    let out = extract_calls("app", &project, &universe);
    assert_eq!(out.calls.len(), 1);
    assert_eq!(out.calls[0].caller.source_set, SourceSet::Test);
}

#[test]
fn no_library_calls() {
    let mut p = ClassBuilder::new("app/Main");
    p.method("a", "()V", ACC_PUBLIC, calls(&[("app/Main", "b")]))
        .method("b", "()V", ACC_PUBLIC, ret());
    let project = vec![(ClassModel::parse(&p.to_bytes()).unwrap(), SourceSet::Main)];
    let out = extract_calls("app", &project, &ApiUniverse::new());
    assert_eq!(out.methods.len(), 2);
    assert!(out.calls.is_empty());
}

#[test]
fn descriptor_validation() {
    assert!(is_method_descriptor("()V"));
    assert!(is_method_descriptor("(I[JLjava/lang/String;)[Lx/Y;"));
    assert!(!is_method_descriptor("(L;)V"));
    assert!(!is_method_descriptor("(I"));
    assert!(!is_method_descriptor("()VV"));
    assert!(is_field_descriptor("[[I"));
    assert!(!is_field_descriptor("V"));
}

#[test]
fn linear_chain() {
    let mut c = ClassBuilder::new("p/C");
    c.method("f", "()V", ACC_PUBLIC | ACC_STATIC, calls(&[("p/C", "g")]))
        .method("g", "()V", ACC_PUBLIC | ACC_STATIC, calls(&[("p/C", "h")]))
        .method("h", "()V", ACC_PUBLIC | ACC_STATIC, ret());
    let g = analysis(&[&c]).graph;
    assert_eq!(g.edge_count(), 2);
    let f = m("p/C", "f", "()V");
    assert!(g.reachable(&f).contains(&m("p/C", "h", "()V")));
    assert!(g.diagnostics.is_empty());
}

#[test]
fn interface_dispatch_and_external_targets() {
    let mut i = ClassBuilder::interface("p/I");
    i.declare("run", "()V", ACC_PUBLIC | ACC_ABSTRACT);
    let mut a = ClassBuilder::new("p/A");
    a.implements("p/I").method("run", "()V", ACC_PUBLIC, ret());
    let mut b = ClassBuilder::new("p/B");
    b.implements("p/I").method("run", "()V", ACC_PUBLIC, ret());
    let mut user = ClassBuilder::new("p/User");
    user.method("go", "(Lp/I;)V", ACC_PUBLIC | ACC_STATIC, {
        let mut x = Asm::new();
        x.aload(0)
            .invokeinterface("p/I", "run", "()V")
            .invokestatic("java/lang/System", "gc", "()V")
            .ret();
        x
    });
    let g = analysis(&[&i, &a, &b, &user]).graph;
    let go = m("p/User", "go", "(Lp/I;)V");
    let targets: Vec<String> = g.callees(&go).map(|t| t.to_string()).collect();
    assert_eq!(targets, ["p/A.run:()V", "p/B.run:()V", "p/I.run:()V"]);
    assert!(g.diagnostics.has("external_target"));
    for (from, tos) in &g.edges {
        assert!(g.nodes.contains(from));
        assert!(tos.iter().all(|t| g.nodes.contains(t)));
    }
}

#[test]
fn fingerprint_ignores_debug_info_and_pool_layout() {
    let build = |debug: bool, literal: i32| {
        let mut c = ClassBuilder::new("p/A");
        c.debug(debug).method("f", "()I", ACC_PUBLIC, {
            let mut a = Asm::new();
            a.ldc_str("x").pop().iconst(literal).ireturn();
            a
        });
        ClassModel::parse(&c.to_bytes()).unwrap().methods[0].fingerprint
    };
    assert_eq!(build(true, 1), build(false, 1));
    assert_ne!(build(false, 1), build(false, 2));

    let mut c = ClassBuilder::new("p/A");
    c.declare("f", "()V", ACC_PUBLIC | ACC_ABSTRACT);
    assert_eq!(
        ClassModel::parse(&c.to_bytes()).unwrap().methods[0].fingerprint,
        Digest::empty()
    );
}

#[test]
fn constant_pool_reversal_preserves_models() {
    let mut c = ClassBuilder::new("p/A");
    c.debug(true).method("f", "(I)V", ACC_PUBLIC, {
        let mut a = Asm::new();
        let end = a.label();
        a.iload(1)
            .jump(insn::op::IFEQ, end)
            .ldc_str("s")
            .pop()
            .lconst(1 << 40)
            .op(0x58)
            .invokestatic("q/Q", "x", "()V")
            .bind(end)
            .ret();
        a
    });
    let cf = c.build();
    let mut order = rewrite::live_indices(&cf.constant_pool);
    order.reverse();
    let permuted = rewrite::remap_constant_pool(&cf, &order).unwrap();
    assert_ne!(permuted.constant_pool, cf.constant_pool);
    let reparsed = ClassFile::parse(&permuted.to_bytes()).unwrap();
    let before = ClassModel::from_class_file(&cf).unwrap();
    let after = ClassModel::from_class_file(&reparsed).unwrap();
    assert_eq!(before, after);
    let stripped = rewrite::strip_debug(&cf).unwrap();
    assert!(stripped.to_bytes().len() < cf.to_bytes().len());
    assert_eq!(ClassModel::from_class_file(&stripped).unwrap(), before);
}

fn chain_lib(h_literal: i32, drop_g: bool) -> ArtifactAnalysis {
    let mut c = ClassBuilder::new("p/C");
    c.method("f", "()V", ACC_PUBLIC | ACC_STATIC, calls(&[("p/C", "g")]));
    if !drop_g {
        c.method("g", "()V", ACC_PUBLIC | ACC_STATIC, calls(&[("p/C", "h")]));
    }
    c.method("h", "()I", ACC_PUBLIC | ACC_STATIC, {
        let mut a = Asm::new();
        a.iconst(h_literal).ireturn();
        a
    })
    .method("h", "()V", ACC_PUBLIC | ACC_STATIC, calls(&[("p/C", "h2")]))
    .method("h2", "()V", ACC_PUBLIC | ACC_STATIC, {
        let mut a = Asm::new();
        a.iconst(h_literal).pop().ret();
        a
    })
    .method("ping", "()V", ACC_PUBLIC | ACC_STATIC, calls(&[("p/C", "pong")]))
    .method("pong", "()V", ACC_PUBLIC | ACC_STATIC, calls(&[("p/C", "ping")]))
    .method("leaf", "()V", ACC_PUBLIC | ACC_STATIC, ret());
    analysis(&[&c])
}

#[test]
fn closure_digests() {
    let v1 = chain_lib(1, false);
    let v2 = chain_lib(2, false);
    let f = m("p/C", "f", "()V");
    // f -> g -> h -> h2; h2 differs.
    assert_eq!(v1.graph.fingerprints[&f], v2.graph.fingerprints[&f]);
    assert_ne!(
        closure_digest(&f, &v1.graph).unwrap(),
        closure_digest(&f, &v2.graph).unwrap()
    );

    let leaf = m("p/C", "leaf", "()V");
    let mut h = Sha256::new();
    h.update(b"closure\n");
    h.update(format!("{leaf} {}\n", v1.graph.fingerprints[&leaf]).as_bytes());
    assert_eq!(closure_digest(&leaf, &v1.graph).unwrap(), Digest(h.finalize().into()));

    let ping = m("p/C", "ping", "()V");
    let pong = m("p/C", "pong", "()V");
    assert_eq!(v1.graph.reachable(&ping), v1.graph.reachable(&pong));
    assert_eq!(
        closure_digest(&ping, &v1.graph).unwrap(),
        closure_digest(&pong, &v1.graph).unwrap()
    );

    assert!(matches!(
        closure_digest(&m("p/C", "nope", "()V"), &v1.graph),
        Err(BytecodeError::NotInScope(_))
    ));
}

#[test]
fn api_diff_partitions() {
    let v1 = chain_lib(1, false);
    let called: BTreeSet<ApiElement> = v1.apis.iter().filter(|a| a.member_name != "h2").cloned().collect();

    let same = diff_apis(&v1, &chain_lib(1, false), &called).unwrap();
    assert_eq!(same.unchanged, called);

    let edited = diff_apis(&v1, &chain_lib(2, false), &called).unwrap();
    let changed: Vec<String> = edited.changed.iter().map(|a| a.to_string()).collect();
    assert_eq!(changed, ["p/C.f:()V", "p/C.g:()V", "p/C.h:()I", "p/C.h:()V"]);

    let removed = diff_apis(&v1, &chain_lib(1, true), &called).unwrap();
    let deleted: Vec<String> = removed.deleted.iter().map(|a| a.to_string()).collect();
    assert_eq!(deleted, ["p/C.g:()V"]);
    // f now calls a method outside the jar, so its closure shrank.
    assert!(removed.changed.iter().any(|a| a.member_name == "f"));
    assert_eq!(
        removed.deleted.len() + removed.changed.len() + removed.unchanged.len(),
        called.len()
    );
}

#[test]
fn analysis_json_round_trip() {
    let v1 = chain_lib(1, false);
    let back = ArtifactAnalysis::from_json(&v1.to_json()).unwrap();
    assert_eq!(back, v1);
}
