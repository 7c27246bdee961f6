//! Method fingerprints ignore constant-pool layout but not opcodes.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use depscope_core::bytecode::classfile::ClassFile;
use depscope_core::bytecode::rewrite::{live_indices, remap_constant_pool};
use depscope_core::bytecode::{method_fingerprint, ClassModel, Digest};
use depscope_testkit::alerts::{effort_chain, p3, reach_scenarios, update_cases};
use depscope_testkit::corpus::generate;

use crate::disasm::decode;

const PERMUTATIONS: usize = 1000;

fn fixture_classes() -> Vec<Vec<u8>> {
    let mut specs = Vec::new();
    for ws in [p3(), effort_chain()] {
        specs.extend(ws.versions.into_iter().flat_map(|v| v.classes));
        specs.extend(ws.projects.into_iter().flat_map(|p| p.main));
    }
    for sc in reach_scenarios() {
        specs.extend(sc.version.classes);
        specs.extend(sc.projects.into_iter().flat_map(|p| p.main));
    }
    for c in update_cases() {
        specs.extend(c.old.classes);
        specs.extend(c.new.classes);
    }
    let corpus = generate(3, 6, 4);
    specs.extend(
        corpus
            .workspace
            .projects
            .into_iter()
            .flat_map(|p| p.main.into_iter().chain(p.test)),
    );
    let mut out: Vec<Vec<u8>> = specs.iter().flat_map(|c| [c.compile(false), c.compile(true)]).collect();
    out.sort();
    out.dedup();
    out
}

fn fingerprints(bytes: &[u8]) -> BTreeMap<(String, String), Digest> {
    ClassModel::parse(bytes)
        .unwrap()
        .methods
        .into_iter()
        .map(|m| ((m.name, m.descriptor), m.fingerprint))
        .collect()
}

/// Another opcode with the same operand layout.
fn substitute(op: u8) -> Option<u8> {
    Some(match op {
        0x00 => 0x01,
        0x01..=0x0f | 0x1a..=0x35 | 0x3b..=0x83 | 0x85..=0x98 | 0xac..=0xb1 | 0xbe | 0xbf | 0xc2 | 0xc3 => 0x00,
        0x10 => 0x15,
        0x15..=0x19 | 0x36..=0x3a | 0xa9 | 0xbc => 0x10,
        0xb2 => 0xb3,
        0xb3 => 0xb2,
        0xb4 => 0xb5,
        0xb5 => 0xb4,
        0xb6 => 0xb8,
        0xb7 | 0xb8 => 0xb6,
        _ => return None,
    })
}

pub fn check() -> String {
    let classes = fixture_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    let mut methods = 0;
    for _ in 0..PERMUTATIONS {
        let bytes = classes.choose(&mut rng).unwrap();
        let cf = ClassFile::parse(bytes).unwrap();
        let mut order = live_indices(&cf.constant_pool);
        order.shuffle(&mut rng);
        let permuted = remap_constant_pool(&cf, &order).unwrap().to_bytes();
        let before = fingerprints(bytes);
        assert_eq!(fingerprints(&permuted), before, "permutation changed a fingerprint");
        methods += before.len();
    }

    let mut mutations = 0;
    for bytes in &classes {
        let cf = ClassFile::parse(bytes).unwrap();
        for m in &cf.methods {
            let Some(code) = cf.code(m).unwrap() else {
                continue;
            };
            let original = method_fingerprint(Some(&code), &cf.constant_pool).unwrap();
            for insn in decode(&code.code) {
                let Some(op) = substitute(insn.opcode) else {
                    continue;
                };
                let mut mutated = code.clone();
                mutated.code[insn.offset] = op;
                let fp = method_fingerprint(Some(&mutated), &cf.constant_pool).unwrap();
                assert_ne!(
                    fp, original,
                    "opcode {:#04x} -> {op:#04x} at {} left the fingerprint unchanged",
                    insn.opcode, insn.offset
                );
                mutations += 1;
            }
        }
    }
    format!("{PERMUTATIONS} permutations over {methods} methods, {mutations} opcode mutations")
}
