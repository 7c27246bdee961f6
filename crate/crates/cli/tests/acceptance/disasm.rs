//! A small class-file reader and disassembler, written against the JVM
//! class-file layout and kept separate from the crate's own parser.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

const ACC_PUBLIC: u16 = 0x0001;
const ACC_STATIC: u16 = 0x0008;
const ACC_ABSTRACT: u16 = 0x0400;

pub const INVOKEVIRTUAL: u8 = 0xb6;
pub const INVOKESPECIAL: u8 = 0xb7;
pub const INVOKESTATIC: u8 = 0xb8;
pub const INVOKEINTERFACE: u8 = 0xb9;

#[derive(Debug, Clone)]
enum Entry {
    Utf8(String),
    Class(u16),
    NameType(u16, u16),
    Ref(u16, u16),
    Str(u16),
    Other(Vec<u8>),
    Gap,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub access: u16,
    pub name: String,
    pub desc: String,
    pub code: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct Class {
    pub access: u16,
    pub name: String,
    pub super_name: Option<String>,
    pub interfaces: Vec<String>,
    pub fields: Vec<Member>,
    pub methods: Vec<Member>,
    pool: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Insn {
    pub offset: usize,
    pub opcode: u8,
    pub operand: Vec<u8>,
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> &[u8] {
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        s
    }
    fn u1(&mut self) -> u8 {
        self.take(1)[0]
    }
    fn u2(&mut self) -> u16 {
        let s = self.take(2);
        u16::from_be_bytes([s[0], s[1]])
    }
    fn u4(&mut self) -> u32 {
        let s = self.take(4);
        u32::from_be_bytes([s[0], s[1], s[2], s[3]])
    }
}

impl Class {
    pub fn read(bytes: &[u8]) -> Class {
        let mut r = Reader { b: bytes, pos: 0 };
        assert_eq!(r.u4(), 0xCAFE_BABE, "not a class file");
        r.take(4);
        let count = r.u2() as usize;
        let mut pool = vec![Entry::Gap];
        while pool.len() < count {
            let tag = r.u1();
            let e = match tag {
                1 => {
                    let n = r.u2() as usize;
                    Entry::Utf8(String::from_utf8_lossy(r.take(n)).into_owned())
                }
                7 => Entry::Class(r.u2()),
                8 => Entry::Str(r.u2()),
                9..=11 => Entry::Ref(r.u2(), r.u2()),
                12 => Entry::NameType(r.u2(), r.u2()),
                3 | 4 | 17 | 18 => Entry::Other(r.take(4).to_vec()),
                5 | 6 => Entry::Other(r.take(8).to_vec()),
                15 => Entry::Other(r.take(3).to_vec()),
                16 | 19 | 20 => Entry::Other(r.take(2).to_vec()),
                t => panic!("constant tag {t}"),
            };
            pool.push(e);
            if tag == 5 || tag == 6 {
                pool.push(Entry::Gap);
            }
        }
        let mut c = Class {
            access: 0,
            name: String::new(),
            super_name: None,
            interfaces: Vec::new(),
            fields: Vec::new(),
            methods: Vec::new(),
            pool,
        };
        c.access = r.u2();
        c.name = c.class_name(r.u2());
        let s = r.u2();
        c.super_name = (s != 0).then(|| c.class_name(s));
        for _ in 0..r.u2() {
            let i = r.u2();
            c.interfaces.push(c.class_name(i));
        }
        c.fields = (0..r.u2()).map(|_| c.member(&mut r)).collect();
        c.methods = (0..r.u2()).map(|_| c.member(&mut r)).collect();
        c
    }

    fn member(&self, r: &mut Reader) -> Member {
        let access = r.u2();
        let name = self.utf8(r.u2()).to_string();
        let desc = self.utf8(r.u2()).to_string();
        let mut code = None;
        for _ in 0..r.u2() {
            let attr = self.utf8(r.u2()).to_string();
            let len = r.u4() as usize;
            let body = r.take(len);
            if attr == "Code" {
                let n = u32::from_be_bytes([body[4], body[5], body[6], body[7]]) as usize;
                code = Some(body[8..8 + n].to_vec());
            }
        }
        Member {
            access,
            name,
            desc,
            code,
        }
    }

    fn utf8(&self, i: u16) -> &str {
        match &self.pool[i as usize] {
            Entry::Utf8(s) => s,
            e => panic!("#{i} is {e:?}, not utf8"),
        }
    }

    fn class_name(&self, i: u16) -> String {
        match &self.pool[i as usize] {
            Entry::Class(n) => self.utf8(*n).to_string(),
            e => panic!("#{i} is {e:?}, not a class"),
        }
    }

    /// `(owner, name, descriptor)` of a field or method reference.
    pub fn member_ref(&self, i: u16) -> (String, String, String) {
        match &self.pool[i as usize] {
            Entry::Ref(c, nt) => match &self.pool[*nt as usize] {
                Entry::NameType(n, d) => (
                    self.class_name(*c),
                    self.utf8(*n).to_string(),
                    self.utf8(*d).to_string(),
                ),
                e => panic!("#{nt} is {e:?}"),
            },
            e => panic!("#{i} is {e:?}, not a member reference"),
        }
    }

    fn symbolic(&self, i: u16) -> String {
        match &self.pool[i as usize] {
            Entry::Utf8(s) => format!("utf8:{s}"),
            Entry::Class(_) => format!("class:{}", self.class_name(i)),
            Entry::Str(s) => format!("string:{}", self.utf8(*s)),
            Entry::Ref(..) => {
                let (o, n, d) = self.member_ref(i);
                format!("ref:{o}.{n}:{d}")
            }
            Entry::NameType(n, d) => format!("nt:{}:{}", self.utf8(*n), self.utf8(*d)),
            Entry::Other(b) => format!("const:{b:02x?}"),
            Entry::Gap => panic!("#{i} is unusable"),
        }
    }

    pub fn is_public(&self) -> bool {
        self.access & ACC_PUBLIC != 0
    }

    pub fn method(&self, name: &str, desc: &str) -> Option<&Member> {
        self.methods.iter().find(|m| m.name == name && m.desc == desc)
    }

    pub fn field(&self, name: &str, desc: &str) -> Option<&Member> {
        self.fields.iter().find(|m| m.name == name && m.desc == desc)
    }

    /// Instructions of a body with constant-pool operands spelled out.
    pub fn symbolic_body(&self, code: &[u8]) -> Vec<String> {
        decode(code)
            .into_iter()
            .map(|i| match i.opcode {
                0x12 => format!("{:02x} {}", i.opcode, self.symbolic(i.operand[0] as u16)),
                0x13 | 0x14 | 0xb2..=0xbb | 0xbd | 0xc0 | 0xc1 | 0xc5 => {
                    let idx = u16::from_be_bytes([i.operand[0], i.operand[1]]);
                    format!("{:02x} {} {:02x?}", i.opcode, self.symbolic(idx), &i.operand[2..])
                }
                _ => format!("{:02x} {:02x?}", i.opcode, i.operand),
            })
            .collect()
    }
}

impl Member {
    pub fn is_static(&self) -> bool {
        self.access & ACC_STATIC != 0
    }
    pub fn is_public(&self) -> bool {
        self.access & ACC_PUBLIC != 0
    }
    pub fn is_abstract(&self) -> bool {
        self.access & ACC_ABSTRACT != 0
    }
}

/// Operand length of every opcode with a fixed layout.
fn operand_len(op: u8) -> usize {
    match op {
        0x10 | 0x12 | 0x15..=0x19 | 0x36..=0x3a | 0xa9 | 0xbc => 1,
        0x11 | 0x13 | 0x14 | 0x84 | 0x99..=0xa8 | 0xb2..=0xb8 | 0xbb | 0xbd | 0xc0 | 0xc1 | 0xc6 | 0xc7 => 2,
        0xc5 => 3,
        0xb9 | 0xba | 0xc8 | 0xc9 => 4,
        0x00..=0x0f | 0x1a..=0x35 | 0x3b..=0x83 | 0x85..=0x98 | 0xac..=0xb1 | 0xbe | 0xbf | 0xc2 | 0xc3 => 0,
        _ => panic!("opcode {op:#04x}"),
    }
}

pub fn decode(code: &[u8]) -> Vec<Insn> {
    let mut out = Vec::new();
    let mut pos = 0;
    let word = |at: usize| i32::from_be_bytes([code[at], code[at + 1], code[at + 2], code[at + 3]]);
    while pos < code.len() {
        let opcode = code[pos];
        let len = match opcode {
            0xaa | 0xab => {
                let pad = (4 - (pos + 1) % 4) % 4;
                let base = pos + 1 + pad;
                let body = if opcode == 0xaa {
                    12 + 4 * (word(base + 8) - word(base + 4) + 1) as usize
                } else {
                    8 + 8 * word(base + 4) as usize
                };
                pad + body
            }
            0xc4 if code[pos + 1] == 0x84 => 5,
            0xc4 => 3,
            op => operand_len(op),
        };
        out.push(Insn {
            offset: pos,
            opcode,
            operand: code[pos + 1..pos + 1 + len].to_vec(),
        });
        pos += 1 + len;
    }
    out
}

/// `(owner, name, descriptor)` with the invoking opcode, or a field access.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Node {
    Method(String, String, String),
    Field(String, String, String),
}

/// Classes by name, for hierarchy lookups.
pub struct World<'a> {
    pub classes: BTreeMap<&'a str, &'a Class>,
}

impl<'a> World<'a> {
    pub fn new(classes: impl IntoIterator<Item = &'a Class>) -> Self {
        World {
            classes: classes.into_iter().map(|c| (c.name.as_str(), c)).collect(),
        }
    }

    /// Superclass chain first, then superinterfaces, starting at `owner`.
    pub fn ancestry(&self, owner: &str) -> Vec<&'a Class> {
        let mut out = Vec::new();
        let mut chain = Vec::new();
        let mut cur = self.classes.get(owner).copied();
        while let Some(c) = cur {
            chain.push(c);
            cur = c.super_name.as_deref().and_then(|s| self.classes.get(s).copied());
        }
        out.extend(chain.iter().copied());
        let mut queue: VecDeque<&str> = chain
            .iter()
            .flat_map(|c| c.interfaces.iter().map(String::as_str))
            .collect();
        let mut seen = BTreeSet::new();
        while let Some(i) = queue.pop_front() {
            if !seen.insert(i) {
                continue;
            }
            if let Some(c) = self.classes.get(i) {
                out.push(c);
                queue.extend(c.interfaces.iter().map(String::as_str));
            }
        }
        out
    }

    pub fn resolve_method(&self, owner: &str, name: &str, desc: &str) -> Option<&'a Class> {
        if name == "<init>" {
            return self
                .classes
                .get(owner)
                .copied()
                .filter(|c| c.method(name, desc).is_some());
        }
        self.ancestry(owner)
            .into_iter()
            .find(|c| c.method(name, desc).is_some())
    }

    pub fn resolve_field(&self, owner: &str, name: &str, desc: &str) -> Option<&'a Class> {
        self.ancestry(owner).into_iter().find(|c| c.field(name, desc).is_some())
    }

    /// Strict subtypes declaring a concrete instance method `name desc`.
    pub fn overrides(&self, owner: &str, name: &str, desc: &str) -> Vec<&'a Class> {
        self.classes
            .values()
            .filter(|c| c.name != owner)
            .filter(|c| self.ancestry(&c.name).iter().any(|a| a.name == owner))
            .filter(|c| c.method(name, desc).is_some_and(|m| !m.is_static() && !m.is_abstract()))
            .copied()
            .collect()
    }

    /// Targets of one reference in a body: the resolved declaration and,
    /// for dispatched calls, its overrides.
    pub fn targets(&self, opcode: u8, owner: &str, name: &str, desc: &str) -> Vec<Node> {
        match opcode {
            0xb2..=0xb5 => self
                .resolve_field(owner, name, desc)
                .map(|c| vec![Node::Field(c.name.clone(), name.into(), desc.into())])
                .unwrap_or_default(),
            INVOKEVIRTUAL..=INVOKEINTERFACE => {
                let Some(decl) = self.resolve_method(owner, name, desc) else {
                    return Vec::new();
                };
                let mut out = vec![Node::Method(decl.name.clone(), name.into(), desc.into())];
                if opcode == INVOKEVIRTUAL || opcode == INVOKEINTERFACE {
                    out.extend(
                        self.overrides(&decl.name, name, desc)
                            .into_iter()
                            .map(|c| Node::Method(c.name.clone(), name.into(), desc.into())),
                    );
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Field and method references of a body.
    pub fn references(class: &Class, code: &[u8]) -> Vec<(u8, String, String, String)> {
        decode(code)
            .into_iter()
            .filter(|i| (0xb2..=INVOKEINTERFACE).contains(&i.opcode))
            .map(|i| {
                let (o, n, d) = class.member_ref(u16::from_be_bytes([i.operand[0], i.operand[1]]));
                (i.opcode, o, n, d)
            })
            .collect()
    }

    /// Everything reachable from `entries` inside this world.
    pub fn closure(&self, entries: &[Node]) -> BTreeSet<Node> {
        let mut seen: BTreeSet<Node> = BTreeSet::new();
        let mut queue: VecDeque<Node> = entries.iter().cloned().collect();
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n.clone()) {
                continue;
            }
            let Node::Method(owner, name, desc) = &n else {
                continue;
            };
            let Some(class) = self.classes.get(owner.as_str()) else {
                continue;
            };
            let Some(code) = class.method(name, desc).and_then(|m| m.code.as_ref()) else {
                continue;
            };
            for (op, o, nm, d) in Self::references(class, code) {
                queue.extend(self.targets(op, &o, &nm, &d));
            }
        }
        seen
    }
}
