//! Symbolic class descriptions compiled to real class files.
//!
//! Tests keep the symbolic form around so oracles can reason about call
//! structure without going through the crate's own parser.

use depscope_core::bytecode::builder::{Asm, ClassBuilder};
use depscope_core::bytecode::classfile::*;
use depscope_core::bytecode::insn::op;
use depscope_core::bytecode::jar::write_jar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Invoke {
    Static,
    Virtual,
    Interface,
    Special,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Call {
        kind: Invoke,
        owner: String,
        name: String,
        desc: String,
    },
    GetStatic {
        owner: String,
        name: String,
        desc: String,
    },
    /// Pushes and drops a constant; varies a body without changing calls.
    Const(i32),
}

impl Op {
    pub fn call(kind: Invoke, owner: &str, name: &str) -> Op {
        Op::Call {
            kind,
            owner: owner.into(),
            name: name.into(),
            desc: "()V".into(),
        }
    }

    pub fn stat(owner: &str, name: &str) -> Op {
        Op::call(Invoke::Static, owner, name)
    }

    pub fn virt(owner: &str, name: &str) -> Op {
        Op::call(Invoke::Virtual, owner, name)
    }

    pub fn iface(owner: &str, name: &str) -> Op {
        Op::call(Invoke::Interface, owner, name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpec {
    pub name: String,
    pub desc: String,
    pub flags: u16,
    /// `None` declares an abstract method.
    pub body: Option<Vec<Op>>,
}

impl MethodSpec {
    pub fn new(name: &str, flags: u16, body: Vec<Op>) -> Self {
        MethodSpec {
            name: name.into(),
            desc: "()V".into(),
            flags,
            body: Some(body),
        }
    }

    pub fn is_static(&self) -> bool {
        self.flags & ACC_STATIC != 0
    }

    pub fn is_abstract(&self) -> bool {
        self.body.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub desc: String,
    pub flags: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSpec {
    pub name: String,
    pub super_name: Option<String>,
    pub interfaces: Vec<String>,
    pub interface: bool,
    pub public: bool,
    pub methods: Vec<MethodSpec>,
    pub fields: Vec<FieldSpec>,
}

impl ClassSpec {
    pub fn class(name: &str) -> Self {
        ClassSpec {
            name: name.into(),
            super_name: None,
            interfaces: Vec::new(),
            interface: false,
            public: true,
            methods: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn interface(name: &str) -> Self {
        ClassSpec {
            interface: true,
            ..ClassSpec::class(name)
        }
    }

    pub fn extends(mut self, s: &str) -> Self {
        self.super_name = Some(s.into());
        self
    }

    pub fn implements(mut self, i: &str) -> Self {
        self.interfaces.push(i.into());
        self
    }

    pub fn package_private(mut self) -> Self {
        self.public = false;
        self
    }

    /// Public static method.
    pub fn stat(mut self, name: &str, body: Vec<Op>) -> Self {
        self.methods.push(MethodSpec::new(name, ACC_PUBLIC | ACC_STATIC, body));
        self
    }

    /// Public instance method.
    pub fn inst(mut self, name: &str, body: Vec<Op>) -> Self {
        self.methods.push(MethodSpec::new(name, ACC_PUBLIC, body));
        self
    }

    /// Private static helper.
    pub fn private(mut self, name: &str, body: Vec<Op>) -> Self {
        self.methods.push(MethodSpec::new(name, ACC_PRIVATE | ACC_STATIC, body));
        self
    }

    pub fn abstract_method(mut self, name: &str) -> Self {
        self.methods.push(MethodSpec {
            name: name.into(),
            desc: "()V".into(),
            flags: ACC_PUBLIC | ACC_ABSTRACT,
            body: None,
        });
        self
    }

    pub fn with_method(mut self, m: MethodSpec) -> Self {
        self.methods.push(m);
        self
    }

    pub fn field(mut self, name: &str, desc: &str) -> Self {
        self.fields.push(FieldSpec {
            name: name.into(),
            desc: desc.into(),
            flags: ACC_PUBLIC | ACC_STATIC,
        });
        self
    }

    pub fn method(&self, name: &str) -> Option<&MethodSpec> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn method_mut(&mut self, name: &str) -> Option<&mut MethodSpec> {
        self.methods.iter_mut().find(|m| m.name == name)
    }

    pub fn compile(&self, debug: bool) -> Vec<u8> {
        let mut b = if self.interface {
            ClassBuilder::interface(&self.name)
        } else {
            ClassBuilder::new(&self.name)
        };
        if !self.public {
            let access = if self.interface {
                ACC_INTERFACE | ACC_ABSTRACT
            } else {
                ACC_SUPER
            };
            b.access(access);
        }
        if let Some(s) = &self.super_name {
            b.extends(s);
        }
        for i in &self.interfaces {
            b.implements(i);
        }
        b.debug(debug);
        for f in &self.fields {
            b.field(&f.name, &f.desc, f.flags);
        }
        for m in &self.methods {
            match &m.body {
                None => {
                    b.declare(&m.name, &m.desc, m.flags);
                }
                Some(ops) => {
                    b.method(&m.name, &m.desc, m.flags, assemble(ops));
                }
            }
        }
        b.to_bytes()
    }

    pub fn entry_name(&self) -> String {
        format!("{}.class", self.name)
    }
}

fn assemble(ops: &[Op]) -> Asm {
    let mut a = Asm::new();
    for o in ops {
        match o {
            Op::Call {
                kind,
                owner,
                name,
                desc,
            } => {
                if *kind != Invoke::Static {
                    a.op(op::ACONST_NULL);
                }
                match kind {
                    Invoke::Static => a.invokestatic(owner, name, desc),
                    Invoke::Virtual => a.invokevirtual(owner, name, desc),
                    Invoke::Interface => a.invokeinterface(owner, name, desc),
                    Invoke::Special => a.invokespecial(owner, name, desc),
                };
            }
            Op::GetStatic { owner, name, desc } => {
                a.getstatic(owner, name, desc).pop();
            }
            Op::Const(v) => {
                a.iconst(*v).pop();
            }
        }
    }
    a.ret();
    a
}

/// Compiles classes into a jar.
pub fn jar(classes: &[ClassSpec], debug: bool) -> Vec<u8> {
    let entries: Vec<(String, Vec<u8>)> = classes.iter().map(|c| (c.entry_name(), c.compile(debug))).collect();
    write_jar(&entries)
}

/// Writes compiled classes below `dir` as `.class` files.
pub fn write_class_dir(dir: &std::path::Path, classes: &[ClassSpec]) -> std::io::Result<()> {
    for c in classes {
        let path = dir.join(c.entry_name());
        std::fs::create_dir_all(path.parent().expect("has parent"))?;
        std::fs::write(path, c.compile(false))?;
    }
    Ok(())
}
