//! Programmatic class-file construction, mainly for fixtures.
//!
//! ```
//! use depscope_core::bytecode::builder::{Asm, ClassBuilder};
//! use depscope_core::bytecode::classfile::ACC_PUBLIC;
//!
//! let mut c = ClassBuilder::new("com/acme/Greeter");
//! let mut body = Asm::new();
//! body.ldc_str("hi").areturn();
//! c.method("greet", "()Ljava/lang/String;", ACC_PUBLIC, body);
//! let bytes = c.to_bytes();
//! assert_eq!(&bytes[..4], &[0xCA, 0xFE, 0xBA, 0xBE]);
//! ```

use super::classfile::*;
use super::insn::{self, op, Insn, Operand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label(usize);

#[derive(Debug, Clone)]
enum AsmInsn {
    Plain(u8),
    Int(i32),
    Str(String),
    Long(i64),
    Local(u8, u16),
    Iinc(u16, i16),
    Member {
        opcode: u8,
        owner: String,
        name: String,
        desc: String,
        interface: bool,
    },
    Type(u8, String),
    Jump(u8, Label),
    TableSwitch {
        low: i32,
        default: Label,
        targets: Vec<Label>,
    },
    LookupSwitch {
        default: Label,
        pairs: Vec<(i32, Label)>,
    },
    Indy {
        name: String,
        desc: String,
    },
}

#[derive(Debug, Clone)]
enum Item {
    Insn(AsmInsn),
    Bind(Label),
}

/// Symbolic method body; constant-pool entries are created when the owning
/// class is built.
#[derive(Debug, Clone, Default)]
pub struct Asm {
    items: Vec<Item>,
    handlers: Vec<(Label, Label, Label, Option<String>)>,
    labels: usize,
    max_locals: u16,
}

impl Asm {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, i: AsmInsn) -> &mut Self {
        self.items.push(Item::Insn(i));
        self
    }

    pub fn op(&mut self, opcode: u8) -> &mut Self {
        self.push(AsmInsn::Plain(opcode))
    }

    /// Pushes an int constant using the shortest encoding.
    pub fn iconst(&mut self, v: i32) -> &mut Self {
        self.push(AsmInsn::Int(v))
    }

    pub fn lconst(&mut self, v: i64) -> &mut Self {
        self.push(AsmInsn::Long(v))
    }

    pub fn ldc_str(&mut self, s: &str) -> &mut Self {
        self.push(AsmInsn::Str(s.to_string()))
    }

    pub fn load(&mut self, opcode: u8, index: u16) -> &mut Self {
        self.max_locals = self.max_locals.max(index + 1);
        self.push(AsmInsn::Local(opcode, index))
    }

    pub fn aload(&mut self, index: u16) -> &mut Self {
        self.load(op::ALOAD, index)
    }

    pub fn iload(&mut self, index: u16) -> &mut Self {
        self.load(op::ILOAD, index)
    }

    pub fn istore(&mut self, index: u16) -> &mut Self {
        self.load(op::ISTORE, index)
    }

    pub fn iinc(&mut self, index: u16, delta: i16) -> &mut Self {
        self.max_locals = self.max_locals.max(index + 1);
        self.push(AsmInsn::Iinc(index, delta))
    }

    fn member(&mut self, opcode: u8, owner: &str, name: &str, desc: &str, interface: bool) -> &mut Self {
        self.push(AsmInsn::Member {
            opcode,
            owner: owner.into(),
            name: name.into(),
            desc: desc.into(),
            interface,
        })
    }

    pub fn invokevirtual(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::INVOKEVIRTUAL, owner, name, desc, false)
    }

    pub fn invokespecial(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::INVOKESPECIAL, owner, name, desc, false)
    }

    pub fn invokestatic(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::INVOKESTATIC, owner, name, desc, false)
    }

    pub fn invokeinterface(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::INVOKEINTERFACE, owner, name, desc, true)
    }

    pub fn invokedynamic(&mut self, name: &str, desc: &str) -> &mut Self {
        self.push(AsmInsn::Indy {
            name: name.into(),
            desc: desc.into(),
        })
    }

    pub fn getstatic(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::GETSTATIC, owner, name, desc, false)
    }

    pub fn putstatic(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::PUTSTATIC, owner, name, desc, false)
    }

    pub fn getfield(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::GETFIELD, owner, name, desc, false)
    }

    pub fn putfield(&mut self, owner: &str, name: &str, desc: &str) -> &mut Self {
        self.member(op::PUTFIELD, owner, name, desc, false)
    }

    pub fn new_object(&mut self, class: &str) -> &mut Self {
        self.push(AsmInsn::Type(op::NEW, class.into()))
    }

    pub fn checkcast(&mut self, class: &str) -> &mut Self {
        self.push(AsmInsn::Type(op::CHECKCAST, class.into()))
    }

    pub fn label(&mut self) -> Label {
        self.labels += 1;
        Label(self.labels - 1)
    }

    pub fn bind(&mut self, label: Label) -> &mut Self {
        self.items.push(Item::Bind(label));
        self
    }

    pub fn jump(&mut self, opcode: u8, label: Label) -> &mut Self {
        self.push(AsmInsn::Jump(opcode, label))
    }

    pub fn tableswitch(&mut self, low: i32, default: Label, targets: &[Label]) -> &mut Self {
        self.push(AsmInsn::TableSwitch {
            low,
            default,
            targets: targets.to_vec(),
        })
    }

    pub fn lookupswitch(&mut self, default: Label, pairs: &[(i32, Label)]) -> &mut Self {
        self.push(AsmInsn::LookupSwitch {
            default,
            pairs: pairs.to_vec(),
        })
    }

    pub fn try_catch(&mut self, start: Label, end: Label, handler: Label, catch: Option<&str>) -> &mut Self {
        self.handlers.push((start, end, handler, catch.map(str::to_string)));
        self
    }

    pub fn ret(&mut self) -> &mut Self {
        self.op(op::RETURN)
    }

    pub fn areturn(&mut self) -> &mut Self {
        self.op(op::ARETURN)
    }

    pub fn ireturn(&mut self) -> &mut Self {
        self.op(op::IRETURN)
    }

    pub fn pop(&mut self) -> &mut Self {
        self.op(op::POP)
    }
}

/// Number of local slots taken by a method's parameters.
pub fn parameter_slots(desc: &str) -> u16 {
    let inner = desc.strip_prefix('(').and_then(|d| d.split(')').next()).unwrap_or("");
    let mut slots = 0;
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            'J' | 'D' => slots += 2,
            'L' => {
                for c in chars.by_ref() {
                    if c == ';' {
                        break;
                    }
                }
                slots += 1;
            }
            '[' => {
                let mut c = chars.next();
                while c == Some('[') {
                    c = chars.next();
                }
                if c == Some('L') {
                    for c in chars.by_ref() {
                        if c == ';' {
                            break;
                        }
                    }
                }
                slots += 1;
            }
            _ => slots += 1,
        }
    }
    slots
}

/// Builds one class file.
#[derive(Debug, Clone)]
pub struct ClassBuilder {
    cp: ConstantPool,
    major: u16,
    access: u16,
    this_class: u16,
    super_class: u16,
    interfaces: Vec<u16>,
    fields: Vec<Member>,
    methods: Vec<Member>,
    inner: Vec<InnerClassEntry>,
    bootstrap: Option<u16>,
    debug: bool,
}

impl ClassBuilder {
    /// A public class extending `java/lang/Object`.
    pub fn new(name: &str) -> Self {
        let mut cp = ConstantPool::new();
        let this_class = class_ref(&mut cp, name);
        let super_class = class_ref(&mut cp, "java/lang/Object");
        ClassBuilder {
            cp,
            major: 52,
            access: ACC_PUBLIC | ACC_SUPER,
            this_class,
            super_class,
            interfaces: Vec::new(),
            fields: Vec::new(),
            methods: Vec::new(),
            inner: Vec::new(),
            bootstrap: None,
            debug: false,
        }
    }

    pub fn interface(name: &str) -> Self {
        let mut b = ClassBuilder::new(name);
        b.access = ACC_PUBLIC | ACC_INTERFACE | ACC_ABSTRACT;
        b
    }

    pub fn name(&self) -> &str {
        self.cp.class_name(self.this_class).expect("set in new")
    }

    pub fn access(&mut self, flags: u16) -> &mut Self {
        self.access = flags;
        self
    }

    pub fn version(&mut self, major: u16) -> &mut Self {
        self.major = major;
        self
    }

    pub fn extends(&mut self, super_name: &str) -> &mut Self {
        self.super_class = class_ref(&mut self.cp, super_name);
        self
    }

    pub fn implements(&mut self, iface: &str) -> &mut Self {
        let i = class_ref(&mut self.cp, iface);
        self.interfaces.push(i);
        self
    }

    /// Records this class as a member class of `outer` with the given
    /// inner-class flags.
    pub fn nested_in(&mut self, outer: &str, simple_name: &str, flags: u16) -> &mut Self {
        let inner_class = self.this_class;
        let outer_class = class_ref(&mut self.cp, outer);
        let inner_name = utf8(&mut self.cp, simple_name);
        self.inner.push(InnerClassEntry {
            inner_class,
            outer_class,
            inner_name,
            access_flags: flags,
        });
        self
    }

    pub fn anonymous(&mut self) -> &mut Self {
        let inner_class = self.this_class;
        self.inner.push(InnerClassEntry {
            inner_class,
            outer_class: 0,
            inner_name: 0,
            access_flags: 0,
        });
        self
    }

    /// Emit line-number tables and a source-file attribute.
    pub fn debug(&mut self, on: bool) -> &mut Self {
        self.debug = on;
        self
    }

    pub fn field(&mut self, name: &str, desc: &str, flags: u16) -> &mut Self {
        let name_index = utf8(&mut self.cp, name);
        let descriptor_index = utf8(&mut self.cp, desc);
        self.fields.push(Member {
            access_flags: flags,
            name_index,
            descriptor_index,
            attributes: Vec::new(),
        });
        self
    }

    /// Adds a method without a body (abstract or native per `flags`).
    pub fn declare(&mut self, name: &str, desc: &str, flags: u16) -> &mut Self {
        let name_index = utf8(&mut self.cp, name);
        let descriptor_index = utf8(&mut self.cp, desc);
        self.methods.push(Member {
            access_flags: flags,
            name_index,
            descriptor_index,
            attributes: Vec::new(),
        });
        self
    }

    pub fn method(&mut self, name: &str, desc: &str, flags: u16, body: Asm) -> &mut Self {
        let name_index = utf8(&mut self.cp, name);
        let descriptor_index = utf8(&mut self.cp, desc);
        let this_slot = if flags & ACC_STATIC == 0 { 1 } else { 0 };
        let code = self.assemble(&body, this_slot + parameter_slots(desc));
        let code_name = utf8(&mut self.cp, "Code");
        self.methods.push(Member {
            access_flags: flags,
            name_index,
            descriptor_index,
            attributes: vec![Attribute {
                name_index: code_name,
                info: code.to_bytes(),
            }],
        });
        self
    }

    /// A public no-arg constructor calling the superclass constructor.
    pub fn default_constructor(&mut self) -> &mut Self {
        let super_name = self.cp.class_name(self.super_class).expect("set").to_string();
        let mut a = Asm::new();
        a.aload(0).invokespecial(&super_name, "<init>", "()V").ret();
        self.method("<init>", "()V", ACC_PUBLIC, a)
    }

    fn assemble(&mut self, body: &Asm, param_slots: u16) -> CodeAttribute {
        let cp = &mut self.cp;
        let mut label_at = vec![usize::MAX; body.labels];
        let mut count = 0;
        for item in &body.items {
            match item {
                Item::Bind(l) => label_at[l.0] = count,
                Item::Insn(_) => count += 1,
            }
        }
        let at = |l: &Label| {
            let i = label_at[l.0];
            assert!(i != usize::MAX, "label bound nowhere");
            i as u32
        };
        let mut insns = Vec::with_capacity(count);
        for item in &body.items {
            let Item::Insn(i) = item else { continue };
            let insn = match i {
                AsmInsn::Plain(o) => Insn::new(*o, Operand::None),
                AsmInsn::Int(v) => match *v {
                    -1..=5 => Insn::new((op::ICONST_0 as i32 + v) as u8, Operand::None),
                    -128..=127 => Insn::new(op::BIPUSH, Operand::Byte(*v as i8)),
                    -32768..=32767 => Insn::new(op::SIPUSH, Operand::Short(*v as i16)),
                    _ => Insn::new(op::LDC, Operand::Cp(intern(cp, Constant::Integer(*v)))),
                },
                AsmInsn::Long(v) => Insn::new(op::LDC2_W, Operand::Cp(intern(cp, Constant::Long(*v)))),
                AsmInsn::Str(s) => {
                    let u = utf8(cp, s);
                    Insn::new(op::LDC, Operand::Cp(intern(cp, Constant::String(u))))
                }
                AsmInsn::Local(o, n) => Insn::new(*o, Operand::Local(*n)),
                AsmInsn::Iinc(n, d) => Insn::new(op::IINC, Operand::Iinc { index: *n, delta: *d }),
                AsmInsn::Member {
                    opcode,
                    owner,
                    name,
                    desc,
                    interface,
                } => {
                    let c = class_ref(cp, owner);
                    let nt = name_and_type(cp, name, desc);
                    let r = if *opcode <= op::PUTFIELD {
                        Constant::Fieldref(c, nt)
                    } else if *interface {
                        Constant::InterfaceMethodref(c, nt)
                    } else {
                        Constant::Methodref(c, nt)
                    };
                    let index = intern(cp, r);
                    if *opcode == op::INVOKEINTERFACE {
                        Insn::new(
                            *opcode,
                            Operand::InvokeInterface {
                                index,
                                count: (parameter_slots(desc) + 1) as u8,
                            },
                        )
                    } else {
                        Insn::new(*opcode, Operand::Cp(index))
                    }
                }
                AsmInsn::Type(o, class) => Insn::new(*o, Operand::Cp(class_ref(cp, class))),
                AsmInsn::Jump(o, l) => Insn::new(*o, Operand::Branch(at(l))),
                AsmInsn::TableSwitch { low, default, targets } => Insn::new(
                    op::TABLESWITCH,
                    Operand::TableSwitch {
                        default: at(default),
                        low: *low,
                        targets: targets.iter().map(at).collect(),
                    },
                ),
                AsmInsn::LookupSwitch { default, pairs } => {
                    let mut pairs: Vec<(i32, u32)> = pairs.iter().map(|(k, l)| (*k, at(l))).collect();
                    pairs.sort_by_key(|p| p.0);
                    Insn::new(
                        op::LOOKUPSWITCH,
                        Operand::LookupSwitch {
                            default: at(default),
                            pairs,
                        },
                    )
                }
                AsmInsn::Indy { name, desc } => {
                    let bsm = 0;
                    let nt = name_and_type(cp, name, desc);
                    Insn::new(
                        op::INVOKEDYNAMIC,
                        Operand::InvokeDynamic(intern(cp, Constant::InvokeDynamic(bsm, nt))),
                    )
                }
            };
            insns.push(insn);
        }
        if body.items.iter().any(|i| matches!(i, Item::Insn(AsmInsn::Indy { .. }))) && self.bootstrap.is_none() {
            let cp = &mut self.cp;
            let owner = class_ref(cp, "java/lang/invoke/LambdaMetafactory");
            let nt = name_and_type(
                cp,
                "metafactory",
                "(Ljava/lang/invoke/MethodHandles$Lookup;Ljava/lang/String;Ljava/lang/invoke/MethodType;Ljava/lang/invoke/MethodType;Ljava/lang/invoke/MethodHandle;Ljava/lang/invoke/MethodType;)Ljava/lang/invoke/CallSite;",
            );
            let mref = intern(cp, Constant::Methodref(owner, nt));
            self.bootstrap = Some(intern(cp, Constant::MethodHandle(6, mref)));
        }
        for (i, insn) in insns.iter_mut().enumerate() {
            insn.offset = i as u32;
        }
        let (code, offsets) = insn::encode(&insns, insns.len() as u32).expect("assembled body encodes");
        let pc = |l: &Label| offsets[&at(l)] as u16;
        let exception_table = body
            .handlers
            .iter()
            .map(|(s, e, h, c)| ExceptionHandler {
                start_pc: pc(s),
                end_pc: pc(e),
                handler_pc: pc(h),
                catch_type: c.as_deref().map(|c| class_ref(&mut self.cp, c)).unwrap_or(0),
            })
            .collect();
        let mut attributes = Vec::new();
        if self.debug {
            let mut info = Vec::new();
            put_u2(&mut info, insns.len() as u16);
            for (i, insn) in insns.iter().enumerate() {
                put_u2(&mut info, offsets[&insn.offset] as u16);
                put_u2(&mut info, 10 + i as u16);
            }
            attributes.push(Attribute {
                name_index: utf8(&mut self.cp, "LineNumberTable"),
                info,
            });
        }
        CodeAttribute {
            max_stack: 16,
            max_locals: body.max_locals.max(param_slots),
            code,
            exception_table,
            attributes,
        }
    }

    pub fn build(&self) -> ClassFile {
        let mut b = self.clone();
        let mut attributes = Vec::new();
        if b.debug {
            let name = b
                .name()
                .rsplit('/')
                .next()
                .unwrap_or("X")
                .split('$')
                .next()
                .unwrap_or("X")
                .to_string();
            let source = utf8(&mut b.cp, &format!("{name}.java"));
            attributes.push(Attribute {
                name_index: utf8(&mut b.cp, "SourceFile"),
                info: source.to_be_bytes().to_vec(),
            });
        }
        if !b.inner.is_empty() {
            let mut info = Vec::new();
            put_u2(&mut info, b.inner.len() as u16);
            for e in &b.inner {
                for v in [e.inner_class, e.outer_class, e.inner_name, e.access_flags] {
                    put_u2(&mut info, v);
                }
            }
            attributes.push(Attribute {
                name_index: utf8(&mut b.cp, "InnerClasses"),
                info,
            });
        }
        if let Some(handle) = b.bootstrap {
            let mut info = Vec::new();
            for v in [1, handle, 0] {
                put_u2(&mut info, v);
            }
            attributes.push(Attribute {
                name_index: utf8(&mut b.cp, "BootstrapMethods"),
                info,
            });
        }
        ClassFile {
            minor_version: 0,
            major_version: b.major,
            constant_pool: b.cp,
            access_flags: b.access,
            this_class: b.this_class,
            super_class: b.super_class,
            interfaces: b.interfaces,
            fields: b.fields,
            methods: b.methods,
            attributes,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.build().to_bytes()
    }
}

fn intern(cp: &mut ConstantPool, c: Constant) -> u16 {
    cp.find(&c).unwrap_or_else(|| cp.push(c))
}

fn utf8(cp: &mut ConstantPool, s: &str) -> u16 {
    intern(cp, Constant::Utf8(s.to_string()))
}

fn class_ref(cp: &mut ConstantPool, name: &str) -> u16 {
    let n = utf8(cp, name);
    intern(cp, Constant::Class(n))
}

fn name_and_type(cp: &mut ConstantPool, name: &str, desc: &str) -> u16 {
    let n = utf8(cp, name);
    let d = utf8(cp, desc);
    intern(cp, Constant::NameAndType(n, d))
}
