//! Resolved per-class view used by the analyses, and body fingerprints.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::classfile::*;
use super::insn::{self, op, Insn, Operand};

/// SHA-256 digest, serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

/// Digest of a normalized method body.
pub type MethodFingerprint = Digest;

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    /// The fingerprint of abstract and native methods.
    pub fn empty() -> Self {
        Digest::of(b"")
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}

/// Fingerprints a method body: opcodes with constant-pool operands replaced
/// by their symbolic form, branch targets as instruction indices, and the
/// exception table. Attributes nested in the code (line numbers, local
/// variable tables, stack maps) do not contribute.
pub fn method_fingerprint(
    code: Option<&CodeAttribute>,
    cp: &ConstantPool,
) -> Result<MethodFingerprint, ClassFileError> {
    let Some(code) = code else {
        return Ok(Digest::empty());
    };
    let insns = insn::decode(&code.code)?;
    fingerprint_insns(&insns, code, cp)
}

pub(crate) fn fingerprint_insns(
    insns: &[Insn],
    code: &CodeAttribute,
    cp: &ConstantPool,
) -> Result<MethodFingerprint, ClassFileError> {
    let index_of = |offset: u32| -> Result<usize, ClassFileError> {
        if offset as usize == code.code.len() {
            return Ok(insns.len());
        }
        insns
            .binary_search_by_key(&offset, |i| i.offset)
            .map_err(|_| ClassFileError::BadCode(format!("offset {offset} is not an instruction boundary")))
    };
    // A dangling pool index still fingerprints deterministically; callers
    // that need the reference report it separately.
    let symbolic = |i: u16| cp.symbolic(i).unwrap_or_else(|_| format!("?{i}"));
    let mut h = Sha256::new();
    h.update(b"body\n");
    for insn in insns {
        let opcode = match insn.opcode {
            op::LDC_W => op::LDC,
            op::GOTO_W => op::GOTO,
            op::JSR_W => op::JSR,
            o => o,
        };
        let operand = match &insn.operand {
            Operand::None => String::new(),
            Operand::Byte(v) => v.to_string(),
            Operand::Short(v) => v.to_string(),
            Operand::Local(i) => format!("l{i}"),
            Operand::Iinc { index, delta } => format!("l{index} {delta}"),
            Operand::Cp(i) | Operand::InvokeDynamic(i) => symbolic(*i),
            Operand::InvokeInterface { index, count } => format!("{} {count}", symbolic(*index)),
            Operand::MultiANewArray { index, dims } => format!("{} {dims}", symbolic(*index)),
            Operand::NewArray(t) => t.to_string(),
            Operand::Branch(t) => format!("@{}", index_of(*t)?),
            Operand::TableSwitch { default, low, targets } => {
                let mut s = format!("@{} {low}", index_of(*default)?);
                for t in targets {
                    s.push_str(&format!(" @{}", index_of(*t)?));
                }
                s
            }
            Operand::LookupSwitch { default, pairs } => {
                let mut s = format!("@{}", index_of(*default)?);
                for (k, t) in pairs {
                    s.push_str(&format!(" {k}:@{}", index_of(*t)?));
                }
                s
            }
        };
        h.update(format!("{opcode:02x} {operand}\n").as_bytes());
    }
    for e in &code.exception_table {
        let catch = if e.catch_type == 0 {
            "any".to_string()
        } else {
            symbolic(e.catch_type)
        };
        h.update(
            format!(
                "catch @{} @{} @{} {catch}\n",
                index_of(e.start_pc as u32)?,
                index_of(e.end_pc as u32)?,
                index_of(e.handler_pc as u32)?
            )
            .as_bytes(),
        );
    }
    Ok(Digest(h.finalize().into()))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MemberRef {
    pub owner: String,
    pub name: String,
    pub descriptor: String,
}

/// A field access or invoke instruction in a method body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeRef {
    pub opcode: u8,
    pub target: MemberRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodModel {
    pub name: String,
    pub descriptor: String,
    pub access: u16,
    pub fingerprint: MethodFingerprint,
    pub refs: Vec<CodeRef>,
    pub invokedynamic_sites: usize,
    /// Instructions whose symbolic reference could not be resolved.
    pub unresolved: Vec<String>,
}

impl MethodModel {
    pub fn is(&self, flag: u16) -> bool {
        self.access & flag != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldModel {
    pub name: String,
    pub descriptor: String,
    pub access: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestedInfo {
    pub access: u16,
    /// Anonymous or local class (no enclosing member declaration).
    pub local: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassModel {
    pub name: String,
    pub super_name: Option<String>,
    pub interfaces: Vec<String>,
    pub access: u16,
    pub major_version: u16,
    pub nested: Option<NestedInfo>,
    pub fields: Vec<FieldModel>,
    pub methods: Vec<MethodModel>,
}

impl ClassModel {
    pub fn parse(bytes: &[u8]) -> Result<ClassModel, ClassFileError> {
        ClassModel::from_class_file(&ClassFile::parse(bytes)?)
    }

    pub fn from_class_file(cf: &ClassFile) -> Result<ClassModel, ClassFileError> {
        let cp = &cf.constant_pool;
        let name = cf.name()?.to_string();
        let super_name = cf.super_name()?.map(str::to_string);
        let interfaces = cf
            .interfaces
            .iter()
            .map(|i| cp.class_name(*i).map(str::to_string))
            .collect::<Result<_, _>>()?;
        let mut nested = None;
        for e in cf.inner_classes()? {
            if e.inner_class != 0 && cp.class_name(e.inner_class)? == name {
                nested = Some(NestedInfo {
                    access: e.access_flags,
                    local: e.outer_class == 0 || e.inner_name == 0,
                });
            }
        }
        let fields = cf
            .fields
            .iter()
            .map(|f| {
                Ok(FieldModel {
                    name: cp.utf8(f.name_index)?.to_string(),
                    descriptor: cp.utf8(f.descriptor_index)?.to_string(),
                    access: f.access_flags,
                })
            })
            .collect::<Result<_, ClassFileError>>()?;
        let methods = cf
            .methods
            .iter()
            .map(|m| method_model(cf, m))
            .collect::<Result<_, _>>()?;
        Ok(ClassModel {
            name,
            super_name,
            interfaces,
            access: cf.access_flags,
            major_version: cf.major_version,
            nested,
            fields,
            methods,
        })
    }

    pub fn is_interface(&self) -> bool {
        self.access & ACC_INTERFACE != 0
    }

    /// Public, non-synthetic, and not an anonymous, local or non-public
    /// nested class.
    pub fn is_exported(&self) -> bool {
        if self.access & ACC_PUBLIC == 0 || self.access & ACC_SYNTHETIC != 0 {
            return false;
        }
        match self.nested {
            Some(n) => !n.local && n.access & ACC_PUBLIC != 0 && n.access & ACC_SYNTHETIC == 0,
            None => true,
        }
    }

    pub fn method(&self, name: &str, descriptor: &str) -> Option<&MethodModel> {
        self.methods
            .iter()
            .find(|m| m.name == name && m.descriptor == descriptor)
    }

    pub fn field(&self, name: &str, descriptor: &str) -> Option<&FieldModel> {
        self.fields
            .iter()
            .find(|f| f.name == name && f.descriptor == descriptor)
    }
}

fn method_model(cf: &ClassFile, m: &Member) -> Result<MethodModel, ClassFileError> {
    let cp = &cf.constant_pool;
    let code = cf.code(m)?;
    let mut refs = Vec::new();
    let mut invokedynamic_sites = 0;
    let mut unresolved = Vec::new();
    let fingerprint = match &code {
        None => Digest::empty(),
        Some(code) => {
            let insns = insn::decode(&code.code)?;
            for i in &insns {
                if i.opcode == op::INVOKEDYNAMIC {
                    invokedynamic_sites += 1;
                } else if i.is_invoke() || i.is_field_access() {
                    let index = i.cp_index().expect("invoke and field instructions carry an index");
                    match cp.member_ref(index) {
                        Ok((owner, name, descriptor)) => refs.push(CodeRef {
                            opcode: i.opcode,
                            target: MemberRef {
                                owner: owner.to_string(),
                                name: name.to_string(),
                                descriptor: descriptor.to_string(),
                            },
                        }),
                        Err(e) => unresolved.push(format!("offset {}: {e}", i.offset)),
                    }
                }
            }
            fingerprint_insns(&insns, code, cp)?
        }
    };
    Ok(MethodModel {
        name: cp.utf8(m.name_index)?.to_string(),
        descriptor: cp.utf8(m.descriptor_index)?.to_string(),
        access: m.access_flags,
        fingerprint,
        refs,
        invokedynamic_sites,
        unresolved,
    })
}
