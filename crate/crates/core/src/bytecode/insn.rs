//! JVM instruction decoding and re-encoding.

use std::collections::HashMap;

use super::classfile::{ClassFileError, Reader};

pub mod op {
    pub const ACONST_NULL: u8 = 0x01;
    pub const ICONST_0: u8 = 0x03;
    pub const BIPUSH: u8 = 0x10;
    pub const SIPUSH: u8 = 0x11;
    pub const LDC: u8 = 0x12;
    pub const LDC_W: u8 = 0x13;
    pub const LDC2_W: u8 = 0x14;
    pub const ILOAD: u8 = 0x15;
    pub const ALOAD: u8 = 0x19;
    pub const ALOAD_0: u8 = 0x2a;
    pub const ISTORE: u8 = 0x36;
    pub const ASTORE: u8 = 0x3a;
    pub const POP: u8 = 0x57;
    pub const DUP: u8 = 0x59;
    pub const IADD: u8 = 0x60;
    pub const IINC: u8 = 0x84;
    pub const IFEQ: u8 = 0x99;
    pub const IFNE: u8 = 0x9a;
    pub const GOTO: u8 = 0xa7;
    pub const JSR: u8 = 0xa8;
    pub const RET: u8 = 0xa9;
    pub const TABLESWITCH: u8 = 0xaa;
    pub const LOOKUPSWITCH: u8 = 0xab;
    pub const IRETURN: u8 = 0xac;
    pub const ARETURN: u8 = 0xb0;
    pub const RETURN: u8 = 0xb1;
    pub const GETSTATIC: u8 = 0xb2;
    pub const PUTSTATIC: u8 = 0xb3;
    pub const GETFIELD: u8 = 0xb4;
    pub const PUTFIELD: u8 = 0xb5;
    pub const INVOKEVIRTUAL: u8 = 0xb6;
    pub const INVOKESPECIAL: u8 = 0xb7;
    pub const INVOKESTATIC: u8 = 0xb8;
    pub const INVOKEINTERFACE: u8 = 0xb9;
    pub const INVOKEDYNAMIC: u8 = 0xba;
    pub const NEW: u8 = 0xbb;
    pub const NEWARRAY: u8 = 0xbc;
    pub const ANEWARRAY: u8 = 0xbd;
    pub const ATHROW: u8 = 0xbf;
    pub const CHECKCAST: u8 = 0xc0;
    pub const INSTANCEOF: u8 = 0xc1;
    pub const WIDE: u8 = 0xc4;
    pub const MULTIANEWARRAY: u8 = 0xc5;
    pub const IFNULL: u8 = 0xc6;
    pub const IFNONNULL: u8 = 0xc7;
    pub const GOTO_W: u8 = 0xc8;
    pub const JSR_W: u8 = 0xc9;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    None,
    Byte(i8),
    Short(i16),
    Local(u16),
    Iinc {
        index: u16,
        delta: i16,
    },
    /// Constant-pool index (`ldc` included, despite its one-byte encoding).
    Cp(u16),
    InvokeInterface {
        index: u16,
        count: u8,
    },
    InvokeDynamic(u16),
    MultiANewArray {
        index: u16,
        dims: u8,
    },
    NewArray(u8),
    /// Absolute target offset.
    Branch(u32),
    TableSwitch {
        default: u32,
        low: i32,
        targets: Vec<u32>,
    },
    LookupSwitch {
        default: u32,
        pairs: Vec<(i32, u32)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Insn {
    pub offset: u32,
    pub opcode: u8,
    pub operand: Operand,
}

impl Insn {
    pub fn new(opcode: u8, operand: Operand) -> Self {
        Insn {
            offset: 0,
            opcode,
            operand,
        }
    }

    pub fn cp_index(&self) -> Option<u16> {
        match self.operand {
            Operand::Cp(i)
            | Operand::InvokeInterface { index: i, .. }
            | Operand::InvokeDynamic(i)
            | Operand::MultiANewArray { index: i, .. } => Some(i),
            _ => None,
        }
    }

    pub fn is_invoke(&self) -> bool {
        (op::INVOKEVIRTUAL..=op::INVOKEINTERFACE).contains(&self.opcode)
    }

    pub fn is_field_access(&self) -> bool {
        (op::GETSTATIC..=op::PUTFIELD).contains(&self.opcode)
    }
}

fn bad(msg: impl Into<String>) -> ClassFileError {
    ClassFileError::BadCode(msg.into())
}

fn target(base: u32, delta: i32, len: usize) -> Result<u32, ClassFileError> {
    let t = base as i64 + delta as i64;
    if t < 0 || t >= len as i64 {
        return Err(bad(format!("branch at {base} leaves the method")));
    }
    Ok(t as u32)
}

/// Decodes a method body. Branch operands become absolute offsets and are
/// checked to land on instruction boundaries.
pub fn decode(code: &[u8]) -> Result<Vec<Insn>, ClassFileError> {
    let mut r = Reader::new(code);
    let mut out = Vec::new();
    while r.pos() < code.len() {
        let offset = r.pos() as u32;
        let mut opcode = r.u1()?;
        let operand = match opcode {
            0x00..=0x0f | 0x1a..=0x35 | 0x3b..=0x83 | 0x85..=0x98 | 0xac..=0xb1 | 0xbe | 0xbf | 0xc2 | 0xc3 => {
                Operand::None
            }
            op::BIPUSH => Operand::Byte(r.u1()? as i8),
            op::SIPUSH => Operand::Short(r.u2()? as i16),
            op::LDC => Operand::Cp(r.u1()? as u16),
            op::LDC_W | op::LDC2_W => Operand::Cp(r.u2()?),
            0x15..=0x19 | 0x36..=0x3a | op::RET => Operand::Local(r.u1()? as u16),
            op::IINC => Operand::Iinc {
                index: r.u1()? as u16,
                delta: r.u1()? as i8 as i16,
            },
            0x99..=0xa8 | op::IFNULL | op::IFNONNULL => {
                Operand::Branch(target(offset, r.u2()? as i16 as i32, code.len())?)
            }
            op::GOTO_W | op::JSR_W => Operand::Branch(target(offset, r.u4()? as i32, code.len())?),
            op::TABLESWITCH | op::LOOKUPSWITCH => {
                let pad = (4 - (offset as usize + 1) % 4) % 4;
                r.take(pad)?;
                let default = target(offset, r.u4()? as i32, code.len())?;
                if opcode == op::TABLESWITCH {
                    let low = r.u4()? as i32;
                    let high = r.u4()? as i32;
                    if high < low || (high as i64 - low as i64) > code.len() as i64 {
                        return Err(bad(format!("tableswitch at {offset} has bad bounds")));
                    }
                    let targets = (low..=high)
                        .map(|_| target(offset, r.u4()? as i32, code.len()))
                        .collect::<Result<_, _>>()?;
                    Operand::TableSwitch { default, low, targets }
                } else {
                    let n = r.u4()? as i32;
                    if n < 0 || n as usize > code.len() {
                        return Err(bad(format!("lookupswitch at {offset} has bad count")));
                    }
                    let pairs = (0..n)
                        .map(|_| Ok((r.u4()? as i32, target(offset, r.u4()? as i32, code.len())?)))
                        .collect::<Result<_, ClassFileError>>()?;
                    Operand::LookupSwitch { default, pairs }
                }
            }
            op::GETSTATIC..=op::INVOKESTATIC | op::NEW | op::ANEWARRAY | op::CHECKCAST | op::INSTANCEOF => {
                Operand::Cp(r.u2()?)
            }
            op::INVOKEINTERFACE => {
                let index = r.u2()?;
                let count = r.u1()?;
                r.u1()?;
                Operand::InvokeInterface { index, count }
            }
            op::INVOKEDYNAMIC => {
                let index = r.u2()?;
                r.u2()?;
                Operand::InvokeDynamic(index)
            }
            op::NEWARRAY => Operand::NewArray(r.u1()?),
            op::MULTIANEWARRAY => Operand::MultiANewArray {
                index: r.u2()?,
                dims: r.u1()?,
            },
            op::WIDE => {
                opcode = r.u1()?;
                match opcode {
                    0x15..=0x19 | 0x36..=0x3a | op::RET => Operand::Local(r.u2()?),
                    op::IINC => Operand::Iinc {
                        index: r.u2()?,
                        delta: r.u2()? as i16,
                    },
                    _ => return Err(bad(format!("wide applied to opcode {opcode:#04x} at {offset}"))),
                }
            }
            _ => return Err(bad(format!("invalid opcode {opcode:#04x} at {offset}"))),
        };
        out.push(Insn {
            offset,
            opcode,
            operand,
        });
    }
    let starts: std::collections::HashSet<u32> = out.iter().map(|i| i.offset).collect();
    for insn in &out {
        for t in branch_targets(insn) {
            if !starts.contains(&t) {
                return Err(bad(format!(
                    "branch at {} into the middle of an instruction",
                    insn.offset
                )));
            }
        }
    }
    Ok(out)
}

pub fn branch_targets(insn: &Insn) -> Vec<u32> {
    match &insn.operand {
        Operand::Branch(t) => vec![*t],
        Operand::TableSwitch { default, targets, .. } => {
            std::iter::once(*default).chain(targets.iter().copied()).collect()
        }
        Operand::LookupSwitch { default, pairs } => {
            std::iter::once(*default).chain(pairs.iter().map(|p| p.1)).collect()
        }
        _ => vec![],
    }
}

fn size_at(insn: &Insn, offset: u32) -> usize {
    match &insn.operand {
        Operand::None => 1,
        Operand::Byte(_) | Operand::NewArray(_) => 2,
        Operand::Short(_) => 3,
        Operand::Local(i) => {
            if *i > 255 {
                4
            } else {
                2
            }
        }
        Operand::Iinc { index, delta } => {
            if *index > 255 || *delta < -128 || *delta > 127 {
                6
            } else {
                3
            }
        }
        Operand::Cp(i) => {
            if insn.opcode == op::LDC && *i <= 255 {
                2
            } else {
                3
            }
        }
        Operand::InvokeInterface { .. } | Operand::InvokeDynamic(_) => 5,
        Operand::MultiANewArray { .. } => 4,
        Operand::Branch(_) => {
            if matches!(insn.opcode, op::GOTO_W | op::JSR_W) {
                5
            } else {
                3
            }
        }
        Operand::TableSwitch { targets, .. } => 1 + pad(offset) + 12 + 4 * targets.len(),
        Operand::LookupSwitch { pairs, .. } => 1 + pad(offset) + 8 + 8 * pairs.len(),
    }
}

fn pad(offset: u32) -> usize {
    (4 - (offset as usize + 1) % 4) % 4
}

/// Lays instructions out afresh. Branch operands are interpreted as the
/// `offset` of their target instruction in `insns` (or the end of the old
/// body); `ldc` and local-variable forms are widened when their operand no
/// longer fits. Returns the bytes and a map from old to new offsets.
pub fn encode(insns: &[Insn], old_len: u32) -> Result<(Vec<u8>, HashMap<u32, u32>), ClassFileError> {
    let mut map = HashMap::with_capacity(insns.len() + 1);
    let mut pos = 0u32;
    for insn in insns {
        map.insert(insn.offset, pos);
        pos += size_at(insn, pos) as u32;
    }
    map.insert(old_len, pos);
    let resolve = |old: u32| {
        map.get(&old)
            .copied()
            .ok_or_else(|| bad(format!("branch to unknown offset {old}")))
    };

    let mut w: Vec<u8> = Vec::with_capacity(pos as usize);
    for insn in insns {
        let here = w.len() as u32;
        let rel = |t: u32| -> Result<i32, ClassFileError> { Ok(resolve(t)? as i32 - here as i32) };
        match &insn.operand {
            Operand::None => w.push(insn.opcode),
            Operand::Byte(v) => w.extend_from_slice(&[insn.opcode, *v as u8]),
            Operand::NewArray(t) => w.extend_from_slice(&[insn.opcode, *t]),
            Operand::Short(v) => {
                w.push(insn.opcode);
                w.extend_from_slice(&v.to_be_bytes());
            }
            Operand::Local(i) => {
                if *i > 255 {
                    w.extend_from_slice(&[op::WIDE, insn.opcode]);
                    w.extend_from_slice(&i.to_be_bytes());
                } else {
                    w.extend_from_slice(&[insn.opcode, *i as u8]);
                }
            }
            Operand::Iinc { index, delta } => {
                if *index > 255 || *delta < -128 || *delta > 127 {
                    w.extend_from_slice(&[op::WIDE, op::IINC]);
                    w.extend_from_slice(&index.to_be_bytes());
                    w.extend_from_slice(&delta.to_be_bytes());
                } else {
                    w.extend_from_slice(&[op::IINC, *index as u8, *delta as i8 as u8]);
                }
            }
            Operand::Cp(i) => {
                if insn.opcode == op::LDC && *i <= 255 {
                    w.extend_from_slice(&[op::LDC, *i as u8]);
                } else {
                    w.push(if insn.opcode == op::LDC { op::LDC_W } else { insn.opcode });
                    w.extend_from_slice(&i.to_be_bytes());
                }
            }
            Operand::InvokeInterface { index, count } => {
                w.push(insn.opcode);
                w.extend_from_slice(&index.to_be_bytes());
                w.extend_from_slice(&[*count, 0]);
            }
            Operand::InvokeDynamic(index) => {
                w.push(insn.opcode);
                w.extend_from_slice(&index.to_be_bytes());
                w.extend_from_slice(&[0, 0]);
            }
            Operand::MultiANewArray { index, dims } => {
                w.push(insn.opcode);
                w.extend_from_slice(&index.to_be_bytes());
                w.push(*dims);
            }
            Operand::Branch(t) => {
                let d = rel(*t)?;
                w.push(insn.opcode);
                if matches!(insn.opcode, op::GOTO_W | op::JSR_W) {
                    w.extend_from_slice(&d.to_be_bytes());
                } else {
                    let d: i16 = d
                        .try_into()
                        .map_err(|_| bad(format!("branch offset {d} out of range")))?;
                    w.extend_from_slice(&d.to_be_bytes());
                }
            }
            Operand::TableSwitch { default, low, targets } => {
                w.push(insn.opcode);
                w.resize(w.len() + pad(here), 0);
                w.extend_from_slice(&rel(*default)?.to_be_bytes());
                w.extend_from_slice(&low.to_be_bytes());
                w.extend_from_slice(&(low + targets.len() as i32 - 1).to_be_bytes());
                for t in targets {
                    w.extend_from_slice(&rel(*t)?.to_be_bytes());
                }
            }
            Operand::LookupSwitch { default, pairs } => {
                w.push(insn.opcode);
                w.resize(w.len() + pad(here), 0);
                w.extend_from_slice(&rel(*default)?.to_be_bytes());
                w.extend_from_slice(&(pairs.len() as i32).to_be_bytes());
                for (k, t) in pairs {
                    w.extend_from_slice(&k.to_be_bytes());
                    w.extend_from_slice(&rel(*t)?.to_be_bytes());
                }
            }
        }
    }
    Ok((w, map))
}
