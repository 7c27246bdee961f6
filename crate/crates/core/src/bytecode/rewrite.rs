//! Class-file transformations that leave behaviour unchanged: stripping
//! debug attributes and renumbering the constant pool.

use std::collections::HashMap;

use super::classfile::*;
use super::insn;

const DEBUG_CODE_ATTRIBUTES: &[&str] = &["LineNumberTable", "LocalVariableTable", "LocalVariableTypeTable"];
const DEBUG_CLASS_ATTRIBUTES: &[&str] = &["SourceFile", "SourceDebugExtension"];

/// Removes line-number and local-variable tables and source-file attributes.
pub fn strip_debug(cf: &ClassFile) -> Result<ClassFile, ClassFileError> {
    let mut out = cf.clone();
    let named = |a: &Attribute, list: &[&str]| {
        cf.constant_pool
            .utf8(a.name_index)
            .map(|n| list.contains(&n))
            .unwrap_or(false)
    };
    out.attributes.retain(|a| !named(a, DEBUG_CLASS_ATTRIBUTES));
    for m in &mut out.methods {
        for a in &mut m.attributes {
            if cf.constant_pool.utf8(a.name_index)? == "Code" {
                let mut code = CodeAttribute::parse(&a.info)?;
                code.attributes.retain(|x| !named(x, DEBUG_CODE_ATTRIBUTES));
                a.info = code.to_bytes();
            }
        }
    }
    Ok(out)
}

/// Rebuilds the constant pool with its live entries in `order` (a permutation
/// of the current live indices) and rewrites every reference, re-laying out
/// method bodies where `ldc` operands no longer fit in one byte. Attributes
/// whose layout is not understood here (stack maps, annotations) are dropped.
pub fn remap_constant_pool(cf: &ClassFile, order: &[u16]) -> Result<ClassFile, ClassFileError> {
    let old = &cf.constant_pool;
    let live: Vec<u16> = live_indices(old);
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != live {
        return Err(ClassFileError::BadCode(
            "order is not a permutation of the live constant indices".into(),
        ));
    }
    let mut pool = ConstantPool::new();
    let mut map: HashMap<u16, u16> = HashMap::with_capacity(live.len());
    for &i in order {
        map.insert(i, pool.push(Constant::Unusable));
        if old.entries[i as usize].is_wide() {
            pool.entries.push(Constant::Unusable);
        }
    }
    let m = |i: u16| -> u16 {
        if i == 0 {
            0
        } else {
            map.get(&i).copied().unwrap_or(i)
        }
    };
    for &i in order {
        pool.entries[m(i) as usize] = old.entries[i as usize].map_references(&m);
    }
    let rm = |i: u16| -> Result<u16, ClassFileError> {
        if i == 0 {
            Ok(0)
        } else {
            map.get(&i).copied().ok_or(ClassFileError::BadIndex(i))
        }
    };

    let mut out = ClassFile {
        minor_version: cf.minor_version,
        major_version: cf.major_version,
        constant_pool: pool,
        access_flags: cf.access_flags,
        this_class: rm(cf.this_class)?,
        super_class: rm(cf.super_class)?,
        interfaces: cf.interfaces.iter().map(|&i| rm(i)).collect::<Result<_, _>>()?,
        fields: Vec::new(),
        methods: Vec::new(),
        attributes: Vec::new(),
    };
    for (src, dst) in [(&cf.fields, &mut out.fields), (&cf.methods, &mut out.methods)] {
        for member in src {
            let mut attributes = Vec::new();
            for a in &member.attributes {
                if let Some(a) = remap_attribute(cf, a, &rm)? {
                    attributes.push(a);
                }
            }
            dst.push(Member {
                access_flags: member.access_flags,
                name_index: rm(member.name_index)?,
                descriptor_index: rm(member.descriptor_index)?,
                attributes,
            });
        }
    }
    for a in &cf.attributes {
        if let Some(a) = remap_attribute(cf, a, &rm)? {
            out.attributes.push(a);
        }
    }
    Ok(out)
}

pub fn live_indices(cp: &ConstantPool) -> Vec<u16> {
    (1..cp.entries.len() as u16)
        .filter(|&i| !matches!(cp.entries[i as usize], Constant::Unusable))
        .collect()
}

fn u2s(info: &[u8]) -> Result<Vec<u16>, ClassFileError> {
    if info.len() % 2 != 0 {
        return Err(ClassFileError::Truncated(info.len()));
    }
    Ok(info.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect())
}

fn from_u2s(v: &[u16]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_be_bytes()).collect()
}

type Remap<'a> = dyn Fn(u16) -> Result<u16, ClassFileError> + 'a;

fn remap_attribute(cf: &ClassFile, a: &Attribute, rm: &Remap) -> Result<Option<Attribute>, ClassFileError> {
    let name = cf.constant_pool.utf8(a.name_index)?;
    let info = match name {
        "Code" => remap_code(cf, &CodeAttribute::parse(&a.info)?, rm)?.to_bytes(),
        // Every u2 in these layouts is a pool index (or a count / flags
        // word, handled below).
        "ConstantValue" | "Signature" | "SourceFile" | "NestHost" | "EnclosingMethod" => {
            from_u2s(&u2s(&a.info)?.into_iter().map(rm).collect::<Result<Vec<_>, _>>()?)
        }
        "Exceptions" | "NestMembers" | "PermittedSubclasses" => {
            let v = u2s(&a.info)?;
            let mut out = vec![v[0]];
            for &x in &v[1..] {
                out.push(rm(x)?);
            }
            from_u2s(&out)
        }
        "InnerClasses" => {
            let v = u2s(&a.info)?;
            let mut out = vec![v[0]];
            for e in v[1..].chunks(4) {
                out.extend_from_slice(&[rm(e[0])?, rm(e[1])?, rm(e[2])?, e[3]]);
            }
            from_u2s(&out)
        }
        "BootstrapMethods" => {
            let v = u2s(&a.info)?;
            let mut out = vec![v[0]];
            let mut i = 1;
            while i < v.len() {
                let n = v[i + 1] as usize;
                out.push(rm(v[i])?);
                out.push(v[i + 1]);
                for &x in &v[i + 2..i + 2 + n] {
                    out.push(rm(x)?);
                }
                i += 2 + n;
            }
            from_u2s(&out)
        }
        "Deprecated" | "Synthetic" => a.info.clone(),
        _ => return Ok(None),
    };
    Ok(Some(Attribute {
        name_index: rm(a.name_index)?,
        info,
    }))
}

fn remap_code(cf: &ClassFile, code: &CodeAttribute, rm: &Remap) -> Result<CodeAttribute, ClassFileError> {
    let mut insns = insn::decode(&code.code)?;
    for i in &mut insns {
        match &mut i.operand {
            insn::Operand::Cp(x)
            | insn::Operand::InvokeDynamic(x)
            | insn::Operand::InvokeInterface { index: x, .. }
            | insn::Operand::MultiANewArray { index: x, .. } => *x = rm(*x)?,
            _ => {}
        }
    }
    let (bytes, offsets) = insn::encode(&insns, code.code.len() as u32)?;
    let pc = |old: u16| -> Result<u16, ClassFileError> {
        offsets
            .get(&(old as u32))
            .map(|&n| n as u16)
            .ok_or_else(|| ClassFileError::BadCode(format!("offset {old} is not an instruction boundary")))
    };
    let exception_table = code
        .exception_table
        .iter()
        .map(|e| {
            Ok(ExceptionHandler {
                start_pc: pc(e.start_pc)?,
                end_pc: pc(e.end_pc)?,
                handler_pc: pc(e.handler_pc)?,
                catch_type: rm(e.catch_type)?,
            })
        })
        .collect::<Result<_, ClassFileError>>()?;
    let mut attributes = Vec::new();
    for a in &code.attributes {
        let name = cf.constant_pool.utf8(a.name_index)?;
        let info = match name {
            "LineNumberTable" => {
                let v = u2s(&a.info)?;
                let mut out = vec![v[0]];
                for e in v[1..].chunks(2) {
                    out.extend_from_slice(&[pc(e[0])?, e[1]]);
                }
                from_u2s(&out)
            }
            "LocalVariableTable" | "LocalVariableTypeTable" => {
                let v = u2s(&a.info)?;
                let mut out = vec![v[0]];
                for e in v[1..].chunks(5) {
                    let start = pc(e[0])?;
                    let end = pc(e[0] + e[1])?;
                    out.extend_from_slice(&[start, end - start, rm(e[2])?, rm(e[3])?, e[4]]);
                }
                from_u2s(&out)
            }
            _ => continue,
        };
        attributes.push(Attribute {
            name_index: rm(a.name_index)?,
            info,
        });
    }
    Ok(CodeAttribute {
        max_stack: code.max_stack,
        max_locals: code.max_locals,
        code: bytes,
        exception_table,
        attributes,
    })
}
