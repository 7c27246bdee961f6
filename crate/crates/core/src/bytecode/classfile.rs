//! Raw class-file model: parse and serialize without interpretation.

pub const MAGIC: u32 = 0xCAFE_BABE;
pub const MIN_MAJOR: u16 = 45;
pub const MAX_MAJOR: u16 = 61;

pub const ACC_PUBLIC: u16 = 0x0001;
pub const ACC_PRIVATE: u16 = 0x0002;
pub const ACC_PROTECTED: u16 = 0x0004;
pub const ACC_STATIC: u16 = 0x0008;
pub const ACC_FINAL: u16 = 0x0010;
pub const ACC_SUPER: u16 = 0x0020;
pub const ACC_BRIDGE: u16 = 0x0040;
pub const ACC_VARARGS: u16 = 0x0080;
pub const ACC_NATIVE: u16 = 0x0100;
pub const ACC_INTERFACE: u16 = 0x0200;
pub const ACC_ABSTRACT: u16 = 0x0400;
pub const ACC_SYNTHETIC: u16 = 0x1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassFileError {
    #[error("not a class file (bad magic)")]
    BadMagic,
    #[error("truncated at byte {0}")]
    Truncated(usize),
    #[error("trailing bytes after class file")]
    Trailing,
    #[error("unsupported class file version {0}")]
    UnsupportedVersion(u16),
    #[error("bad constant pool tag {tag} at index {index}")]
    BadTag { tag: u8, index: u16 },
    #[error("bad constant pool reference #{0}")]
    BadIndex(u16),
    #[error("invalid modified UTF-8 in constant #{0}")]
    BadUtf8(u16),
    #[error("malformed code: {0}")]
    BadCode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constant {
    /// Slot 0 and the slot after a long or double.
    Unusable,
    Utf8(String),
    Integer(i32),
    /// Raw IEEE bits, so NaN payloads survive a round trip.
    Float(u32),
    Long(i64),
    Double(u64),
    Class(u16),
    String(u16),
    Fieldref(u16, u16),
    Methodref(u16, u16),
    InterfaceMethodref(u16, u16),
    NameAndType(u16, u16),
    MethodHandle(u8, u16),
    MethodType(u16),
    Dynamic(u16, u16),
    InvokeDynamic(u16, u16),
    Module(u16),
    Package(u16),
}

impl Constant {
    fn tag(&self) -> u8 {
        match self {
            Constant::Unusable => 0,
            Constant::Utf8(_) => 1,
            Constant::Integer(_) => 3,
            Constant::Float(_) => 4,
            Constant::Long(_) => 5,
            Constant::Double(_) => 6,
            Constant::Class(_) => 7,
            Constant::String(_) => 8,
            Constant::Fieldref(..) => 9,
            Constant::Methodref(..) => 10,
            Constant::InterfaceMethodref(..) => 11,
            Constant::NameAndType(..) => 12,
            Constant::MethodHandle(..) => 15,
            Constant::MethodType(_) => 16,
            Constant::Dynamic(..) => 17,
            Constant::InvokeDynamic(..) => 18,
            Constant::Module(_) => 19,
            Constant::Package(_) => 20,
        }
    }

    pub fn is_wide(&self) -> bool {
        matches!(self, Constant::Long(_) | Constant::Double(_))
    }

    /// Constant-pool indices this entry refers to.
    pub fn references(&self) -> Vec<u16> {
        match *self {
            Constant::Class(a)
            | Constant::String(a)
            | Constant::MethodType(a)
            | Constant::Module(a)
            | Constant::Package(a)
            | Constant::MethodHandle(_, a) => vec![a],
            Constant::Fieldref(a, b)
            | Constant::Methodref(a, b)
            | Constant::InterfaceMethodref(a, b)
            | Constant::NameAndType(a, b) => vec![a, b],
            // The first operand is a bootstrap method index, not a pool index.
            Constant::Dynamic(_, b) | Constant::InvokeDynamic(_, b) => vec![b],
            _ => vec![],
        }
    }

    pub(crate) fn map_references(&self, f: &impl Fn(u16) -> u16) -> Constant {
        match *self {
            Constant::Class(a) => Constant::Class(f(a)),
            Constant::String(a) => Constant::String(f(a)),
            Constant::MethodType(a) => Constant::MethodType(f(a)),
            Constant::Module(a) => Constant::Module(f(a)),
            Constant::Package(a) => Constant::Package(f(a)),
            Constant::MethodHandle(k, a) => Constant::MethodHandle(k, f(a)),
            Constant::Fieldref(a, b) => Constant::Fieldref(f(a), f(b)),
            Constant::Methodref(a, b) => Constant::Methodref(f(a), f(b)),
            Constant::InterfaceMethodref(a, b) => Constant::InterfaceMethodref(f(a), f(b)),
            Constant::NameAndType(a, b) => Constant::NameAndType(f(a), f(b)),
            Constant::Dynamic(a, b) => Constant::Dynamic(a, f(b)),
            Constant::InvokeDynamic(a, b) => Constant::InvokeDynamic(a, f(b)),
            ref other => other.clone(),
        }
    }
}

/// Constant pool with 1-based indexing; slot 0 is [`Constant::Unusable`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstantPool {
    pub entries: Vec<Constant>,
}

impl ConstantPool {
    pub fn new() -> Self {
        ConstantPool {
            entries: vec![Constant::Unusable],
        }
    }

    /// Number of slots including slot 0, as written in the class file.
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: u16) -> Result<&Constant, ClassFileError> {
        match self.entries.get(index as usize) {
            Some(Constant::Unusable) | None => Err(ClassFileError::BadIndex(index)),
            Some(c) => Ok(c),
        }
    }

    pub fn push(&mut self, c: Constant) -> u16 {
        if self.entries.is_empty() {
            self.entries.push(Constant::Unusable);
        }
        let index = self.entries.len() as u16;
        let wide = c.is_wide();
        self.entries.push(c);
        if wide {
            self.entries.push(Constant::Unusable);
        }
        index
    }

    pub fn utf8(&self, index: u16) -> Result<&str, ClassFileError> {
        match self.get(index)? {
            Constant::Utf8(s) => Ok(s),
            _ => Err(ClassFileError::BadIndex(index)),
        }
    }

    pub fn class_name(&self, index: u16) -> Result<&str, ClassFileError> {
        match self.get(index)? {
            Constant::Class(n) => self.utf8(*n),
            _ => Err(ClassFileError::BadIndex(index)),
        }
    }

    pub fn name_and_type(&self, index: u16) -> Result<(&str, &str), ClassFileError> {
        match self.get(index)? {
            Constant::NameAndType(n, d) => Ok((self.utf8(*n)?, self.utf8(*d)?)),
            _ => Err(ClassFileError::BadIndex(index)),
        }
    }

    /// Owner, name and descriptor of a field, method or interface-method ref.
    pub fn member_ref(&self, index: u16) -> Result<(&str, &str, &str), ClassFileError> {
        match self.get(index)? {
            Constant::Fieldref(c, nt) | Constant::Methodref(c, nt) | Constant::InterfaceMethodref(c, nt) => {
                let (name, desc) = self.name_and_type(*nt)?;
                Ok((self.class_name(*c)?, name, desc))
            }
            _ => Err(ClassFileError::BadIndex(index)),
        }
    }

    /// Position-independent textual form of an entry.
    pub fn symbolic(&self, index: u16) -> Result<String, ClassFileError> {
        Ok(match self.get(index)? {
            Constant::Unusable => unreachable!("rejected by get"),
            Constant::Utf8(s) => format!("utf8:{s}"),
            Constant::Integer(v) => format!("int:{v}"),
            Constant::Float(v) => format!("float:{v:08x}"),
            Constant::Long(v) => format!("long:{v}"),
            Constant::Double(v) => format!("double:{v:016x}"),
            Constant::Class(n) => format!("class:{}", self.utf8(*n)?),
            Constant::String(n) => format!("string:{}", self.utf8(*n)?),
            Constant::Fieldref(..) => {
                let (o, n, d) = self.member_ref(index)?;
                format!("field:{o}.{n}:{d}")
            }
            Constant::Methodref(..) => {
                let (o, n, d) = self.member_ref(index)?;
                format!("method:{o}.{n}:{d}")
            }
            Constant::InterfaceMethodref(..) => {
                let (o, n, d) = self.member_ref(index)?;
                format!("imethod:{o}.{n}:{d}")
            }
            Constant::NameAndType(..) => {
                let (n, d) = self.name_and_type(index)?;
                format!("nat:{n}:{d}")
            }
            Constant::MethodHandle(k, r) => format!("handle:{k}:{}", self.symbolic(*r)?),
            Constant::MethodType(d) => format!("mtype:{}", self.utf8(*d)?),
            Constant::Dynamic(b, nt) => {
                let (n, d) = self.name_and_type(*nt)?;
                format!("dynamic:{b}:{n}:{d}")
            }
            Constant::InvokeDynamic(b, nt) => {
                let (n, d) = self.name_and_type(*nt)?;
                format!("indy:{b}:{n}:{d}")
            }
            Constant::Module(n) => format!("module:{}", self.utf8(*n)?),
            Constant::Package(n) => format!("package:{}", self.utf8(*n)?),
        })
    }

    /// Index of an existing equal entry, if any.
    pub fn find(&self, c: &Constant) -> Option<u16> {
        self.entries
            .iter()
            .position(|e| e == c)
            .filter(|&i| i > 0)
            .map(|i| i as u16)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name_index: u16,
    pub info: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub access_flags: u16,
    pub name_index: u16,
    pub descriptor_index: u16,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassFile {
    pub minor_version: u16,
    pub major_version: u16,
    pub constant_pool: ConstantPool,
    pub access_flags: u16,
    pub this_class: u16,
    pub super_class: u16,
    pub interfaces: Vec<u16>,
    pub fields: Vec<Member>,
    pub methods: Vec<Member>,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExceptionHandler {
    pub start_pc: u16,
    pub end_pc: u16,
    pub handler_pc: u16,
    pub catch_type: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeAttribute {
    pub max_stack: u16,
    pub max_locals: u16,
    pub code: Vec<u8>,
    pub exception_table: Vec<ExceptionHandler>,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerClassEntry {
    pub inner_class: u16,
    pub outer_class: u16,
    pub inner_name: u16,
    pub access_flags: u16,
}

// --- reading ---------------------------------------------------------------

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], ClassFileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(ClassFileError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u1(&mut self) -> Result<u8, ClassFileError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u2(&mut self) -> Result<u16, ClassFileError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub(crate) fn u4(&mut self) -> Result<u32, ClassFileError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self) -> Result<u64, ClassFileError> {
        Ok(((self.u4()? as u64) << 32) | self.u4()? as u64)
    }

    fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn read_attributes(r: &mut Reader) -> Result<Vec<Attribute>, ClassFileError> {
    let n = r.u2()?;
    (0..n)
        .map(|_| {
            let name_index = r.u2()?;
            let len = r.u4()? as usize;
            Ok(Attribute {
                name_index,
                info: r.take(len)?.to_vec(),
            })
        })
        .collect()
}

fn read_members(r: &mut Reader) -> Result<Vec<Member>, ClassFileError> {
    let n = r.u2()?;
    (0..n)
        .map(|_| {
            Ok(Member {
                access_flags: r.u2()?,
                name_index: r.u2()?,
                descriptor_index: r.u2()?,
                attributes: read_attributes(r)?,
            })
        })
        .collect()
}

/// Decodes the JVM's modified UTF-8.
pub fn decode_mutf8(bytes: &[u8]) -> Option<String> {
    let mut units: Vec<u16> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b & 0x80 == 0 && b != 0 {
            units.push(b as u16);
            i += 1;
        } else if b & 0xE0 == 0xC0 {
            let c = *bytes.get(i + 1)?;
            if c & 0xC0 != 0x80 {
                return None;
            }
            units.push(((b as u16 & 0x1F) << 6) | (c as u16 & 0x3F));
            i += 2;
        } else if b & 0xF0 == 0xE0 {
            let (c, d) = (*bytes.get(i + 1)?, *bytes.get(i + 2)?);
            if c & 0xC0 != 0x80 || d & 0xC0 != 0x80 {
                return None;
            }
            units.push(((b as u16 & 0x0F) << 12) | ((c as u16 & 0x3F) << 6) | (d as u16 & 0x3F));
            i += 3;
        } else {
            return None;
        }
    }
    Some(
        char::decode_utf16(units)
            .map(|c| c.unwrap_or(char::REPLACEMENT_CHARACTER))
            .collect(),
    )
}

pub fn encode_mutf8(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    for unit in s.encode_utf16() {
        match unit {
            0x0001..=0x007F => out.push(unit as u8),
            0x0000 | 0x0080..=0x07FF => {
                out.push(0xC0 | (unit >> 6) as u8);
                out.push(0x80 | (unit & 0x3F) as u8);
            }
            _ => {
                out.push(0xE0 | (unit >> 12) as u8);
                out.push(0x80 | ((unit >> 6) & 0x3F) as u8);
                out.push(0x80 | (unit & 0x3F) as u8);
            }
        }
    }
    out
}

impl ClassFile {
    /// Parses a class file. Versions newer than [`MAX_MAJOR`] are accepted;
    /// callers decide whether to warn.
    pub fn parse(bytes: &[u8]) -> Result<ClassFile, ClassFileError> {
        let mut r = Reader::new(bytes);
        if r.u4()? != MAGIC {
            return Err(ClassFileError::BadMagic);
        }
        let minor_version = r.u2()?;
        let major_version = r.u2()?;
        if major_version < MIN_MAJOR {
            return Err(ClassFileError::UnsupportedVersion(major_version));
        }
        let count = r.u2()?;
        let mut entries = Vec::with_capacity(count as usize);
        entries.push(Constant::Unusable);
        while entries.len() < count as usize {
            let index = entries.len() as u16;
            let tag = r.u1()?;
            let c = match tag {
                1 => {
                    let len = r.u2()? as usize;
                    Constant::Utf8(decode_mutf8(r.take(len)?).ok_or(ClassFileError::BadUtf8(index))?)
                }
                3 => Constant::Integer(r.u4()? as i32),
                4 => Constant::Float(r.u4()?),
                5 => Constant::Long(r.u8()? as i64),
                6 => Constant::Double(r.u8()?),
                7 => Constant::Class(r.u2()?),
                8 => Constant::String(r.u2()?),
                9 => Constant::Fieldref(r.u2()?, r.u2()?),
                10 => Constant::Methodref(r.u2()?, r.u2()?),
                11 => Constant::InterfaceMethodref(r.u2()?, r.u2()?),
                12 => Constant::NameAndType(r.u2()?, r.u2()?),
                15 => Constant::MethodHandle(r.u1()?, r.u2()?),
                16 => Constant::MethodType(r.u2()?),
                17 => Constant::Dynamic(r.u2()?, r.u2()?),
                18 => Constant::InvokeDynamic(r.u2()?, r.u2()?),
                19 => Constant::Module(r.u2()?),
                20 => Constant::Package(r.u2()?),
                _ => return Err(ClassFileError::BadTag { tag, index }),
            };
            let wide = c.is_wide();
            entries.push(c);
            if wide {
                entries.push(Constant::Unusable);
            }
        }
        if entries.len() != count as usize {
            return Err(ClassFileError::BadIndex(count));
        }
        let constant_pool = ConstantPool { entries };
        let access_flags = r.u2()?;
        let this_class = r.u2()?;
        let super_class = r.u2()?;
        let n = r.u2()?;
        let interfaces = (0..n).map(|_| r.u2()).collect::<Result<_, _>>()?;
        let fields = read_members(&mut r)?;
        let methods = read_members(&mut r)?;
        let attributes = read_attributes(&mut r)?;
        if !r.is_empty() {
            return Err(ClassFileError::Trailing);
        }
        let cf = ClassFile {
            minor_version,
            major_version,
            constant_pool,
            access_flags,
            this_class,
            super_class,
            interfaces,
            fields,
            methods,
            attributes,
        };
        cf.constant_pool.class_name(cf.this_class)?;
        Ok(cf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(&MAGIC.to_be_bytes());
        put_u2(&mut w, self.minor_version);
        put_u2(&mut w, self.major_version);
        put_u2(&mut w, self.constant_pool.count() as u16);
        for c in self.constant_pool.entries.iter().skip(1) {
            if let Constant::Unusable = c {
                continue;
            }
            w.push(c.tag());
            match c {
                Constant::Unusable => {}
                Constant::Utf8(s) => {
                    let b = encode_mutf8(s);
                    put_u2(&mut w, b.len() as u16);
                    w.extend_from_slice(&b);
                }
                Constant::Integer(v) => w.extend_from_slice(&v.to_be_bytes()),
                Constant::Float(v) => w.extend_from_slice(&v.to_be_bytes()),
                Constant::Long(v) => w.extend_from_slice(&v.to_be_bytes()),
                Constant::Double(v) => w.extend_from_slice(&v.to_be_bytes()),
                Constant::Class(a)
                | Constant::String(a)
                | Constant::MethodType(a)
                | Constant::Module(a)
                | Constant::Package(a) => put_u2(&mut w, *a),
                Constant::MethodHandle(k, a) => {
                    w.push(*k);
                    put_u2(&mut w, *a);
                }
                Constant::Fieldref(a, b)
                | Constant::Methodref(a, b)
                | Constant::InterfaceMethodref(a, b)
                | Constant::NameAndType(a, b)
                | Constant::Dynamic(a, b)
                | Constant::InvokeDynamic(a, b) => {
                    put_u2(&mut w, *a);
                    put_u2(&mut w, *b);
                }
            }
        }
        put_u2(&mut w, self.access_flags);
        put_u2(&mut w, self.this_class);
        put_u2(&mut w, self.super_class);
        put_u2(&mut w, self.interfaces.len() as u16);
        for i in &self.interfaces {
            put_u2(&mut w, *i);
        }
        for members in [&self.fields, &self.methods] {
            put_u2(&mut w, members.len() as u16);
            for m in members {
                put_u2(&mut w, m.access_flags);
                put_u2(&mut w, m.name_index);
                put_u2(&mut w, m.descriptor_index);
                write_attributes(&mut w, &m.attributes);
            }
        }
        write_attributes(&mut w, &self.attributes);
        w
    }

    pub fn name(&self) -> Result<&str, ClassFileError> {
        self.constant_pool.class_name(self.this_class)
    }

    pub fn super_name(&self) -> Result<Option<&str>, ClassFileError> {
        if self.super_class == 0 {
            Ok(None)
        } else {
            self.constant_pool.class_name(self.super_class).map(Some)
        }
    }

    pub fn attribute_name(&self, a: &Attribute) -> Result<&str, ClassFileError> {
        self.constant_pool.utf8(a.name_index)
    }

    pub fn find_attribute<'a>(&self, attributes: &'a [Attribute], name: &str) -> Option<&'a Attribute> {
        attributes
            .iter()
            .find(|a| self.constant_pool.utf8(a.name_index).ok() == Some(name))
    }

    pub fn code(&self, method: &Member) -> Result<Option<CodeAttribute>, ClassFileError> {
        self.find_attribute(&method.attributes, "Code")
            .map(|a| CodeAttribute::parse(&a.info))
            .transpose()
    }

    pub fn inner_classes(&self) -> Result<Vec<InnerClassEntry>, ClassFileError> {
        let Some(a) = self.find_attribute(&self.attributes, "InnerClasses") else {
            return Ok(Vec::new());
        };
        let mut r = Reader::new(&a.info);
        let n = r.u2()?;
        (0..n)
            .map(|_| {
                Ok(InnerClassEntry {
                    inner_class: r.u2()?,
                    outer_class: r.u2()?,
                    inner_name: r.u2()?,
                    access_flags: r.u2()?,
                })
            })
            .collect()
    }
}

impl CodeAttribute {
    pub fn parse(info: &[u8]) -> Result<CodeAttribute, ClassFileError> {
        let mut r = Reader::new(info);
        let max_stack = r.u2()?;
        let max_locals = r.u2()?;
        let len = r.u4()? as usize;
        let code = r.take(len)?.to_vec();
        let n = r.u2()?;
        let exception_table = (0..n)
            .map(|_| {
                Ok(ExceptionHandler {
                    start_pc: r.u2()?,
                    end_pc: r.u2()?,
                    handler_pc: r.u2()?,
                    catch_type: r.u2()?,
                })
            })
            .collect::<Result<_, ClassFileError>>()?;
        let attributes = read_attributes(&mut r)?;
        if !r.is_empty() {
            return Err(ClassFileError::BadCode("trailing bytes in Code attribute".into()));
        }
        Ok(CodeAttribute {
            max_stack,
            max_locals,
            code,
            exception_table,
            attributes,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        put_u2(&mut w, self.max_stack);
        put_u2(&mut w, self.max_locals);
        w.extend_from_slice(&(self.code.len() as u32).to_be_bytes());
        w.extend_from_slice(&self.code);
        put_u2(&mut w, self.exception_table.len() as u16);
        for e in &self.exception_table {
            for v in [e.start_pc, e.end_pc, e.handler_pc, e.catch_type] {
                put_u2(&mut w, v);
            }
        }
        write_attributes(&mut w, &self.attributes);
        w
    }
}

pub(crate) fn put_u2(w: &mut Vec<u8>, v: u16) {
    w.extend_from_slice(&v.to_be_bytes());
}

fn write_attributes(w: &mut Vec<u8>, attributes: &[Attribute]) {
    put_u2(w, attributes.len() as u16);
    for a in attributes {
        put_u2(w, a.name_index);
        w.extend_from_slice(&(a.info.len() as u32).to_be_bytes());
        w.extend_from_slice(&a.info);
    }
}
