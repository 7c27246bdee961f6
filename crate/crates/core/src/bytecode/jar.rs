//! Reading class entries from jars and directories, and writing jars.

use std::io::{self, Cursor, Read, Write};
use std::path::Path;

use walkdir::WalkDir;
use zip::write::SimpleFileOptions;

use crate::diag::Diagnostics;

/// Raw `.class` entries of a container, keyed by entry path.
#[derive(Debug, Default)]
pub struct ClassEntries {
    pub entries: Vec<(String, Vec<u8>)>,
    pub resource_entries: usize,
    pub diagnostics: Diagnostics,
}

fn wanted(path: &str) -> bool {
    path.ends_with(".class")
        && !path.ends_with("module-info.class")
        && !path.ends_with("package-info.class")
        && !path.starts_with("META-INF/versions/")
}

/// Reads every class entry of a jar. A container that cannot be opened is an
/// error; individual entries that fail to inflate become diagnostics.
pub fn read_jar(bytes: &[u8], subject: &str) -> Result<ClassEntries, zip::result::ZipError> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))?;
    let mut out = ClassEntries::default();
    for i in 0..archive.len() {
        let mut file = match archive.by_index(i) {
            Ok(f) => f,
            Err(e) => {
                out.diagnostics
                    .push("unreadable_entry", subject, format!("entry {i}: {e}"));
                continue;
            }
        };
        if file.is_dir() {
            continue;
        }
        let name = match file.name() {
            Ok(n) => n.to_string(),
            Err(e) => {
                out.diagnostics
                    .push("unreadable_entry", subject, format!("entry {i}: {e}"));
                continue;
            }
        };
        if !wanted(&name) {
            out.resource_entries += 1;
            continue;
        }
        let mut buf = Vec::with_capacity(file.size() as usize);
        match file.read_to_end(&mut buf) {
            Ok(_) => out.entries.push((name, buf)),
            Err(e) => out
                .diagnostics
                .push("unreadable_entry", format!("{subject}!{name}"), e.to_string()),
        }
    }
    out.entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Reads every `.class` file below `dir`, with paths relative to it.
pub fn read_class_dir(dir: &Path) -> io::Result<ClassEntries> {
    let mut out = ClassEntries::default();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(io::Error::other)?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .unwrap_or(entry.path())
            .to_string_lossy()
            .replace('\\', "/");
        if wanted(&rel) {
            out.entries.push((rel, std::fs::read(entry.path())?));
        } else {
            out.resource_entries += 1;
        }
    }
    Ok(out)
}

/// Writes a deflated jar with the given entries, in order.
pub fn write_jar(entries: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut w = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    for (name, bytes) in entries {
        w.start_file(name.as_str(), options).expect("writing to memory");
        w.write_all(bytes).expect("writing to memory");
    }
    w.finish().expect("writing to memory").into_inner()
}
