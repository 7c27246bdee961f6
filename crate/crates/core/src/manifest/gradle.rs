//! A block-structured subset parser for Gradle build scripts (Groovy and
//! Kotlin DSL). It understands `dependencies { ... }` blocks with string
//! (`'g:n:v'`) and map (`group: 'g', name: 'n', version: 'v'`) notation, plus
//! `ext`/`def`/`val` variables defined in the same file or the root build file.
//! Anything computed by arbitrary code is reported as a diagnostic.

use std::collections::HashMap;

use super::{Declared, FileTree};
use crate::diag::Diagnostics;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// String literal; `true` when it is a double-quoted (interpolating) string.
    Str(String, bool),
    Punct(char),
    Newline,
}

fn lex(src: &str) -> Vec<Tok> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' | ';' => {
                out.push(Tok::Newline);
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    if chars[i] == '\n' {
                        out.push(Tok::Newline);
                    }
                    i += 1;
                }
                i += 2;
            }
            '\'' | '"' => {
                let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                let delim_len = if triple { 3 } else { 1 };
                i += delim_len;
                let mut value = String::new();
                while i < chars.len() {
                    if triple {
                        if chars[i] == c && chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c) {
                            break;
                        }
                    } else if chars[i] == c || chars[i] == '\n' {
                        break;
                    }
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        value.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    value.push(chars[i]);
                    i += 1;
                }
                i += delim_len;
                out.push(Tok::Str(value, c == '"'));
            }
            c if c.is_alphanumeric() || c == '_' || c == '$' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            c => {
                out.push(Tok::Punct(c));
                i += 1;
            }
        }
    }
    out
}

/// Index just past the bracket matching the opener at `open`.
fn matching(tokens: &[Tok], open: usize) -> usize {
    let (o, c) = match tokens[open] {
        Tok::Punct('{') => ('{', '}'),
        Tok::Punct('(') => ('(', ')'),
        Tok::Punct('[') => ('[', ']'),
        _ => return open + 1,
    };
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if *t == Tok::Punct(o) {
            depth += 1;
        } else if *t == Tok::Punct(c) {
            depth -= 1;
            if depth == 0 {
                return i + 1;
            }
        }
    }
    tokens.len()
}

/// Splits a token range into top-level statements. A trailing `,`, `+` or
/// `=` continues the statement onto the next line.
fn statements(tokens: &[Tok]) -> Vec<&[Tok]> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i] {
            Tok::Punct('{' | '(' | '[') => {
                i = matching(tokens, i);
                continue;
            }
            Tok::Newline => {
                let continues = i > start && matches!(tokens[i - 1], Tok::Punct(',' | '+' | '=' | ':'));
                if !continues {
                    if i > start {
                        out.push(&tokens[start..i]);
                    }
                    start = i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    if start < tokens.len() {
        out.push(&tokens[start..]);
    }
    out.into_iter()
        .map(|s| {
            let s: &[Tok] = s;
            let first = s.iter().position(|t| *t != Tok::Newline).unwrap_or(s.len());
            &s[first..]
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn strip_newlines(tokens: &[Tok]) -> Vec<Tok> {
    tokens.iter().filter(|t| **t != Tok::Newline).cloned().collect()
}

/// Splits on top-level commas.
fn split_args(tokens: &[Tok]) -> Vec<&[Tok]> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i] {
            Tok::Punct('{' | '(' | '[') => {
                i = matching(tokens, i);
                continue;
            }
            Tok::Punct(',') => {
                out.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if start < tokens.len() {
        out.push(&tokens[start..]);
    }
    out
}

const PATH_PREFIXES: [&str; 6] = [
    "rootProject.ext.",
    "project.ext.",
    "rootProject.",
    "project.",
    "ext.",
    "extra.",
];

fn normalize_path(path: &str) -> &str {
    let mut p = path;
    loop {
        let before = p;
        for prefix in PATH_PREFIXES {
            if let Some(rest) = p.strip_prefix(prefix) {
                p = rest;
            }
        }
        if p == before {
            return p;
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Scope {
    file: String,
    vars: HashMap<String, Vec<Tok>>,
}

impl Scope {
    fn define(&mut self, name: &str, value: &[Tok]) {
        let value = strip_newlines(value);
        if let [Tok::Punct('['), .., Tok::Punct(']')] = value.as_slice() {
            // Map literal: name.key = value
            for entry in split_args(&value[1..value.len() - 1]) {
                if let [Tok::Ident(k) | Tok::Str(k, _), Tok::Punct(':'), rest @ ..] = entry {
                    self.vars.insert(format!("{name}.{k}"), rest.to_vec());
                }
            }
            return;
        }
        self.vars.insert(name.to_string(), value);
    }

    fn collect(&mut self, tokens: &[Tok], in_ext: bool) {
        for raw in statements(tokens) {
            let stmt = strip_newlines(raw);
            let first_block = raw.iter().position(|t| *t == Tok::Punct('{'));
            match stmt.as_slice() {
                [Tok::Ident(kw), Tok::Ident(name), Tok::Punct('='), value @ ..]
                    if kw == "def" || kw == "val" || kw == "var" =>
                {
                    self.define(name, value);
                }
                [Tok::Ident(kw), Tok::Ident(name), Tok::Punct(':'), Tok::Ident(_), Tok::Punct('='), value @ ..]
                    if kw == "val" || kw == "var" =>
                {
                    self.define(name, value);
                }
                [Tok::Ident(ext), Tok::Punct('{'), ..] if ext == "ext" => {
                    let open = first_block.expect("statement contains a block");
                    let end = matching(raw, open);
                    self.collect(&raw[open + 1..end.saturating_sub(1)], true);
                }
                [Tok::Ident(ext), Tok::Punct('['), Tok::Str(name, _), Tok::Punct(']'), Tok::Punct('='), value @ ..]
                    if ext == "ext" || ext == "extra" =>
                {
                    self.define(name, value);
                }
                [Tok::Ident(set), Tok::Punct('('), Tok::Str(name, _), Tok::Punct(','), value @ .., Tok::Punct(')')]
                    if set == "set" && in_ext =>
                {
                    self.define(name, value);
                }
                [Tok::Ident(_), ..] => {
                    if let Some((path, value)) = dotted_assignment(&stmt) {
                        if let Some(name) = path.strip_prefix("ext.").or_else(|| {
                            path.strip_prefix("project.ext.")
                                .or_else(|| path.strip_prefix("rootProject.ext."))
                        }) {
                            self.define(name, value);
                            continue;
                        } else if in_ext && !path.contains('.') {
                            self.define(&path, value);
                            continue;
                        }
                    }
                    // Descend into blocks such as allprojects { ext { ... } }.
                    if let Some(open) = first_block {
                        let end = matching(raw, open);
                        let is_ext = open > 0 && matches!(&raw[open - 1], Tok::Ident(n) if n == "ext");
                        self.collect(&raw[open + 1..end.saturating_sub(1)], is_ext);
                    }
                }
                _ => {}
            }
        }
    }
}

/// `a.b.c = value` → ("a.b.c", value)
fn dotted_assignment(stmt: &[Tok]) -> Option<(String, &[Tok])> {
    let mut path = String::new();
    let mut i = 0;
    loop {
        match stmt.get(i)? {
            Tok::Ident(s) => path.push_str(s),
            _ => return None,
        }
        i += 1;
        match stmt.get(i)? {
            Tok::Punct('.') => {
                path.push('.');
                i += 1;
            }
            Tok::Punct('=') if stmt.get(i + 1) != Some(&Tok::Punct('=')) => {
                return Some((path, &stmt[i + 1..]));
            }
            _ => return None,
        }
    }
}

struct Evaluator<'a> {
    scopes: Vec<&'a Scope>,
    provenance: Vec<String>,
    depth: usize,
}

impl<'a> Evaluator<'a> {
    fn lookup(&mut self, path: &str) -> Option<String> {
        let name = normalize_path(path);
        if self.depth > 16 {
            return None;
        }
        for scope in self.scopes.clone() {
            if let Some(tokens) = scope.vars.get(name) {
                self.depth += 1;
                let value = self.eval(tokens);
                self.depth -= 1;
                if let Some(v) = &value {
                    self.provenance.push(format!("{name} = {v} ({})", scope.file));
                }
                return value;
            }
        }
        None
    }

    fn interpolate(&mut self, text: &str) -> Option<String> {
        let mut out = String::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i] != '$' {
                out.push(chars[i]);
                i += 1;
                continue;
            }
            if chars.get(i + 1) == Some(&'{') {
                let close = chars[i..].iter().position(|c| *c == '}')? + i;
                let expr: String = chars[i + 2..close].iter().collect();
                let tokens = lex(&expr);
                out.push_str(&self.eval(&tokens)?);
                i = close + 1;
            } else {
                let start = i + 1;
                let mut end = start;
                while end < chars.len() && (chars[end].is_alphanumeric() || chars[end] == '_' || chars[end] == '.') {
                    end += 1;
                }
                // A trailing '.' belongs to the surrounding text.
                while end > start && chars[end - 1] == '.' {
                    end -= 1;
                }
                if end == start {
                    out.push('$');
                    i += 1;
                    continue;
                }
                let path: String = chars[start..end].iter().collect();
                out.push_str(&self.lookup(&path)?);
                i = end;
            }
        }
        Some(out)
    }

    /// Evaluates `term (+ term)*` where a term is a string literal, a variable
    /// path, or `property("name")`.
    fn eval(&mut self, tokens: &[Tok]) -> Option<String> {
        let tokens = strip_newlines(tokens);
        let mut out = String::new();
        let mut i = 0;
        if tokens.is_empty() {
            return None;
        }
        loop {
            match tokens.get(i)? {
                Tok::Str(s, interp) => {
                    if *interp {
                        out.push_str(&self.interpolate(s)?);
                    } else {
                        out.push_str(s);
                    }
                    i += 1;
                }
                Tok::Ident(first) => {
                    if matches!(first.as_str(), "property" | "findProperty")
                        && tokens.get(i + 1) == Some(&Tok::Punct('('))
                    {
                        let Some(Tok::Str(name, _)) = tokens.get(i + 2) else {
                            return None;
                        };
                        if tokens.get(i + 3) != Some(&Tok::Punct(')')) {
                            return None;
                        }
                        out.push_str(&self.lookup(name)?);
                        i += 4;
                    } else {
                        let mut path = first.clone();
                        i += 1;
                        while tokens.get(i) == Some(&Tok::Punct('.')) {
                            match tokens.get(i + 1) {
                                Some(Tok::Ident(seg)) => {
                                    path.push('.');
                                    path.push_str(seg);
                                    i += 2;
                                }
                                _ => return None,
                            }
                        }
                        if tokens.get(i) == Some(&Tok::Punct('[')) {
                            if let (Some(Tok::Str(key, _)), Some(Tok::Punct(']'))) =
                                (tokens.get(i + 1), tokens.get(i + 2))
                            {
                                path.push('.');
                                path.push_str(key);
                                i += 3;
                            }
                        }
                        out.push_str(&self.lookup(&path)?);
                    }
                }
                _ => return None,
            }
            match tokens.get(i) {
                None => return Some(out),
                Some(Tok::Punct('+')) => i += 1,
                Some(_) => return None,
            }
        }
    }
}

const NON_DEPENDENCY_CALLS: [&str; 8] = [
    "project",
    "files",
    "fileTree",
    "gradleApi",
    "localGroovy",
    "gradleTestKit",
    "kotlin",
    "libs",
];

fn parse_file(
    path: &str,
    tokens: &[Tok],
    scope: &Scope,
    root_scope: Option<&Scope>,
    diagnostics: &mut Diagnostics,
    out: &mut Vec<Declared>,
) {
    let mut i = 0;
    let mut skip_until = 0usize;
    while i < tokens.len() {
        if i < skip_until {
            i += 1;
            continue;
        }
        if let Tok::Ident(name) = &tokens[i] {
            let next_is_block = tokens.get(i + 1) == Some(&Tok::Punct('{'));
            let after_dot = i > 0 && tokens[i - 1] == Tok::Punct('.');
            if name == "buildscript" && next_is_block {
                skip_until = matching(tokens, i + 1);
            } else if name == "dependencies" && next_is_block && !after_dot {
                let end = matching(tokens, i + 1);
                let body = &tokens[i + 2..end.saturating_sub(1)];
                for stmt in statements(body) {
                    parse_declaration(path, stmt, scope, root_scope, diagnostics, out);
                }
                i = end;
                continue;
            }
        }
        i += 1;
    }
}

fn parse_declaration(
    path: &str,
    stmt: &[Tok],
    scope: &Scope,
    root_scope: Option<&Scope>,
    diagnostics: &mut Diagnostics,
    out: &mut Vec<Declared>,
) {
    let stmt = strip_newlines(stmt);
    let Some(Tok::Ident(config)) = stmt.first() else { return };
    if matches!(
        config.as_str(),
        "constraints" | "components" | "modules" | "exclude" | "classpath"
    ) {
        return;
    }
    let mut rest = &stmt[1..];
    if rest.first() == Some(&Tok::Punct('{')) {
        return;
    }
    // Drop a trailing configuration closure: implementation('g:n:v') { ... }
    if let Some(pos) = rest.iter().position(|t| *t == Tok::Punct('{')) {
        rest = &rest[..pos];
    }
    if let [Tok::Punct('('), inner @ .., Tok::Punct(')')] = rest {
        rest = inner;
    }
    if rest.is_empty() {
        return;
    }
    if let [Tok::Ident(call), Tok::Punct('('), ..] = rest {
        if NON_DEPENDENCY_CALLS.contains(&call.as_str()) {
            return;
        }
        if call == "platform" || call == "enforcedPlatform" {
            diagnostics.push(
                "bom_import_ignored",
                path,
                format!("{config} {call}(...) is not resolved"),
            );
            return;
        }
    }

    let mut scopes = vec![scope];
    if let Some(root) = root_scope {
        scopes.push(root);
    }
    let mut ev = Evaluator {
        scopes,
        provenance: Vec::new(),
        depth: 0,
    };
    let test_scope = config.starts_with("test") || config.starts_with("androidTest");

    let args = split_args(rest);
    let named: Vec<(String, &[Tok])> = args
        .iter()
        .filter_map(|a| match *a {
            [Tok::Ident(k), Tok::Punct(':' | '='), ref v @ ..] => Some((k.clone(), v)),
            _ => None,
        })
        .collect();

    let (group, name, version) = if !named.is_empty() {
        let get = |key: &str, ev: &mut Evaluator| -> Option<Option<String>> {
            match named.iter().find(|(k, _)| k == key) {
                Some((_, v)) => ev.eval(v).map(Some),
                None => Some(None),
            }
        };
        match (get("group", &mut ev), get("name", &mut ev), get("version", &mut ev)) {
            (Some(Some(g)), Some(Some(n)), Some(v)) => (g, n, v),
            _ => {
                diagnostics.push(
                    "dynamic_declaration",
                    path,
                    format!("{config}: map notation not evaluable"),
                );
                return;
            }
        }
    } else {
        let Some(text) = ev.eval(args[0]) else {
            diagnostics.push(
                "dynamic_declaration",
                path,
                format!("{config}: declaration not evaluable"),
            );
            return;
        };
        let text = text.split('@').next().unwrap_or("").to_string();
        let parts: Vec<&str> = text.split(':').collect();
        match parts.as_slice() {
            [g, n] => (g.to_string(), n.to_string(), None),
            [g, n, v, ..] => (g.to_string(), n.to_string(), Some(v.to_string())),
            _ => {
                diagnostics.push(
                    "dynamic_declaration",
                    path,
                    format!("{config}: '{text}' is not a coordinate"),
                );
                return;
            }
        }
    };
    if group.is_empty() || name.is_empty() {
        diagnostics.push("incomplete_dependency", path, format!("{config}: empty group or name"));
        return;
    }
    let Some(version) = version.filter(|v| !v.is_empty()) else {
        diagnostics.push("unversioned_dependency", path, format!("{group}:{name} has no version"));
        return;
    };
    out.push(Declared {
        config_file: path.to_string(),
        group,
        name,
        version,
        test_scope,
        optional: false,
        provenance: ev.provenance,
    });
}

pub(super) fn extract(tree: &dyn FileTree, paths: &[String], diagnostics: &mut Diagnostics) -> Vec<Declared> {
    let mut lexed = Vec::new();
    for path in paths {
        match tree.read(path) {
            Ok(bytes) => lexed.push((path.clone(), lex(&String::from_utf8_lossy(&bytes)))),
            Err(e) => diagnostics.push("unreadable_file", path, e.to_string()),
        }
    }
    let scopes: Vec<Scope> = lexed
        .iter()
        .map(|(path, tokens)| {
            let mut scope = Scope {
                file: path.clone(),
                ..Scope::default()
            };
            scope.collect(tokens, false);
            scope
        })
        .collect();
    let root_index = lexed
        .iter()
        .position(|(p, _)| p == "build.gradle")
        .or_else(|| lexed.iter().position(|(p, _)| p == "build.gradle.kts"));

    let mut out = Vec::new();
    for (idx, (path, tokens)) in lexed.iter().enumerate() {
        if path.ends_with(".kts") {
            diagnostics.push("kotlin_dsl_best_effort", path, "Kotlin DSL parsed best-effort");
        }
        let root_scope = root_index.filter(|r| *r != idx).map(|r| &scopes[r]);
        parse_file(path, tokens, &scopes[idx], root_scope, diagnostics, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{extract_dependencies, CommitRef, Extraction, MemTree, SourceSet};

    fn extract(files: &[(&str, &str)]) -> Extraction {
        let tree: MemTree = files.iter().map(|(p, c)| (p.to_string(), c.to_string())).collect();
        extract_dependencies(&tree, &CommitRef::new("c", 0), "p").unwrap()
    }

    fn coords(ex: &Extraction) -> Vec<String> {
        ex.dependencies.iter().map(|d| d.version_ref.to_string()).collect()
    }

    #[test]
    fn string_notation_and_test_scope() {
        let ex = extract(&[(
            "build.gradle",
            r#"
plugins { id 'java' }
dependencies {
    implementation 'com.google.guava:guava:28.0-jre'
    testImplementation 'org.mockito:mockito-core:2.23.0'
    compile("org.slf4j:slf4j-api:1.7.25") { exclude group: 'x', module: 'y' }
    implementation project(':core')
    implementation files('libs/a.jar')
}
"#,
        )]);
        assert_eq!(
            coords(&ex),
            vec![
                "com.google.guava:guava:28.0-jre",
                "org.mockito:mockito-core:2.23.0",
                "org.slf4j:slf4j-api:1.7.25"
            ]
        );
        assert_eq!(ex.dependencies[1].source_set, SourceSet::Test);
        assert_eq!(ex.dependencies[0].source_set, SourceSet::Main);
        assert!(ex.diagnostics.is_empty(), "{:?}", ex.diagnostics);
    }

    #[test]
    fn map_notation_and_variables() {
        let ex = extract(&[
            (
                "build.gradle",
                r#"
ext {
    springVersion = '5.1.0'
    set('jacksonVersion', "2.9.8")
}
ext.junitVersion = '4.12'
ext.libs = [commonsLang: 'org.apache.commons:commons-lang3:3.9']
"#,
            ),
            (
                "app/build.gradle",
                r#"
def localVersion = "1.2"
dependencies {
    compile group: 'org.springframework', name: 'spring-core', version: springVersion
    implementation "com.fasterxml.jackson.core:jackson-databind:${jacksonVersion}"
    testCompile "junit:junit:$junitVersion"
    implementation "a.b:c:$localVersion"
    implementation libs.commonsLang
    implementation 'org.x:y:' + rootProject.ext.springVersion
    implementation someFunction()
}
"#,
            ),
        ]);
        assert_eq!(
            coords(&ex),
            vec![
                "a.b:c:1.2",
                "com.fasterxml.jackson.core:jackson-databind:2.9.8",
                "junit:junit:4.12",
                "org.apache.commons:commons-lang3:3.9",
                "org.springframework:spring-core:5.1.0",
                "org.x:y:5.1.0",
            ]
        );
        assert!(ex.diagnostics.has("dynamic_declaration"));
        let spring = ex
            .dependencies
            .iter()
            .find(|d| d.version_ref.library.name == "spring-core")
            .unwrap();
        assert_eq!(spring.provenance, vec!["springVersion = 5.1.0 (build.gradle)"]);
    }

    #[test]
    fn buildscript_and_comments_ignored() {
        let ex = extract(&[(
            "build.gradle",
            r#"
buildscript {
    dependencies { classpath 'com.android.tools.build:gradle:3.0.0' }
}
/* dependencies { implementation 'no:no:1' } */
dependencies {
    // implementation 'no:no:2'
    implementation 'yes:yes:3' // trailing
    implementation 'no.version:here'
    implementation platform('org.bom:bom:1.0')
}
"#,
        )]);
        assert_eq!(coords(&ex), vec!["yes:yes:3"]);
        assert!(ex.diagnostics.has("unversioned_dependency"));
        assert!(ex.diagnostics.has("bom_import_ignored"));
    }

    #[test]
    fn kotlin_dsl() {
        let ex = extract(&[(
            "build.gradle.kts",
            r#"
val kotlinxVersion = "1.3.0"
val okhttp: String = "4.2.0"
dependencies {
    implementation("org.jetbrains.kotlinx:kotlinx-coroutines-core:$kotlinxVersion")
    implementation(group = "com.squareup.okhttp3", name = "okhttp", version = okhttp)
    testImplementation("junit:junit:4.13")
    implementation(kotlin("stdlib"))
}
"#,
        )]);
        assert_eq!(
            coords(&ex),
            vec![
                "com.squareup.okhttp3:okhttp:4.2.0",
                "junit:junit:4.13",
                "org.jetbrains.kotlinx:kotlinx-coroutines-core:1.3.0"
            ]
        );
        assert!(ex.diagnostics.has("kotlin_dsl_best_effort"));
    }

    #[test]
    fn multiline_map_notation() {
        let ex = extract(&[(
            "build.gradle",
            "dependencies {\n  implementation group: 'g',\n    name: 'n',\n    version: '1.0'\n  api 'x:y:2'\n}\n",
        )]);
        assert_eq!(coords(&ex), vec!["g:n:1.0", "x:y:2"]);
    }
}
