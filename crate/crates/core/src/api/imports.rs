use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Java,
    Csharp,
    Cpp,
}

impl Language {
    /// Language implied by a file extension, if it is one of the supported ones.
    pub fn from_path(path: &str) -> Option<Self> {
        let ext = path.rsplit_once('.')?.1.to_ascii_lowercase();
        match ext.as_str() {
            "java" => Some(Language::Java),
            "cs" => Some(Language::Csharp),
            "cpp" | "cc" | "cxx" | "c++" | "h" | "hpp" | "hh" | "hxx" => Some(Language::Cpp),
            _ => None,
        }
    }
}

impl FromStr for Language {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "java" => Ok(Language::Java),
            "csharp" | "cs" | "c#" => Ok(Language::Csharp),
            "cpp" | "c++" | "cxx" => Ok(Language::Cpp),
            _ => Err(ApiError::UnsupportedLanguage(s.to_string())),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::Java => "java",
            Language::Csharp => "csharp",
            Language::Cpp => "cpp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiImport {
    /// The statement exactly as it appears in the source.
    pub raw_statement: String,
    pub qualified_name: String,
    pub language: Language,
}

/// Copy of `content` with comments (and, if `strings` is set, the insides of
/// string and character literals) replaced by spaces, byte for byte, so that
/// offsets into the result are offsets into the original. Newlines are kept.
fn blank_comments(content: &str, language: Language, strings: bool) -> String {
    #[derive(PartialEq)]
    enum State {
        Code,
        Line,
        Block,
        Str,
        Verbatim,
        Char,
    }
    let b = content.as_bytes();
    let mut out = b.to_vec();
    let mut state = State::Code;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let next = b.get(i + 1).copied();
        match state {
            State::Code => match c {
                b'/' if next == Some(b'/') => {
                    state = State::Line;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 1;
                }
                b'/' if next == Some(b'*') => {
                    state = State::Block;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 1;
                }
                b'@' if language == Language::Csharp && next == Some(b'"') => {
                    state = State::Verbatim;
                    i += 1;
                }
                b'"' => state = State::Str,
                b'\'' => state = State::Char,
                _ => {}
            },
            State::Line => {
                if c == b'\n' {
                    state = State::Code;
                } else {
                    out[i] = b' ';
                }
            }
            State::Block => {
                if c == b'*' && next == Some(b'/') {
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 1;
                    state = State::Code;
                } else if c != b'\n' {
                    out[i] = b' ';
                }
            }
            State::Str | State::Char => {
                let close = if state == State::Str { b'"' } else { b'\'' };
                if c == b'\\' {
                    if strings {
                        out[i] = b' ';
                        if next.is_some_and(|n| n != b'\n') {
                            out[i + 1] = b' ';
                        }
                    }
                    i += 1;
                } else if c == close || c == b'\n' {
                    state = State::Code;
                } else if strings {
                    out[i] = b' ';
                }
            }
            State::Verbatim => {
                if c == b'"' {
                    if next == Some(b'"') {
                        if strings {
                            out[i] = b' ';
                            out[i + 1] = b' ';
                        }
                        i += 1;
                    } else {
                        state = State::Code;
                    }
                } else if strings && c != b'\n' {
                    out[i] = b' ';
                }
            }
        }
        i += 1;
    }
    // Every byte of a multi-byte character inside a blanked region is replaced.
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' || c == '@' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

fn dotted_name(s: &str) -> Option<String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let compact = compact.strip_prefix("global::").unwrap_or(&compact);
    if compact.is_empty() || !compact.split('.').all(is_ident) {
        return None;
    }
    Some(compact.to_string())
}

fn strip_keyword<'a>(s: &'a str, kw: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(kw)?;
    if rest.starts_with(char::is_whitespace) {
        Some(rest.trim_start())
    } else {
        None
    }
}

fn java_name(stmt: &str) -> Option<String> {
    let rest = strip_keyword(stmt, "import")?;
    let rest = strip_keyword(rest, "static").unwrap_or(rest);
    let compact: String = rest.chars().filter(|c| !c.is_whitespace()).collect();
    let base = compact.strip_suffix(".*").unwrap_or(&compact);
    dotted_name(base)
}

fn csharp_name(stmt: &str) -> Option<String> {
    let stmt = strip_keyword(stmt, "global").unwrap_or(stmt);
    let rest = strip_keyword(stmt, "using")?;
    if rest.starts_with('(') {
        return None;
    }
    if let Some(target) = strip_keyword(rest, "static") {
        return dotted_name(strip_generics(target));
    }
    if let Some((alias, target)) = rest.split_once('=') {
        if !is_ident(alias.trim()) {
            return None;
        }
        return dotted_name(strip_generics(target));
    }
    dotted_name(rest)
}

fn strip_generics(s: &str) -> &str {
    s.split('<').next().unwrap_or(s)
}

/// `#include <x>` / `#include "x"`; returns (name, byte length of the directive).
fn cpp_include(line: &str) -> Option<(String, usize)> {
    let rest = line.strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix("include")?;
    let spaced = rest.trim_start();
    let used = line.len() - spaced.len();
    let (open, close) = match spaced.chars().next()? {
        '<' => ('<', '>'),
        '"' => ('"', '"'),
        _ => return None,
    };
    let inner = &spaced[open.len_utf8()..];
    let end = inner.find(close)?;
    let path = inner[..end].trim().trim_matches(|c| c == '/' || c == '.' || c == '\\');
    if path.is_empty() {
        return None;
    }
    Some((path.to_string(), used + open.len_utf8() + end + close.len_utf8()))
}

/// Extract import/using/include statements. Statements inside comments and
/// malformed lines are skipped; duplicates are kept in file order.
pub fn extract_imports(content: &str, language: Language) -> Vec<ApiImport> {
    // include paths are string literals, so C++ keeps them
    let clean = blank_comments(content, language, language != Language::Cpp);
    let mut out = Vec::new();
    let mut line_start = 0;
    for line in clean.split_inclusive('\n') {
        match language {
            Language::Cpp => {
                let trimmed = line.trim_start();
                let offset = line_start + (line.len() - trimmed.len());
                if let Some((name, len)) = cpp_include(trimmed) {
                    out.push(ApiImport {
                        raw_statement: content[offset..offset + len].to_string(),
                        qualified_name: name,
                        language,
                    });
                }
            }
            Language::Java | Language::Csharp => {
                // statements end at ';'; braces also separate statements
                let mut seg_start = 0;
                for (pos, ch) in line.char_indices() {
                    if !matches!(ch, ';' | '{' | '}') {
                        continue;
                    }
                    if ch == ';' {
                        let seg = &line[seg_start..pos];
                        let trimmed = seg.trim_start();
                        let name = match language {
                            Language::Java => java_name(trimmed.trim_end()),
                            _ => csharp_name(trimmed.trim_end()),
                        };
                        if let Some(name) = name {
                            let begin = line_start + seg_start + (seg.len() - trimmed.len());
                            out.push(ApiImport {
                                raw_statement: content[begin..line_start + pos + 1].to_string(),
                                qualified_name: name,
                                language,
                            });
                        }
                    }
                    seg_start = pos + 1;
                }
            }
        }
        line_start += line.len();
    }
    out
}
