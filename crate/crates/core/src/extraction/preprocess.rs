use crate::catalog::Catalog;

use super::{ExtractError, RawNote};

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '/'
}

/// Replaces whole-word occurrences; the neighbours of a match must not be word characters.
fn expand(line: &str, abbr: &str, expansion: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    let mut prev: Option<char> = None;
    while let Some(pos) = rest.find(abbr) {
        let before = rest[..pos].chars().next_back().or(prev);
        let after = rest[pos + abbr.len()..].chars().next();
        out.push_str(&rest[..pos]);
        if before.is_some_and(is_word) || after.is_some_and(is_word) {
            out.push_str(abbr);
        } else {
            out.push_str(expansion);
        }
        prev = abbr.chars().next_back();
        rest = &rest[pos + abbr.len()..];
    }
    out.push_str(rest);
    out
}

/// Normalizes line endings and whitespace, drops boilerplate lines, expands abbreviations.
pub fn preprocess(cat: &Catalog, note: &RawNote) -> Result<RawNote, ExtractError> {
    let text = note.text.replace("\r\n", "\n").replace('\r', "\n");
    let mut lines: Vec<String> = Vec::new();
    for raw in text.split('\n') {
        let line = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        if cat.boilerplate.iter().any(|re| re.is_match(&line)) {
            continue;
        }
        let line = cat
            .abbreviations
            .iter()
            .fold(line, |acc, (a, e)| expand(&acc, a, e));
        if line.is_empty() && lines.last().is_none_or(|l| l.is_empty()) {
            continue;
        }
        lines.push(line);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(ExtractError::EmptyNote);
    }
    let mut out = lines.join("\n");
    out.push('\n');
    Ok(RawNote {
        text: out,
        source_kind: note.source_kind,
        note_date: note.note_date,
    })
}
