use std::sync::LazyLock;

use regex::Regex;

use crate::catalog::Catalog;
use crate::terminology::normalize_term;

use super::RawNote;

static MARKDOWN_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*#{1,6}\s*(.*?)\s*#*\s*$").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece {
    /// Heading line (with its line break) opening section `index`.
    Heading { index: usize, raw: String },
    /// Body text of section `index`.
    Body { index: usize, raw: String },
    Residual(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    /// Canonical section id, e.g. `medications`.
    pub id: String,
    /// Heading title as written.
    pub title: String,
    /// Body text, untrimmed.
    pub raw_body: String,
}

impl Section {
    pub fn body(&self) -> &str {
        self.raw_body.trim()
    }
}

/// A note split into headed sections; text outside any section is residual.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SectionedNote {
    pub sections: Vec<Section>,
    /// Every piece of the source in order, so the original text can be rebuilt.
    pub pieces: Vec<Piece>,
}

impl SectionedNote {
    pub fn residual(&self) -> String {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Residual(s) => Some(s.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn reconstruct(&self) -> String {
        self.pieces
            .iter()
            .map(|p| match p {
                Piece::Heading { raw, .. } | Piece::Body { raw, .. } | Piece::Residual(raw) => {
                    raw.as_str()
                }
            })
            .collect()
    }

    pub fn sections_with(&self, ids: &[&str]) -> impl Iterator<Item = &Section> {
        let ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        self.sections.iter().filter(move |s| ids.contains(&s.id))
    }
}

fn canonical(cat: &Catalog, title: &str) -> Option<String> {
    let n = normalize_term(title);
    cat.headings
        .iter()
        .find(|(_, syn)| normalize_term(syn) == n)
        .map(|(id, _)| id.clone())
}

/// Returns (canonical id, title) when the line opens a section.
fn heading(cat: &Catalog, line: &str) -> Option<(String, String)> {
    let content = line.trim_end_matches(['\n', '\r']);
    if let Some(c) = MARKDOWN_HEADING.captures(content) {
        let title = c[1].trim_end_matches(':').trim().to_string();
        if title.is_empty() {
            return None;
        }
        let id = canonical(cat, &title).unwrap_or_else(|| normalize_term(&title).replace(' ', "_"));
        if id.is_empty() {
            return None;
        }
        return Some((id, title));
    }
    let t = content.trim();
    let bare = t.strip_suffix(':').unwrap_or(t).trim();
    if bare.is_empty() || bare.len() > 60 {
        return None;
    }
    canonical(cat, bare).map(|id| (id, bare.to_string()))
}

/// Splits on Markdown headings and on bare lines naming a known heading.
pub fn segment_sections(cat: &Catalog, note: &RawNote) -> SectionedNote {
    let mut out = SectionedNote::default();
    for line in note.text.split_inclusive('\n') {
        if let Some((id, title)) = heading(cat, line) {
            let index = out.sections.len();
            out.sections.push(Section {
                id,
                title,
                raw_body: String::new(),
            });
            out.pieces.push(Piece::Heading {
                index,
                raw: line.to_string(),
            });
            continue;
        }
        match out.pieces.last_mut() {
            Some(Piece::Heading { index, .. }) => {
                let index = *index;
                out.sections[index].raw_body.push_str(line);
                out.pieces.push(Piece::Body {
                    index,
                    raw: line.to_string(),
                });
            }
            Some(Piece::Body { index, raw }) => {
                out.sections[*index].raw_body.push_str(line);
                raw.push_str(line);
            }
            Some(Piece::Residual(raw)) => raw.push_str(line),
            None => out.pieces.push(Piece::Residual(line.to_string())),
        }
    }
    out
}
