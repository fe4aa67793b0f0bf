//! Code tables, value sets, and term normalization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::fhir::{Coding, ICD10_URI, LOINC_URI, RXNORM_URI, SNOMED_URI};

pub const NOT_DOCUMENTED: &str = "Not Documented";
pub const OTHER: &str = "Other";
/// Minimum token-overlap score for a fuzzy match.
pub const MATCH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodeSystemId {
    Snomed,
    Loinc,
    Rxnorm,
    Icd10,
}

impl CodeSystemId {
    pub const ALL: [CodeSystemId; 4] = [
        CodeSystemId::Snomed,
        CodeSystemId::Loinc,
        CodeSystemId::Rxnorm,
        CodeSystemId::Icd10,
    ];

    pub fn uri(&self) -> &'static str {
        match self {
            CodeSystemId::Snomed => SNOMED_URI,
            CodeSystemId::Loinc => LOINC_URI,
            CodeSystemId::Rxnorm => RXNORM_URI,
            CodeSystemId::Icd10 => ICD10_URI,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CodeSystemId::Snomed => "SNOMED",
            CodeSystemId::Loinc => "LOINC",
            CodeSystemId::Rxnorm => "RXNORM",
            CodeSystemId::Icd10 => "ICD10",
        }
    }

    pub fn from_uri(uri: &str) -> Option<CodeSystemId> {
        CodeSystemId::ALL.into_iter().find(|s| s.uri() == uri)
    }

    /// Accepts the short label (any case) or the system URI.
    pub fn parse(s: &str) -> Option<CodeSystemId> {
        CodeSystemId::from_uri(s).or_else(|| match s.to_ascii_uppercase().as_str() {
            "SNOMED" | "SNOMED-CT" | "SNOMEDCT" | "SCT" => Some(CodeSystemId::Snomed),
            "LOINC" => Some(CodeSystemId::Loinc),
            "RXNORM" => Some(CodeSystemId::Rxnorm),
            "ICD10" | "ICD-10" | "ICD-10-CM" => Some(CodeSystemId::Icd10),
            _ => None,
        })
    }
}

impl fmt::Display for CodeSystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeEntry {
    pub system: CodeSystemId,
    pub code: String,
    pub display: String,
    /// Normalized synonyms.
    pub synonyms: Vec<String>,
}

impl CodeEntry {
    pub fn coding(&self) -> Coding {
        Coding::new(self.system.uri(), &self.code, Some(&self.display))
    }
}

#[derive(Debug, Clone, Default)]
pub struct CodeTable {
    entries: Vec<CodeEntry>,
    index: HashMap<(CodeSystemId, String), usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate code {system} {code}")]
    Duplicate { system: CodeSystemId, code: String },
}

impl CodeTable {
    pub fn from_entries(entries: Vec<CodeEntry>) -> Result<CodeTable, TableError> {
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if index.insert((e.system, e.code.clone()), i).is_some() {
                return Err(TableError::Duplicate {
                    system: e.system,
                    code: e.code.clone(),
                });
            }
        }
        Ok(CodeTable { entries, index })
    }

    /// Parses the tab-separated table: system, code, display, pipe-separated synonyms.
    pub fn parse_tsv(text: &str) -> Result<CodeTable, TableError> {
        let mut entries = Vec::new();
        for (line, cols) in tsv_rows(text) {
            let err = |message: &str| TableError::Parse {
                line,
                message: message.to_string(),
            };
            if cols.len() < 3 {
                return Err(err("expected at least 3 columns"));
            }
            let system = CodeSystemId::parse(cols[0]).ok_or_else(|| err("unknown code system"))?;
            if cols[1].is_empty() || cols[2].is_empty() {
                return Err(err("empty code or display"));
            }
            let synonyms = cols
                .get(3)
                .map(|s| {
                    s.split('|')
                        .map(normalize_term)
                        .filter(|s| !s.is_empty())
                        .collect()
                })
                .unwrap_or_default();
            entries.push(CodeEntry {
                system,
                code: cols[1].to_string(),
                display: cols[2].to_string(),
                synonyms,
            });
        }
        CodeTable::from_entries(entries)
    }

    pub fn entries(&self) -> &[CodeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The entry for `(system, code)`; `None` is the unknown-code result.
    pub fn lookup(&self, system: CodeSystemId, code: &str) -> Option<&CodeEntry> {
        self.index
            .get(&(system, code.to_string()))
            .map(|&i| &self.entries[i])
    }

    /// Ranked candidates for a free-text term within one code system.
    pub fn map_term(&self, term: &str, system: CodeSystemId) -> Vec<(&CodeEntry, f64)> {
        let norm = normalize_term(term);
        if norm.is_empty() {
            return Vec::new();
        }
        let toks = tokens(&norm);
        let mut out: Vec<(&CodeEntry, f64)> = self
            .entries
            .iter()
            .filter(|e| e.system == system)
            .filter_map(|e| {
                let display = normalize_term(&e.display);
                let names = std::iter::once(&display).chain(e.synonyms.iter());
                let mut best = 0.0f64;
                for name in names {
                    if *name == norm {
                        best = 1.0;
                        break;
                    }
                    best = best.max(jaccard(&toks, &tokens(name)));
                }
                (best >= MATCH_THRESHOLD).then_some((e, best))
            })
            .collect();
        out.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then_with(|| a.0.code.cmp(&b.0.code))
        });
        out
    }

    /// Highest-ranked mapping, if any clears the threshold.
    pub fn best(&self, term: &str, system: CodeSystemId) -> Option<&CodeEntry> {
        self.map_term(term, system).first().map(|(e, _)| *e)
    }

    /// Whether the coding's system and code appear in the table.
    pub fn contains_coding(&self, c: &Coding) -> bool {
        CodeSystemId::from_uri(&c.system).is_some_and(|s| self.lookup(s, &c.code).is_some())
    }
}

pub(crate) fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim_end_matches('\r');
        if l.trim().is_empty() || l.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split('\t').map(str::trim).collect()))
        }
    })
}

/// Lowercase, punctuation to spaces, whitespace collapsed.
pub fn normalize_term(s: &str) -> String {
    let mapped: String = s
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokens(normalized: &str) -> BTreeSet<&str> {
    normalized.split_whitespace().collect()
}

pub fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSet {
    pub name: String,
    pub members: Vec<String>,
    pub source: String,
    /// Alternative spellings, each pointing at a member.
    pub aliases: Vec<(String, String)>,
}

impl ValueSet {
    pub fn contains(&self, token: &str) -> bool {
        self.members.iter().any(|m| m == token)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValueSets {
    sets: BTreeMap<String, ValueSet>,
}

impl ValueSets {
    /// Parses `valuesets.tsv` rows (name, member, source) and alias rows (name, alias, member).
    pub fn parse_tsv(members: &str, aliases: &str) -> Result<ValueSets, TableError> {
        let mut sets: BTreeMap<String, ValueSet> = BTreeMap::new();
        for (line, cols) in tsv_rows(members) {
            if cols.len() < 2 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(TableError::Parse {
                    line,
                    message: "expected name and member".into(),
                });
            }
            let vs = sets.entry(cols[0].to_string()).or_insert_with(|| ValueSet {
                name: cols[0].to_string(),
                members: Vec::new(),
                source: cols.get(2).copied().unwrap_or("").to_string(),
                aliases: Vec::new(),
            });
            if vs.contains(cols[1]) {
                return Err(TableError::Parse {
                    line,
                    message: format!("duplicate member {:?} in {}", cols[1], cols[0]),
                });
            }
            vs.members.push(cols[1].to_string());
        }
        for (line, cols) in tsv_rows(aliases) {
            let err = |message: String| TableError::Parse { line, message };
            if cols.len() < 3 {
                return Err(err("expected name, alias, member".into()));
            }
            let vs = sets
                .get_mut(cols[0])
                .ok_or_else(|| err(format!("unknown value set {:?}", cols[0])))?;
            if !vs.contains(cols[2]) {
                return Err(err(format!("alias target {:?} is not a member", cols[2])));
            }
            vs.aliases.push((cols[1].to_string(), cols[2].to_string()));
        }
        Ok(ValueSets { sets })
    }

    pub fn get(&self, name: &str) -> Option<&ValueSet> {
        self.sets.get(name)
    }

    /// Panics on an unknown name; for the fixed sets the pipeline relies on.
    pub fn expect(&self, name: &str) -> &ValueSet {
        self.get(name)
            .unwrap_or_else(|| panic!("value set {name} missing from data directory"))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ValueSet> {
        self.sets.values()
    }
}

fn is_placeholder(norm: &str) -> bool {
    matches!(
        norm,
        "" | "nan" | "none documented" | "not documented" | "n a" | "na" | "null"
    )
}

/// Maps raw text onto a value-set member, "Other", or "Not Documented".
pub fn normalize_categorical(raw: &str, vs: &ValueSet) -> String {
    let norm = normalize_term(raw);
    if is_placeholder(&norm) {
        return NOT_DOCUMENTED.to_string();
    }
    if let Some(m) = vs.members.iter().find(|m| normalize_term(m) == norm) {
        return m.clone();
    }
    if let Some((_, m)) = vs.aliases.iter().find(|(a, _)| normalize_term(a) == norm) {
        return m.clone();
    }
    if norm == "other" {
        return other_of(vs);
    }
    let toks = tokens(&norm);
    let mut best: Option<(&str, f64)> = None;
    let candidates = vs
        .members
        .iter()
        .map(|m| (m.as_str(), m.as_str()))
        .chain(vs.aliases.iter().map(|(a, m)| (a.as_str(), m.as_str())));
    for (name, member) in candidates {
        if member == NOT_DOCUMENTED || normalize_term(member) == "other" {
            continue;
        }
        let n = normalize_term(name);
        let score = jaccard(&toks, &tokens(&n));
        if score >= MATCH_THRESHOLD {
            let better = match best {
                None => true,
                Some((cur, s)) => {
                    score > s || (score == s && member_rank(vs, member) < member_rank(vs, cur))
                }
            };
            if better {
                best = Some((member, score));
            }
        }
    }
    best.map(|(m, _)| m.to_string())
        .unwrap_or_else(|| other_of(vs))
}

/// The set's own spelling of "other" (gender uses lower case), else the sentinel.
fn other_of(vs: &ValueSet) -> String {
    vs.members
        .iter()
        .find(|m| normalize_term(m) == "other")
        .cloned()
        .unwrap_or_else(|| OTHER.to_string())
}

fn member_rank(vs: &ValueSet, member: &str) -> usize {
    vs.members
        .iter()
        .position(|m| m == member)
        .unwrap_or(usize::MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TnmAxis {
    T,
    N,
    M,
}

impl TnmAxis {
    pub fn letter(&self) -> char {
        match self {
            TnmAxis::T => 'T',
            TnmAxis::N => 'N',
            TnmAxis::M => 'M',
        }
    }

    pub fn value_set_name(&self) -> &'static str {
        match self {
            TnmAxis::T => "tnm_t",
            TnmAxis::N => "tnm_n",
            TnmAxis::M => "tnm_m",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TnmValue {
    pub value: String,
    /// Trailing qualifier split off the raw token, e.g. "sn" from "pN0(sn)".
    pub annotation: Option<String>,
}

const TNM_PREFIXES: [&str; 8] = ["yp", "yc", "rp", "p", "c", "y", "r", "a"];

/// Normalizes a raw TNM token for one axis against that axis' value set.
pub fn normalize_tnm(raw: &str, axis: TnmAxis, vs: &ValueSet) -> TnmValue {
    let plain = |value: &str| TnmValue {
        value: value.to_string(),
        annotation: None,
    };
    let s = raw.trim();
    let norm = normalize_term(s);
    if is_placeholder(&norm) {
        return plain(NOT_DOCUMENTED);
    }
    if norm == "other" {
        return plain(OTHER);
    }
    let letter = axis.letter();
    let starts_axis = |t: &str| t.chars().next().is_some_and(|c| c.to_ascii_uppercase() == letter);
    let mut body = s;
    if !starts_axis(body) {
        if let Some(rest) = TNM_PREFIXES
            .iter()
            .find_map(|p| body.strip_prefix(p).filter(|r| starts_axis(r)))
        {
            body = rest;
        }
    }
    if body.eq_ignore_ascii_case(&letter.to_string()) {
        return plain(NOT_DOCUMENTED);
    }
    let find = |t: &str| vs.members.iter().find(|m| m.eq_ignore_ascii_case(t));
    if let Some(m) = find(body) {
        return plain(m);
    }
    if let Some(open) = body.find('(') {
        if body.ends_with(')') {
            let (base, qual) = (&body[..open], &body[open + 1..body.len() - 1]);
            if let Some(m) = find(base) {
                return TnmValue {
                    value: m.clone(),
                    annotation: (!qual.is_empty()).then(|| qual.to_string()),
                };
            }
        }
    }
    plain(OTHER)
}
