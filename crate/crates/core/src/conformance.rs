//! Profile validation and accuracy metrics against gold annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::Catalog;
use crate::extraction::ClinicalVariables;
use crate::fhir::{
    all_codings, check_invariants, resource_to_value, Bundle, IssueSeverity, OperationOutcome,
    OutcomeIssue, Resource, ResourceType,
};
use crate::mcode::{profile_uri, to_mcode_bundle, McodeDomain, PROFILE_PREFIX};
use crate::terminology::{tsv_rows, CodeSystemId, TableError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    /// Dotted element path, e.g. `stage.summary`.
    pub path: String,
    pub min: u32,
    /// `None` is unbounded.
    pub max: Option<u32>,
    pub binding: Option<String>,
    pub fixed_system: Option<CodeSystemId>,
}

impl Constraint {
    pub fn cardinality(&self) -> String {
        match self.max {
            Some(m) => format!("{}..{}", self.min, m),
            None => format!("{}..*", self.min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileDefinition {
    pub name: String,
    pub uri: String,
    pub domain: McodeDomain,
    pub base: ResourceType,
    pub constraints: Vec<Constraint>,
}

/// Element paths a constraint may name, per base type.
fn known_paths(t: ResourceType) -> &'static [&'static str] {
    match t {
        ResourceType::Patient => &["identifier", "name", "gender", "birthDate", "maritalStatus"],
        ResourceType::Condition => &[
            "clinicalStatus",
            "verificationStatus",
            "code",
            "bodySite",
            "subject",
            "onsetDateTime",
            "stage",
            "stage.summary",
            "stage.assessment",
            "stage.type",
        ],
        ResourceType::Observation => &[
            "status",
            "category",
            "code",
            "subject",
            "effectiveDateTime",
            "valueString",
            "valueCodeableConcept",
            "specimen",
        ],
        ResourceType::MedicationRequest => &[
            "status",
            "intent",
            "medicationCodeableConcept",
            "subject",
            "dosageInstruction",
        ],
        ResourceType::Procedure => &["status", "code", "subject", "performedDateTime"],
        ResourceType::Specimen => &["type", "subject", "collection", "collection.collectedDateTime", "note"],
        ResourceType::DiagnosticReport => &[
            "status",
            "category",
            "code",
            "subject",
            "effectiveDateTime",
            "issued",
            "performer",
            "specimen",
            "result",
        ],
        ResourceType::AllergyIntolerance => &["code", "patient", "reaction"],
        ResourceType::ResearchStudy => &["identifier", "title", "status", "phase", "category", "condition"],
        ResourceType::OperationOutcome => &["issue"],
    }
}

impl ProfileDefinition {
    /// Rows: profile, domain, base type, path, min, max, binding, fixed system; '-' is empty.
    pub fn parse_tsv(text: &str) -> Result<Vec<ProfileDefinition>, TableError> {
        let mut out: Vec<ProfileDefinition> = Vec::new();
        for (line, cols) in tsv_rows(text) {
            let err = |message: String| TableError::Parse { line, message };
            if cols.len() != 8 {
                return Err(err(format!("expected 8 columns, found {}", cols.len())));
            }
            let opt = |s: &str| (s != "-" && !s.is_empty()).then(|| s.to_string());
            let domain = McodeDomain::parse(cols[1]).ok_or_else(|| err(format!("unknown domain {:?}", cols[1])))?;
            let base = ResourceType::parse(cols[2]).ok_or_else(|| err(format!("unknown resource type {:?}", cols[2])))?;
            let path = cols[3].to_string();
            if !known_paths(base).contains(&path.as_str()) {
                return Err(err(format!("{path:?} is not an element of {base}")));
            }
            let min: u32 = cols[4].parse().map_err(|_| err(format!("bad min {:?}", cols[4])))?;
            let max = match cols[5] {
                "*" => None,
                m => Some(m.parse::<u32>().map_err(|_| err(format!("bad max {m:?}")))?),
            };
            if max.is_some_and(|m| m < min) {
                return Err(err(format!("min {min} exceeds max")));
            }
            let fixed_system = match opt(cols[7]) {
                Some(s) => Some(CodeSystemId::parse(&s).ok_or_else(|| err(format!("unknown code system {s:?}")))?),
                None => None,
            };
            let c = Constraint {
                path,
                min,
                max,
                binding: opt(cols[6]),
                fixed_system,
            };
            match out.iter_mut().find(|p| p.name == cols[0]) {
                Some(p) if p.domain != domain || p.base != base => {
                    return Err(err(format!("profile {} redeclared with a different domain or base", cols[0])));
                }
                Some(p) => p.constraints.push(c),
                None => out.push(ProfileDefinition {
                    name: cols[0].to_string(),
                    uri: profile_uri(cols[0]),
                    domain,
                    base,
                    constraints: vec![c],
                }),
            }
        }
        Ok(out)
    }

    pub fn required_paths(&self) -> impl Iterator<Item = &str> {
        self.constraints.iter().filter(|c| c.min > 0).map(|c| c.path.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub path: String,
    pub rule: String,
    pub severity: Severity,
    pub message: String,
}

impl ValidationIssue {
    fn error(path: &str, rule: &str, message: String) -> Self {
        ValidationIssue {
            path: path.to_string(),
            rule: rule.to_string(),
            severity: Severity::Error,
            message,
        }
    }

    fn warning(path: &str, rule: &str, message: String) -> Self {
        ValidationIssue {
            severity: Severity::Warning,
            ..ValidationIssue::error(path, rule, message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConformanceError {
    #[error("profile {profile} applies to {expected}, not {found}")]
    TypeMismatch {
        profile: String,
        expected: ResourceType,
        found: ResourceType,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{0}")]
    Corpus(String),
}

/// Values reached by a dotted path; arrays are flattened at every step.
fn select<'a>(root: &'a Value, path: &str) -> Vec<&'a Value> {
    let mut nodes = vec![root];
    for seg in path.split('.') {
        let mut next = Vec::new();
        for n in nodes {
            match n.get(seg) {
                Some(Value::Array(items)) => next.extend(items.iter()),
                Some(Value::Null) | None => {}
                Some(v) => next.push(v),
            }
        }
        nodes = next;
    }
    nodes
}

/// Codes, displays and text of a concept, or the string itself.
fn binding_tokens(v: &Value) -> Vec<&str> {
    match v {
        Value::String(s) => vec![s.as_str()],
        Value::Object(o) => {
            let mut out = Vec::new();
            if let Some(Value::Array(codings)) = o.get("coding") {
                for c in codings {
                    for k in ["code", "display"] {
                        if let Some(Value::String(s)) = c.get(k) {
                            out.push(s.as_str());
                        }
                    }
                }
            }
            if let Some(Value::String(t)) = o.get("text") {
                out.push(t.as_str());
            }
            out
        }
        _ => Vec::new(),
    }
}

/// Checks one resource against one profile; the issue list is sorted by path, then rule.
pub fn validate(
    cat: &Catalog,
    r: &Resource,
    p: &ProfileDefinition,
) -> Result<Vec<ValidationIssue>, ConformanceError> {
    if r.resource_type() != p.base {
        return Err(ConformanceError::TypeMismatch {
            profile: p.name.clone(),
            expected: p.base,
            found: r.resource_type(),
        });
    }
    let root = resource_to_value(r);
    let mut issues = Vec::new();
    for c in &p.constraints {
        let found = select(&root, &c.path);
        let n = found.len() as u32;
        if n < c.min || c.max.is_some_and(|m| n > m) {
            issues.push(ValidationIssue::error(
                &c.path,
                "cardinality",
                format!("expected {} occurrences, found {n}", c.cardinality()),
            ));
        }
        if let Some(vs_name) = &c.binding {
            let vs = cat.value_sets.get(vs_name);
            for v in &found {
                let tokens = binding_tokens(v);
                if !vs.is_some_and(|vs| tokens.iter().any(|t| vs.contains(t))) {
                    issues.push(ValidationIssue::error(
                        &c.path,
                        "binding",
                        format!("value {tokens:?} is not in value set {vs_name}"),
                    ));
                }
            }
        }
        if let Some(sys) = c.fixed_system {
            for v in &found {
                let codings = v.get("coding").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]);
                for coding in codings {
                    let s = coding.get("system").and_then(Value::as_str).unwrap_or("");
                    if s != sys.uri() {
                        issues.push(ValidationIssue::error(
                            &c.path,
                            "fixed-system",
                            format!("coding system {s:?} is not {}", sys.uri()),
                        ));
                    }
                }
            }
        }
    }
    issues.sort();
    Ok(issues)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryReport {
    pub index: usize,
    #[serde(rename = "resourceType")]
    pub resource_type: String,
    pub id: String,
    pub profiles: Vec<String>,
    pub issues: Vec<ValidationIssue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub conformant: bool,
    pub entries: Vec<EntryReport>,
    /// Closure and identity problems of the bundle as a whole.
    #[serde(rename = "bundleIssues")]
    pub bundle_issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn error_count(&self) -> usize {
        self.all_issues().filter(|(_, i)| i.severity == Severity::Error).count()
    }

    pub fn warning_count(&self) -> usize {
        self.all_issues().filter(|(_, i)| i.severity == Severity::Warning).count()
    }

    /// Issues with paths prefixed by their entry position.
    pub fn all_issues(&self) -> impl Iterator<Item = (String, &ValidationIssue)> {
        self.bundle_issues.iter().map(|i| (i.path.clone(), i)).chain(
            self.entries
                .iter()
                .flat_map(|e| e.issues.iter().map(move |i| (format!("entry[{}].resource.{}", e.index, i.path), i))),
        )
    }

    pub fn to_operation_outcome(&self) -> OperationOutcome {
        let issue = self
            .all_issues()
            .map(|(path, i)| OutcomeIssue {
                severity: match i.severity {
                    Severity::Error => IssueSeverity::Error,
                    Severity::Warning => IssueSeverity::Warning,
                },
                code: match i.rule.as_str() {
                    "cardinality" => "required",
                    "binding" | "fixed-system" => "code-invalid",
                    "closure" => "not-found",
                    "duplicate" => "duplicate",
                    "schema" => "structure",
                    _ => "informational",
                }
                .to_string(),
                diagnostics: Some(format!("{}: {}", i.rule, i.message)),
                expression: vec![path],
                extras: Default::default(),
            })
            .collect();
        OperationOutcome {
            id: "validation".into(),
            issue,
            ..Default::default()
        }
    }
}

/// Validates each entry against the profiles it is tagged with, then checks the bundle.
pub fn validate_bundle(cat: &Catalog, b: &Bundle, profiles: &[ProfileDefinition]) -> ValidationReport {
    let mut entries = Vec::new();
    for (index, r) in b.entries.iter().enumerate() {
        let mut issues = Vec::new();
        if let Err((path, message)) = check_invariants(r) {
            issues.push(ValidationIssue::error(&path, "schema", message));
        }
        let tags: Vec<&String> = r.profiles().iter().filter(|p| p.starts_with(PROFILE_PREFIX)).collect();
        if tags.is_empty() && profiles.iter().any(|p| p.base == r.resource_type()) {
            issues.push(ValidationIssue::warning("meta.profile", "profile-tag", "no profile tag".into()));
        }
        for tag in &tags {
            match profiles.iter().find(|p| &p.uri == *tag) {
                None => issues.push(ValidationIssue::warning(
                    "meta.profile",
                    "profile-tag",
                    format!("unknown profile {tag}"),
                )),
                Some(p) => match validate(cat, r, p) {
                    Ok(found) => issues.extend(found),
                    Err(e) => issues.push(ValidationIssue::error("meta.profile", "profile-tag", e.to_string())),
                },
            }
        }
        issues.sort();
        entries.push(EntryReport {
            index,
            resource_type: r.resource_type().to_string(),
            id: r.id().to_string(),
            profiles: tags.iter().map(|t| t.to_string()).collect(),
            issues,
        });
    }
    let mut bundle_issues = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, r) in b.entries.iter().enumerate() {
        if !seen.insert((r.resource_type(), r.id())) {
            bundle_issues.push(ValidationIssue::error(
                &format!("entry[{i}].resource.id"),
                "duplicate",
                format!("duplicate resource id {}/{}", r.resource_type(), r.id()),
            ));
        }
    }
    if let Some((path, target)) = b.closure_violation() {
        bundle_issues.push(ValidationIssue::error(&path, "closure", format!("dangling reference {target}")));
    }
    let mut report = ValidationReport {
        conformant: false,
        entries,
        bundle_issues,
    };
    report.conformant = report.error_count() == 0;
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpectedCode {
    pub system: String,
    pub code: String,
    /// How often the test occurs in the source data.
    pub weight: u64,
    /// Label the original annotation carried, when it differs from the gold code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldAnnotation {
    pub note_id: String,
    pub expected: ClinicalVariables,
    pub expected_codes: Vec<ExpectedCode>,
    #[serde(default)]
    pub tags: Vec<String>,
    /// True when every expected term is in the shipped lexicon.
    #[serde(default = "yes")]
    pub lexicon_covered: bool,
}

fn yes() -> bool {
    true
}

impl GoldAnnotation {
    pub fn from_json(text: &str) -> Result<GoldAnnotation, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let g: GoldAnnotation =
            serde_path_to_error::deserialize(de).map_err(|e| format!("{}: {}", e.path(), e.inner()))?;
        for (i, c) in g.expected_codes.iter().enumerate() {
            if CodeSystemId::parse(&c.system).is_none() {
                return Err(format!("expectedCodes[{i}].system: unknown code system {:?}", c.system));
            }
            if c.weight == 0 {
                return Err(format!("expectedCodes[{i}].weight: must be positive"));
            }
        }
        Ok(g)
    }

    pub fn system(c: &ExpectedCode) -> CodeSystemId {
        CodeSystemId::parse(&c.system).expect("validated on load")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusNote {
    pub id: String,
    pub text: String,
    pub gold: GoldAnnotation,
}

/// Reads `<dir>/<noteId>/{note.txt,gold.json}` in directory-name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusNote>, ConformanceError> {
    let io = |p: &Path, e: std::io::Error| ConformanceError::Corpus(format!("{}: {e}", p.display()));
    let mut dirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("note.txt").is_file())
        .collect();
    dirs.sort();
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for d in dirs {
        let text = std::fs::read_to_string(d.join("note.txt")).map_err(|e| io(&d, e))?;
        let gold_path = d.join("gold.json");
        let gold_text = std::fs::read_to_string(&gold_path).map_err(|e| io(&gold_path, e))?;
        let gold = GoldAnnotation::from_json(&gold_text)
            .map_err(|e| ConformanceError::Corpus(format!("{}: {e}", gold_path.display())))?;
        if !ids.insert(gold.note_id.clone()) {
            return Err(ConformanceError::Corpus(format!("duplicate noteId {}", gold.note_id)));
        }
        let id = d.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.push(CorpusNote { id, text, gold });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub notes: usize,
    pub per_system_accuracy: BTreeMap<CodeSystemId, Ratio<u64>>,
    pub conformance_rate: Ratio<u64>,
    /// Over tests whose original label was not reproduced; absent when there are none.
    pub disagreement_accuracy: Option<Ratio<u64>>,
}

fn fraction(r: &Ratio<u64>) -> Value {
    json!({
        "fraction": format!("{}/{}", r.numer(), r.denom()),
        "value": *r.numer() as f64 / *r.denom() as f64,
    })
}

impl MetricsReport {
    pub fn to_value(&self) -> Value {
        let per: serde_json::Map<String, Value> = self
            .per_system_accuracy
            .iter()
            .map(|(s, r)| (s.label().to_string(), fraction(r)))
            .collect();
        json!({
            "notes": self.notes,
            "perSystemAccuracy": per,
            "conformanceRate": fraction(&self.conformance_rate),
            "disagreementAccuracy": self.disagreement_accuracy.as_ref().map(fraction),
        })
    }
}

/// Scores predictions against gold annotations, in noteId order.
///
/// A test counts as correct when the bundle built from the prediction carries the gold
/// (system, code) pair. Conformance is judged on the mCODE-tagged bundle.
pub fn score(
    cat: &Catalog,
    corpus: &[(ClinicalVariables, GoldAnnotation)],
) -> Result<MetricsReport, ConformanceError> {
    if corpus.is_empty() {
        return Err(ConformanceError::EmptyCorpus);
    }
    let mut order: Vec<&(ClinicalVariables, GoldAnnotation)> = corpus.iter().collect();
    order.sort_by(|a, b| a.1.note_id.cmp(&b.1.note_id));
    let mut hits: BTreeMap<CodeSystemId, (u64, u64)> = BTreeMap::new();
    let mut disagreement = (0u64, 0u64);
    let mut conformant = 0u64;
    for (pred, gold) in order {
        let bundle = crate::builder::build_bundle(cat, pred);
        let tagged = to_mcode_bundle(cat, &bundle).bundle;
        if validate_bundle(cat, &tagged, &cat.profiles).conformant {
            conformant += 1;
        }
        let emitted: BTreeSet<(&str, &str)> = tagged
            .entries
            .iter()
            .flat_map(all_codings)
            .map(|c| (c.system.as_str(), c.code.as_str()))
            .collect();
        for t in &gold.expected_codes {
            let sys = GoldAnnotation::system(t);
            let ok = emitted.contains(&(sys.uri(), t.code.as_str()));
            let e = hits.entry(sys).or_default();
            e.1 += t.weight;
            if ok {
                e.0 += t.weight;
            }
            if let Some(orig) = &t.original {
                if !emitted.contains(&(sys.uri(), orig.as_str())) {
                    disagreement.1 += t.weight;
                    if ok {
                        disagreement.0 += t.weight;
                    }
                }
            }
        }
    }
    Ok(MetricsReport {
        notes: corpus.len(),
        per_system_accuracy: hits.into_iter().map(|(s, (n, d))| (s, Ratio::new(n, d))).collect(),
        conformance_rate: Ratio::new(conformant, corpus.len() as u64),
        disagreement_accuracy: (disagreement.1 > 0).then(|| Ratio::new(disagreement.0, disagreement.1)),
    })
}
