//! Clinical-trial registry: newline-delimited records, filtering and pagination.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::terminology::normalize_term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recruitment {
    Recruiting,
    ActiveNotRecruiting,
    Completed,
    Suspended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "early_phase_1")]
    EarlyPhase1,
    #[serde(rename = "phase_1")]
    Phase1,
    #[serde(rename = "phase_1_2")]
    Phase1To2,
    #[serde(rename = "phase_2")]
    Phase2,
    #[serde(rename = "phase_2_3")]
    Phase2To3,
    #[serde(rename = "phase_3")]
    Phase3,
    #[serde(rename = "phase_4")]
    Phase4,
    #[serde(rename = "na")]
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyType {
    Interventional,
    Observational,
}

/// Parses a wire name such as `phase_1_2` through the serde representation.
fn from_wire<T: for<'de> Deserialize<'de>>(s: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
}

fn to_wire<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enums serialize to strings"),
    }
}

impl Recruitment {
    pub const ALL: [Recruitment; 4] = [
        Recruitment::Recruiting,
        Recruitment::ActiveNotRecruiting,
        Recruitment::Completed,
        Recruitment::Suspended,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        from_wire(s)
    }

    pub fn as_str(&self) -> String {
        to_wire(self)
    }
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::EarlyPhase1,
        Phase::Phase1,
        Phase::Phase1To2,
        Phase::Phase2,
        Phase::Phase2To3,
        Phase::Phase3,
        Phase::Phase4,
        Phase::NotApplicable,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        from_wire(s)
    }

    pub fn as_str(&self) -> String {
        to_wire(self)
    }

    /// Code in the HL7 research-study-phase code system.
    pub fn fhir_code(&self) -> &'static str {
        match self {
            Phase::EarlyPhase1 => "early-phase-1",
            Phase::Phase1 => "phase-1",
            Phase::Phase1To2 => "phase-1-phase-2",
            Phase::Phase2 => "phase-2",
            Phase::Phase2To3 => "phase-2-phase-3",
            Phase::Phase3 => "phase-3",
            Phase::Phase4 => "phase-4",
            Phase::NotApplicable => "n-a",
        }
    }
}

impl StudyType {
    pub const ALL: [StudyType; 2] = [StudyType::Interventional, StudyType::Observational];

    pub fn parse(s: &str) -> Option<Self> {
        from_wire(s)
    }

    pub fn as_str(&self) -> String {
        to_wire(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Inclusion,
    Exclusion,
}

/// PatientFacts field a criterion reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Field {
    Diagnosis,
    Stage,
    TnmT,
    TnmN,
    TnmM,
    Biomarker,
    PriorTherapy,
    MetastasisSite,
    HistologyGrade,
    Laterality,
    DiseaseStatus,
    Age,
    Gender,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Equals,
    InSet,
    AtLeastStage,
    Has,
    Lacks,
    Ge,
    Le,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CriterionValue {
    Number(u32),
    Text(String),
    Set(Vec<String>),
}

impl CriterionValue {
    /// Text values as a one-element list, sets as themselves.
    pub fn terms(&self) -> Vec<&str> {
        match self {
            CriterionValue::Text(s) => vec![s.as_str()],
            CriterionValue::Set(v) => v.iter().map(String::as_str).collect(),
            CriterionValue::Number(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Criterion {
    pub kind: CriterionKind,
    pub field: Field,
    pub op: Op,
    pub value: CriterionValue,
    /// Biomarker name; required exactly when `field` is `biomarker`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biomarker: Option<String>,
    /// Eligibility wording shown to users.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Criterion {
    pub fn new(kind: CriterionKind, field: Field, op: Op, value: CriterionValue) -> Self {
        Criterion {
            kind,
            field,
            op,
            value,
            biomarker: None,
            text: None,
        }
    }

    /// Checks that the operator and value shape suit the field.
    pub fn check(&self) -> Result<(), String> {
        use Field::*;
        use Op::*;
        let ops: &[Op] = match self.field {
            Diagnosis | TnmT | TnmN | TnmM | HistologyGrade | Laterality | DiseaseStatus | Gender => {
                &[Equals, InSet]
            }
            Stage => &[Equals, InSet, AtLeastStage],
            Biomarker => &[Equals, InSet, Has, Lacks],
            PriorTherapy | MetastasisSite => &[Has, Lacks],
            Age => &[Ge, Le],
        };
        if !ops.contains(&self.op) {
            return Err(format!("operator {:?} does not apply to field {:?}", self.op, self.field));
        }
        match (&self.value, self.op) {
            (CriterionValue::Number(_), Ge | Le) => {}
            (_, Ge | Le) => return Err("age comparisons need a number".into()),
            (CriterionValue::Number(_), _) => return Err("only age comparisons take a number".into()),
            (CriterionValue::Set(s), _) if s.is_empty() => return Err("empty value set".into()),
            (CriterionValue::Text(s), _) if s.trim().is_empty() => return Err("empty value".into()),
            (CriterionValue::Text(_), InSet) => return Err("in_set needs a list value".into()),
            _ => {}
        }
        match (&self.biomarker, self.field) {
            (None, Field::Biomarker) => Err("biomarker criteria need a biomarker name".into()),
            (Some(_), f) if f != Field::Biomarker => Err("biomarker name on a non-biomarker field".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub name: String,
    #[serde(default)]
    pub criteria: Vec<Criterion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub trial_id: String,
    pub title: String,
    pub conditions: Vec<String>,
    pub recruitment: Recruitment,
    pub phase: Phase,
    pub study_type: StudyType,
    pub sponsor: String,
    pub description: String,
    pub cohorts: Vec<Cohort>,
}

impl TrialRecord {
    pub fn check(&self) -> Result<(), String> {
        if self.trial_id.trim().is_empty() {
            return Err("empty trialId".into());
        }
        if self.cohorts.is_empty() {
            return Err(format!("trial {} has no cohorts", self.trial_id));
        }
        for (i, c) in self.cohorts.iter().enumerate() {
            for (j, k) in c.criteria.iter().enumerate() {
                k.check().map_err(|e| format!("cohorts[{i}].criteria[{j}]: {e}"))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate trialId {id}")]
    DuplicateId { line: usize, id: String },
}

/// Immutable set of trials, kept in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    trials: Vec<TrialRecord>,
}

impl Registry {
    pub fn new(trials: Vec<TrialRecord>) -> Result<Registry, RegistryError> {
        let mut seen = BTreeSet::new();
        for (i, t) in trials.iter().enumerate() {
            t.check().map_err(|message| RegistryError::Parse { line: i + 1, message })?;
            if !seen.insert(t.trial_id.clone()) {
                return Err(RegistryError::DuplicateId {
                    line: i + 1,
                    id: t.trial_id.clone(),
                });
            }
        }
        Ok(Registry { trials })
    }

    pub fn parse_ndjson(text: &str) -> Result<Registry, RegistryError> {
        let mut trials = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let de = &mut serde_json::Deserializer::from_str(raw);
            let t: TrialRecord = serde_path_to_error::deserialize(de).map_err(|e| RegistryError::Parse {
                line,
                message: format!("{}: {}", e.path(), e.inner()),
            })?;
            t.check().map_err(|message| RegistryError::Parse { line, message })?;
            if !seen.insert(t.trial_id.clone()) {
                return Err(RegistryError::DuplicateId { line, id: t.trial_id });
            }
            trials.push(t);
        }
        Ok(Registry { trials })
    }

    pub fn load(path: &Path) -> Result<Registry, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Registry::parse_ndjson(&text)
    }

    /// Canonical form: one compact record per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            out.push_str(&serde_json::to_string(t).expect("trial records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), RegistryError> {
        std::fs::write(path, self.to_ndjson()).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TrialRecord> {
        self.trials.iter().find(|t| t.trial_id == id)
    }

    /// Conjunctive filter, sorted by trialId.
    pub fn filter(&self, f: &TrialFilter) -> Vec<&TrialRecord> {
        let mut out: Vec<&TrialRecord> = self.trials.iter().filter(|t| f.accepts(t)).collect();
        out.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrialFilter {
    pub recruitment: Option<Recruitment>,
    pub phase: Option<Phase>,
    pub study_type: Option<StudyType>,
    /// Matched word-wise against each listed condition.
    pub condition_term: Option<String>,
}

impl TrialFilter {
    pub fn accepts(&self, t: &TrialRecord) -> bool {
        self.recruitment.is_none_or(|r| t.recruitment == r)
            && self.phase.is_none_or(|p| t.phase == p)
            && self.study_type.is_none_or(|s| t.study_type == s)
            && self.condition_term.as_deref().is_none_or(|term| {
                let needle = format!(" {} ", normalize_term(term));
                t.conditions
                    .iter()
                    .any(|c| format!(" {} ", normalize_term(c)).contains(&needle))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub pages: usize,
    pub range_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0} must be at least 1")]
pub struct PageError(pub &'static str);

/// 1-based page of `items`; pages past the end are empty but keep the total.
pub fn paginate<T: Clone>(items: &[T], page: usize, page_size: usize) -> Result<Page<T>, PageError> {
    if page == 0 {
        return Err(PageError("page"));
    }
    if page_size == 0 {
        return Err(PageError("pageSize"));
    }
    let total = items.len();
    let start = (page - 1).saturating_mul(page_size);
    let slice: Vec<T> = if start < total {
        items[start..total.min(start + page_size)].to_vec()
    } else {
        Vec::new()
    };
    let range_label = if slice.is_empty() {
        format!("Showing 0-0 of {total}")
    } else {
        format!("Showing {}-{} of {total}", start + 1, start + slice.len())
    };
    Ok(Page {
        items: slice,
        page,
        page_size,
        total,
        pages: total.div_ceil(page_size),
        range_label,
    })
}
