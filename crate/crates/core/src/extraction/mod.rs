//! Free text to [`ClinicalVariables`]: preprocessing, section segmentation, lexicon extraction,
//! and the backend contract that external extractors also implement.

mod dates;
mod entities;
mod preprocess;
mod segment;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::fhir::DateOrInstant;
use crate::terminology::{normalize_categorical, normalize_term, normalize_tnm, TnmAxis, NOT_DOCUMENTED};

pub use dates::{find_dates, parse_date};
pub use entities::extract_entities;
pub use preprocess::preprocess;
pub use segment::{segment_sections, Piece, Section, SectionedNote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    ClinicalNote,
    PdfText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawNote {
    pub text: String,
    pub source_kind: SourceKind,
    pub note_date: Option<DateOrInstant>,
}

impl RawNote {
    pub fn new(text: impl Into<String>) -> Self {
        RawNote {
            text: text.into(),
            source_kind: SourceKind::ClinicalNote,
            note_date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("note is empty after preprocessing")]
    EmptyNote,
    #[error("extractor backend failed: {0}")]
    BackendFailure(String),
}

fn not_documented() -> String {
    NOT_DOCUMENTED.to_string()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiagnosisTerm {
    pub term: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MedicationItem {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dosage_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProcedureItem {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<DateOrInstant>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AllergyItem {
    pub substance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObservationItem {
    pub name: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<DateOrInstant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Demographics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default = "not_documented")]
    pub gender: String,
    #[serde(default = "not_documented")]
    pub marital_status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mrn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth_date: Option<DateOrInstant>,
}

impl Default for Demographics {
    fn default() -> Self {
        Demographics {
            age: None,
            gender: not_documented(),
            marital_status: not_documented(),
            name: None,
            mrn: None,
            birth_date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpecimenInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viability: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collected: Option<DateOrInstant>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabPanel {
    /// Normalized keyword that triggered panel detection.
    pub keyword: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collected: Option<DateOrInstant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issued: Option<DateOrInstant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performer: Option<String>,
    /// ICD-10 code given as the clinical indication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indication: Option<String>,
}

/// Structured extraction output; every categorical holds a value-set member,
/// "Other", or "Not Documented".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ClinicalVariables {
    pub cancer_diagnosis: Vec<DiagnosisTerm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnosis_date: Option<DateOrInstant>,
    pub metastasis_indication: String,
    pub metastasis_sites: Vec<String>,
    pub tnm_t: String,
    pub tnm_n: String,
    pub tnm_m: String,
    /// Axis letter to qualifier, e.g. "N" to "sn".
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub tnm_annotations: BTreeMap<String, String>,
    pub numerical_stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histology: Option<String>,
    pub histology_grade: String,
    pub laterality: String,
    pub disease_status: String,
    pub medications: Vec<MedicationItem>,
    pub procedures: Vec<ProcedureItem>,
    pub allergies: Vec<AllergyItem>,
    pub observations: Vec<ObservationItem>,
    pub demographics: Demographics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note_date: Option<DateOrInstant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specimen: Option<SpecimenInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lab_panel: Option<LabPanel>,
}

impl Default for ClinicalVariables {
    fn default() -> Self {
        ClinicalVariables {
            cancer_diagnosis: Vec::new(),
            diagnosis_date: None,
            metastasis_indication: not_documented(),
            metastasis_sites: Vec::new(),
            tnm_t: not_documented(),
            tnm_n: not_documented(),
            tnm_m: not_documented(),
            tnm_annotations: BTreeMap::new(),
            numerical_stage: not_documented(),
            histology: None,
            histology_grade: not_documented(),
            laterality: not_documented(),
            disease_status: not_documented(),
            medications: Vec::new(),
            procedures: Vec::new(),
            allergies: Vec::new(),
            observations: Vec::new(),
            demographics: Demographics::default(),
            note_date: None,
            specimen: None,
            lab_panel: None,
        }
    }
}

impl ClinicalVariables {
    pub fn to_json(&self) -> String {
        crate::fhir::to_pretty(&serde_json::to_value(self).expect("variables serialize"))
    }

    pub fn from_json(text: &str) -> Result<ClinicalVariables, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| format!("{}: {}", e.path(), e.inner()))
    }

    /// Checks the categorical invariants against the catalog's value sets.
    pub fn check(&self, cat: &Catalog) -> Result<(), String> {
        let vs = &cat.value_sets;
        let ok = |name: &str, v: &str| {
            v == NOT_DOCUMENTED || v == crate::terminology::OTHER || vs.expect(name).contains(v)
        };
        let fields = [
            ("metastasis_indication", "metastasisIndication", &self.metastasis_indication),
            ("tnm_t", "tnmT", &self.tnm_t),
            ("tnm_n", "tnmN", &self.tnm_n),
            ("tnm_m", "tnmM", &self.tnm_m),
            ("numerical_stage", "numericalStage", &self.numerical_stage),
            ("histology_grade", "histologyGrade", &self.histology_grade),
            ("laterality", "laterality", &self.laterality),
            ("disease_status", "diseaseStatus", &self.disease_status),
            ("administrative_gender", "demographics.gender", &self.demographics.gender),
            ("marital_status", "demographics.maritalStatus", &self.demographics.marital_status),
        ];
        for (set, field, value) in fields {
            if !ok(set, value) {
                return Err(format!("{field}: {value:?} is not in {set}"));
            }
        }
        for s in &self.metastasis_sites {
            if !ok("metastasis_site", s) {
                return Err(format!("metastasisSites: {s:?} is not in metastasis_site"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorDescriptor {
    pub name: String,
    pub version: String,
    pub deterministic: bool,
}

/// A backend turning a note into clinical variables.
pub trait Extractor: Send + Sync {
    fn descriptor(&self) -> ExtractorDescriptor;
    fn extract(&self, note: &RawNote) -> Result<ClinicalVariables, ExtractError>;
}

/// Lexicon and pattern extractor driven entirely by the catalog tables.
#[derive(Debug, Clone, Copy)]
pub struct BaselineExtractor<'a> {
    pub catalog: &'a Catalog,
}

impl<'a> BaselineExtractor<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        BaselineExtractor { catalog }
    }
}

impl Extractor for BaselineExtractor<'_> {
    fn descriptor(&self) -> ExtractorDescriptor {
        ExtractorDescriptor {
            name: "baseline-lexicon".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            deterministic: true,
        }
    }

    fn extract(&self, note: &RawNote) -> Result<ClinicalVariables, ExtractError> {
        let clean = preprocess(self.catalog, note)?;
        let sectioned = segment_sections(self.catalog, &clean);
        let mut v = extract_entities(self.catalog, &sectioned);
        if v.note_date.is_none() {
            v.note_date = note.note_date;
        }
        Ok(v)
    }
}

/// Runs a backend and re-normalizes its output so it always satisfies the invariants.
pub fn run_extractor(
    cat: &Catalog,
    x: &dyn Extractor,
    note: &RawNote,
) -> Result<ClinicalVariables, ExtractError> {
    let v = x.extract(note)?;
    Ok(sanitize(cat, v))
}

fn dedup_keep_order(items: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Pushes every categorical through its value set; idempotent.
pub fn sanitize(cat: &Catalog, mut v: ClinicalVariables) -> ClinicalVariables {
    let vs = &cat.value_sets;
    let cat_norm = |name: &str, raw: &str| normalize_categorical(raw, vs.expect(name));
    for (axis, field) in [
        (TnmAxis::T, &mut v.tnm_t),
        (TnmAxis::N, &mut v.tnm_n),
        (TnmAxis::M, &mut v.tnm_m),
    ] {
        let n = normalize_tnm(field, axis, vs.expect(axis.value_set_name()));
        if let Some(a) = n.annotation {
            v.tnm_annotations.entry(axis.letter().to_string()).or_insert(a);
        }
        *field = n.value;
    }
    v.tnm_annotations
        .retain(|k, a| matches!(k.as_str(), "T" | "N" | "M") && !a.trim().is_empty());
    v.numerical_stage = cat_norm("numerical_stage", &v.numerical_stage);
    v.histology_grade = cat_norm("histology_grade", &v.histology_grade);
    v.laterality = cat_norm("laterality", &v.laterality);
    v.disease_status = cat_norm("disease_status", &v.disease_status);
    v.metastasis_indication = cat_norm("metastasis_indication", &v.metastasis_indication);
    v.demographics.gender = cat_norm("administrative_gender", &v.demographics.gender);
    v.demographics.marital_status = cat_norm("marital_status", &v.demographics.marital_status);
    let sites = std::mem::take(&mut v.metastasis_sites)
        .iter()
        .map(|s| cat_norm("metastasis_site", s))
        .filter(|s| s != NOT_DOCUMENTED)
        .collect();
    v.metastasis_sites = dedup_keep_order(sites);
    v.cancer_diagnosis.retain(|d| {
        let n = normalize_term(&d.term);
        !n.is_empty() && normalize_categorical(&n, vs.expect("cancer_diagnosis")) != NOT_DOCUMENTED
    });
    v.medications.retain(|m| !m.name.trim().is_empty());
    v.procedures.retain(|p| !p.name.trim().is_empty());
    v.allergies.retain(|a| !a.substance.trim().is_empty());
    v.observations.retain(|o| !o.name.trim().is_empty());
    v
}
