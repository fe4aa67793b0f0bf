//! Six-domain mCODE tagging: profile assignment and oncology extensions.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::fhir::{Bundle, Extension, Meta, Observation, Resource, ResourceType};
use crate::terminology::{normalize_term, CodeSystemId};

pub const PROFILE_PREFIX: &str = "urn:onco:mcode:";
pub const GENOMICS_EXTENSION: &str = "urn:onco:extension:genomics";

/// LOINC codes of the TNM category and stage-group observations.
pub const TNM_T_CODE: &str = "21905-5";
pub const TNM_N_CODE: &str = "21906-3";
pub const TNM_M_CODE: &str = "21907-1";
pub const STAGE_GROUP_CODE: &str = "21908-9";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum McodeDomain {
    Patient,
    Disease,
    LabVital,
    Genomics,
    Treatment,
    Outcome,
}

impl McodeDomain {
    pub const ALL: [McodeDomain; 6] = [
        McodeDomain::Patient,
        McodeDomain::Disease,
        McodeDomain::LabVital,
        McodeDomain::Genomics,
        McodeDomain::Treatment,
        McodeDomain::Outcome,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            McodeDomain::Patient => "Patient",
            McodeDomain::Disease => "Disease",
            McodeDomain::LabVital => "LabVital",
            McodeDomain::Genomics => "Genomics",
            McodeDomain::Treatment => "Treatment",
            McodeDomain::Outcome => "Outcome",
        }
    }

    pub fn parse(s: &str) -> Option<McodeDomain> {
        McodeDomain::ALL.iter().copied().find(|d| d.as_str() == s)
    }
}

impl std::fmt::Display for McodeDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum McodeError {
    #[error("{0} has no mCODE profile")]
    UnsupportedType(ResourceType),
}

pub fn profile_uri(name: &str) -> String {
    format!("{PROFILE_PREFIX}{name}")
}

fn loinc_codes(o: &Observation) -> impl Iterator<Item = &str> {
    o.code
        .iter()
        .flat_map(|c| c.codings.iter())
        .filter(|c| CodeSystemId::from_uri(&c.system) == Some(CodeSystemId::Loinc))
        .map(|c| c.code.as_str())
}

fn tnm_profile(code: &str) -> Option<&'static str> {
    match code {
        TNM_T_CODE => Some("TNMPrimaryTumorCategory"),
        TNM_N_CODE => Some("TNMRegionalNodesCategory"),
        TNM_M_CODE => Some("TNMDistantMetastasesCategory"),
        STAGE_GROUP_CODE => Some("TNMStageGroup"),
        _ => None,
    }
}

/// Profile name and domain for a resource.
pub fn classify(cat: &Catalog, r: &Resource) -> Result<(&'static str, McodeDomain), McodeError> {
    use McodeDomain::*;
    Ok(match r {
        Resource::Patient(_) => ("CancerPatient", Patient),
        Resource::AllergyIntolerance(_) => ("PatientAllergyIntolerance", Patient),
        Resource::Condition(_) => ("PrimaryCancerCondition", Disease),
        Resource::Observation(o) => {
            let codes: Vec<&str> = loinc_codes(o).collect();
            if let Some(p) = codes.iter().find_map(|c| tnm_profile(c)) {
                (p, Disease)
            } else if codes.iter().any(|c| cat.biomarker_for(CodeSystemId::Loinc, c).is_some()) {
                ("TumorMarkerTest", Genomics)
            } else if codes.iter().any(|c| cat.is_disease_status_code(CodeSystemId::Loinc, c)) {
                ("CancerDiseaseStatus", Outcome)
            } else {
                ("LabObservation", LabVital)
            }
        }
        Resource::MedicationRequest(_) => ("CancerRelatedMedicationStatement", Treatment),
        Resource::Procedure(_) => ("CancerRelatedProcedureStatement", Treatment),
        Resource::DiagnosticReport(_) => ("CancerDiagnosticReport", LabVital),
        Resource::Specimen(_) => ("HumanSpecimen", LabVital),
        Resource::ResearchStudy(_) | Resource::OperationOutcome(_) => {
            return Err(McodeError::UnsupportedType(r.resource_type()))
        }
    })
}

pub fn classify_domain(cat: &Catalog, r: &Resource) -> Result<McodeDomain, McodeError> {
    classify(cat, r).map(|(_, d)| d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiomarkerStatus {
    Positive,
    Negative,
    Indeterminate,
}

impl BiomarkerStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BiomarkerStatus::Positive => "positive",
            BiomarkerStatus::Negative => "negative",
            BiomarkerStatus::Indeterminate => "indeterminate",
        }
    }

    /// Reads a result phrase; negative phrases are checked first so "not detected" is negative.
    pub fn from_result(text: &str) -> BiomarkerStatus {
        let n = format!(" {} ", normalize_term(text));
        let has = |ps: &[&str]| ps.iter().any(|p| n.contains(&format!(" {p} ")));
        if has(&["negative", "not detected", "not amplified", "absent", "wild type", "no"]) {
            BiomarkerStatus::Negative
        } else if has(&["positive", "detected", "amplified", "present", "3", "overexpressed"]) {
            BiomarkerStatus::Positive
        } else {
            BiomarkerStatus::Indeterminate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenomicsExtension {
    pub biomarker_name: String,
    pub status: BiomarkerStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

static VARIANT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:[cp]\.[A-Za-z0-9_>*]+|[ACDEFGHIKLMNPQRSTVWY][0-9]{1,4}[ACDEFGHIKLMNPQRSTVWY])\b").unwrap()
});

impl GenomicsExtension {
    pub fn to_extension(&self) -> Extension {
        let mut children = vec![
            Extension::string("biomarkerName", &self.biomarker_name),
            Extension::string("status", self.status.as_str()),
        ];
        if let Some(v) = &self.variant {
            children.push(Extension::string("variant", v));
        }
        Extension::nested(GENOMICS_EXTENSION, children)
    }

    pub fn from_extension(e: &Extension) -> Option<GenomicsExtension> {
        if e.url != GENOMICS_EXTENSION {
            return None;
        }
        let s = |url: &str| e.child(url).and_then(|c| c.value_string.clone());
        Some(GenomicsExtension {
            biomarker_name: s("biomarkerName")?,
            status: match s("status")?.as_str() {
                "positive" => BiomarkerStatus::Positive,
                "negative" => BiomarkerStatus::Negative,
                "indeterminate" => BiomarkerStatus::Indeterminate,
                _ => return None,
            },
            variant: s("variant"),
        })
    }

    fn for_observation(cat: &Catalog, o: &Observation) -> Option<GenomicsExtension> {
        let biomarker = loinc_codes(o).find_map(|c| cat.biomarker_for(CodeSystemId::Loinc, c))?;
        let value = o
            .value_string
            .clone()
            .or_else(|| o.value_codeable_concept.as_ref().and_then(|c| c.text.clone()))
            .unwrap_or_default();
        Some(GenomicsExtension {
            biomarker_name: biomarker.to_string(),
            status: BiomarkerStatus::from_result(&value),
            variant: VARIANT.find(&value).map(|m| m.as_str().to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct McodeWarning {
    pub entry: usize,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McodeOutput {
    pub bundle: Bundle,
    pub warnings: Vec<McodeWarning>,
}

/// Tags every supported entry with exactly one profile; other fields are left untouched.
pub fn to_mcode_bundle(cat: &Catalog, b: &Bundle) -> McodeOutput {
    let mut out = b.clone();
    let mut warnings = Vec::new();
    for (i, r) in out.entries.iter_mut().enumerate() {
        let tagged = classify(cat, r);
        let meta = r.meta_mut();
        if let Some(m) = meta.as_mut() {
            m.profiles.retain(|p| !p.starts_with(PROFILE_PREFIX));
        }
        match tagged {
            Ok((name, domain)) => {
                meta.get_or_insert_with(Meta::default).profiles.push(profile_uri(name));
                if let Resource::Observation(o) = r {
                    o.extension.retain(|e| e.url != GENOMICS_EXTENSION);
                    if domain == McodeDomain::Genomics {
                        if let Some(g) = GenomicsExtension::for_observation(cat, o) {
                            o.extension.push(g.to_extension());
                        }
                    }
                }
            }
            Err(e) => {
                if meta.as_ref().is_some_and(Meta::is_empty) {
                    *meta = None;
                }
                warnings.push(McodeWarning {
                    entry: i,
                    id: r.id().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    McodeOutput { bundle: out, warnings }
}

/// Domain of a tagged profile URI.
pub fn domain_of_profile(cat: &Catalog, uri: &str) -> Option<McodeDomain> {
    let name = uri.strip_prefix(PROFILE_PREFIX)?;
    cat.profile(name).map(|p| p.domain)
}

/// Entry counts per domain, read from the profile tags; all six domains are present.
pub fn domain_report(cat: &Catalog, b: &Bundle) -> BTreeMap<McodeDomain, usize> {
    let mut counts: BTreeMap<McodeDomain, usize> = McodeDomain::ALL.iter().map(|d| (*d, 0)).collect();
    for r in &b.entries {
        if let Some(d) = r.profiles().iter().find_map(|p| domain_of_profile(cat, p)) {
            *counts.entry(d).or_default() += 1;
        }
    }
    counts
}
