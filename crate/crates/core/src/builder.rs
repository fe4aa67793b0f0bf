//! Deterministic mapping of [`ClinicalVariables`] to FHIR resources and the document bundle.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::catalog::Catalog;
use crate::extraction::ClinicalVariables;
use crate::fhir::*;
use crate::mcode::{STAGE_GROUP_CODE, TNM_M_CODE, TNM_N_CODE, TNM_T_CODE};
use crate::terminology::{CodeSystemId, NOT_DOCUMENTED, OTHER};

pub const EXTENSION_PREFIX: &str = "urn:onco:extension:";
pub const MRN_SYSTEM: &str = "urn:onco:mrn";
pub const DISEASE_STATUS_CODE: &str = "97509-4";

static COMPONENT_SPLIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\s+(?:and|with)\s+|\s*\+\s*|\s*/\s+").unwrap());

/// Per-call id allocation: `<resourcetype-lowercase>-<n>`, n counted per type from 1.
#[derive(Debug, Clone)]
pub struct BuildContext {
    pub patient_id: String,
    counters: BTreeMap<ResourceType, usize>,
    pub default_date: Option<DateOrInstant>,
}

impl BuildContext {
    pub fn new(v: &ClinicalVariables) -> Self {
        let patient_id = match &v.demographics.mrn {
            Some(m) if is_valid_id(m) => m.clone(),
            _ => "patient-1".to_string(),
        };
        BuildContext {
            patient_id,
            counters: BTreeMap::new(),
            default_date: v.note_date,
        }
    }

    pub fn next_id(&mut self, t: ResourceType) -> String {
        let n = self.counters.entry(t).or_insert(0);
        *n += 1;
        format!("{}-{}", t.as_str().to_ascii_lowercase(), n)
    }

    pub fn subject(&self) -> Reference {
        Reference::to("Patient", &self.patient_id)
    }
}

fn informative(s: &str) -> bool {
    s != NOT_DOCUMENTED && s != OTHER && !s.trim().is_empty()
}

fn ext(name: &str, value: &str) -> Extension {
    Extension::string(&format!("{EXTENSION_PREFIX}{name}"), value)
}

/// Best table coding for a term, or a text-only concept.
fn concept(cat: &Catalog, term: &str, system: CodeSystemId) -> CodeableConcept {
    match cat.codes.best(term, system) {
        Some(e) => CodeableConcept::coded(vec![e.coding()]),
        None => CodeableConcept::text(term),
    }
}

fn table_coding(cat: &Catalog, system: CodeSystemId, code: &str) -> Coding {
    match cat.codes.lookup(system, code) {
        Some(e) => e.coding(),
        None => Coding::new(system.uri(), code, None),
    }
}

fn category(code: &str, display: &str) -> CodeableConcept {
    CodeableConcept::coded(vec![Coding::new(OBSERVATION_CATEGORY_URI, code, Some(display))])
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

pub fn build_patient(v: &ClinicalVariables, ctx: &BuildContext) -> Patient {
    let d = &v.demographics;
    let birth_date = d.birth_date.or_else(|| match (d.age, v.note_date) {
        (Some(age), Some(note)) => Some(DateOrInstant::Year(note.year() - age as i32)),
        _ => None,
    });
    Patient {
        id: ctx.patient_id.clone(),
        identifier: d
            .mrn
            .iter()
            .map(|m| Identifier {
                system: Some(MRN_SYSTEM.into()),
                value: m.clone(),
                extras: Extras::new(),
            })
            .collect(),
        name: d
            .name
            .iter()
            .map(|n| HumanName {
                text: Some(n.clone()),
                ..Default::default()
            })
            .collect(),
        gender: AdministrativeGender::ALL.iter().copied().find(|g| g.as_str() == d.gender),
        birth_date,
        marital_status: informative(&d.marital_status).then(|| CodeableConcept::text(&d.marital_status)),
        ..Default::default()
    }
}

fn staging_observation(
    cat: &Catalog,
    ctx: &mut BuildContext,
    code: &str,
    value: &str,
    effective: Option<DateOrInstant>,
) -> Observation {
    Observation {
        id: ctx.next_id(ResourceType::Observation),
        status: Some(ObservationStatus::Final),
        code: Some(CodeableConcept::coded(vec![table_coding(cat, CodeSystemId::Loinc, code)])),
        subject: Some(ctx.subject()),
        effective,
        value_codeable_concept: Some(CodeableConcept::text(value)),
        ..Default::default()
    }
}

/// Conditions for each diagnosis, plus the TNM and stage-group observations the first one references.
pub fn build_condition(
    cat: &Catalog,
    v: &ClinicalVariables,
    ctx: &mut BuildContext,
) -> (Vec<Condition>, Vec<Observation>) {
    let mut conditions = Vec::new();
    let mut staging = Vec::new();
    for d in &v.cancer_diagnosis {
        if !informative(&d.term) {
            continue;
        }
        let mut c = Condition {
            id: ctx.next_id(ResourceType::Condition),
            clinical_status: Some(CodeableConcept::coded(vec![Coding::new(
                CONDITION_CLINICAL_URI,
                "active",
                Some("Active"),
            )])),
            verification_status: Some(CodeableConcept::coded(vec![Coding::new(
                CONDITION_VERIFICATION_URI,
                "confirmed",
                Some("Confirmed"),
            )])),
            code: Some(concept(cat, &d.term, CodeSystemId::Snomed)),
            subject: Some(ctx.subject()),
            onset: v.diagnosis_date,
            ..Default::default()
        };
        if conditions.is_empty() {
            if informative(&v.metastasis_indication) {
                c.extension.push(ext("metastasisIndication", &v.metastasis_indication));
            }
            for s in v.metastasis_sites.iter().filter(|s| informative(s)) {
                c.extension.push(ext("metastasisSite", s));
            }
            if let Some(h) = v.histology.as_deref().filter(|h| informative(h)) {
                c.extension.push(ext("histology", h));
            }
            if informative(&v.histology_grade) {
                c.extension.push(ext("histologyGrade", &v.histology_grade));
            }
            if informative(&v.laterality) {
                c.extension.push(ext("laterality", &v.laterality));
            }
            for (code, value) in [
                (TNM_T_CODE, &v.tnm_t),
                (TNM_N_CODE, &v.tnm_n),
                (TNM_M_CODE, &v.tnm_m),
                (STAGE_GROUP_CODE, &v.numerical_stage),
            ] {
                if informative(value) {
                    staging.push(staging_observation(cat, ctx, code, value, v.diagnosis_date));
                }
            }
            if informative(&v.numerical_stage) || !staging.is_empty() {
                c.stage.push(ConditionStage {
                    summary: informative(&v.numerical_stage).then(|| CodeableConcept::text(&v.numerical_stage)),
                    assessment: staging.iter().map(|o| Reference::to("Observation", &o.id)).collect(),
                    ..Default::default()
                });
            }
        }
        conditions.push(c);
    }
    (conditions, staging)
}

pub fn build_disease_status(cat: &Catalog, v: &ClinicalVariables, ctx: &mut BuildContext) -> Option<Observation> {
    if !informative(&v.disease_status) {
        return None;
    }
    Some(Observation {
        id: ctx.next_id(ResourceType::Observation),
        status: Some(ObservationStatus::Final),
        code: Some(CodeableConcept::coded(vec![table_coding(cat, CodeSystemId::Loinc, DISEASE_STATUS_CODE)])),
        subject: Some(ctx.subject()),
        effective: ctx.default_date,
        value_codeable_concept: Some(CodeableConcept::text(&v.disease_status)),
        ..Default::default()
    })
}

/// A multi-drug name is coded per component only when every component maps.
fn medication_concept(cat: &Catalog, name: &str) -> CodeableConcept {
    let parts: Vec<&str> = COMPONENT_SPLIT.split(name).map(str::trim).filter(|p| !p.is_empty()).collect();
    if parts.len() > 1 {
        let codings: Option<Vec<Coding>> = parts
            .iter()
            .map(|p| cat.codes.best(p, CodeSystemId::Rxnorm).map(|e| e.coding()))
            .collect();
        if let Some(mut codings) = codings {
            codings.dedup();
            return CodeableConcept::coded(codings);
        }
    }
    concept(cat, name, CodeSystemId::Rxnorm)
}

pub fn build_medication_requests(cat: &Catalog, v: &ClinicalVariables, ctx: &mut BuildContext) -> Vec<MedicationRequest> {
    v.medications
        .iter()
        .map(|m| MedicationRequest {
            id: ctx.next_id(ResourceType::MedicationRequest),
            status: Some(MedicationRequestStatus::Active),
            intent: Some(MedicationRequestIntent::Order),
            medication: Some(medication_concept(cat, &m.name)),
            subject: Some(ctx.subject()),
            dosage_instruction: m
                .dosage_text
                .iter()
                .map(|t| Dosage {
                    text: t.clone(),
                    extras: Extras::new(),
                })
                .collect(),
            ..Default::default()
        })
        .collect()
}

pub fn build_observations(cat: &Catalog, v: &ClinicalVariables, ctx: &mut BuildContext) -> Vec<Observation> {
    let panel = v.lab_panel.as_ref().and_then(|p| cat.panel_keywords.iter().find(|k| k.keyword == p.keyword));
    let panel_date = v.lab_panel.as_ref().and_then(|p| p.collected);
    v.observations
        .iter()
        .map(|o| {
            let imaging = cat.is_imaging(&o.name);
            let mapped = cat.codes.best(&o.name, CodeSystemId::Loinc);
            let (code, text) = match (mapped, panel) {
                (Some(e), _) => (CodeableConcept::coded(vec![e.coding()]), None),
                (None, Some(p)) if !imaging => (
                    CodeableConcept::coded(vec![table_coding(cat, CodeSystemId::Loinc, &p.loinc)]),
                    Some(o.name.clone()),
                ),
                (None, _) => (CodeableConcept::text(&o.name), None),
            };
            Observation {
                id: ctx.next_id(ResourceType::Observation),
                status: Some(ObservationStatus::Final),
                category: vec![if imaging {
                    category("imaging", "Imaging")
                } else {
                    category("laboratory", "Laboratory")
                }],
                code: Some(code),
                text,
                subject: Some(ctx.subject()),
                effective: o.date.or(panel_date).or(ctx.default_date),
                value_string: Some(o.value.clone()),
                ..Default::default()
            }
        })
        .collect()
}

pub fn build_procedures(cat: &Catalog, v: &ClinicalVariables, ctx: &mut BuildContext) -> Vec<Procedure> {
    v.procedures
        .iter()
        .map(|p| Procedure {
            id: ctx.next_id(ResourceType::Procedure),
            status: Some(ProcedureStatus::Completed),
            code: Some(concept(cat, &p.name, CodeSystemId::Snomed)),
            subject: Some(ctx.subject()),
            performed: p.date,
            ..Default::default()
        })
        .collect()
}

pub fn build_allergies(cat: &Catalog, v: &ClinicalVariables, ctx: &mut BuildContext) -> Vec<AllergyIntolerance> {
    v.allergies
        .iter()
        .map(|a| AllergyIntolerance {
            id: ctx.next_id(ResourceType::AllergyIntolerance),
            code: Some(concept(cat, &a.substance, CodeSystemId::Snomed)),
            patient: Some(ctx.subject()),
            reaction: a
                .reaction
                .iter()
                .map(|r| AllergyReaction {
                    description: Some(r.clone()),
                    ..Default::default()
                })
                .collect(),
            ..Default::default()
        })
        .collect()
}

pub fn build_specimen(cat: &Catalog, v: &ClinicalVariables, ctx: &mut BuildContext) -> Option<Specimen> {
    let s = v.specimen.as_ref()?;
    let id = match &s.label {
        Some(l) if is_valid_id(l) => l.clone(),
        _ => ctx.next_id(ResourceType::Specimen),
    };
    let mut note: Vec<Annotation> = Vec::new();
    if let Some(viability) = &s.viability {
        note.push(Annotation {
            text: format!("Viability: {viability}"),
            extras: Extras::new(),
        });
    }
    note.extend(s.notes.iter().map(|n| Annotation {
        text: n.clone(),
        extras: Extras::new(),
    }));
    Some(Specimen {
        id,
        specimen_type: (!s.source.trim().is_empty()).then(|| concept(cat, &s.source, CodeSystemId::Snomed)),
        subject: Some(ctx.subject()),
        collection: s.collected.map(|c| SpecimenCollection {
            collected: Some(c),
            extras: Extras::new(),
        }),
        note,
        ..Default::default()
    })
}

fn report_status(s: Option<&str>) -> DiagnosticReportStatus {
    let s = s.unwrap_or("").trim().to_ascii_lowercase();
    DiagnosticReportStatus::ALL
        .iter()
        .copied()
        .find(|x| x.as_str() == s)
        .unwrap_or(DiagnosticReportStatus::Unknown)
}

/// Built only when the note carried a lab-panel context.
pub fn build_diagnostic_report(
    cat: &Catalog,
    v: &ClinicalVariables,
    ctx: &mut BuildContext,
    specimen: Option<&Specimen>,
    results: &[Reference],
) -> Option<DiagnosticReport> {
    let lp = v.lab_panel.as_ref()?;
    let kw = cat.panel_keywords.iter().find(|k| k.keyword == lp.keyword)?;
    let code = table_coding(cat, CodeSystemId::Loinc, &kw.loinc);
    let display = code.display.clone().unwrap_or_else(|| kw.keyword.clone());
    let id = match lp.issued.or(lp.collected).and_then(|d| d.date()) {
        Some(d) => format!("{}-{}", slug(&display), d.format("%Y%m%d")),
        None => ctx.next_id(ResourceType::DiagnosticReport),
    };
    Some(DiagnosticReport {
        id,
        status: Some(report_status(lp.status.as_deref())),
        category: Some(OneOrMany::One(CodeableConcept::coded(vec![Coding::new(
            V2_0074_URI,
            &kw.section_code,
            Some(&kw.section_display),
        )]))),
        code: Some(CodeableConcept::coded(vec![code])),
        text: Some(display),
        subject: Some(ctx.subject()),
        effective: lp.collected.or(ctx.default_date),
        issued: lp.issued,
        performer: lp
            .performer
            .iter()
            .map(|p| Performer {
                actor: Actor {
                    display: Some(p.clone()),
                    ..Default::default()
                },
                extras: Extras::new(),
            })
            .collect(),
        specimen: specimen.map(|s| Reference::to("Specimen", &s.id)).into_iter().collect(),
        result: results.to_vec(),
        ..Default::default()
    })
}

/// Composes every builder into a closed document bundle.
pub fn build_bundle(cat: &Catalog, v: &ClinicalVariables) -> Bundle {
    let mut ctx = BuildContext::new(v);
    let patient = build_patient(v, &ctx);
    let (conditions, staging) = build_condition(cat, v, &mut ctx);
    let status = build_disease_status(cat, v, &mut ctx);
    let meds = build_medication_requests(cat, v, &mut ctx);
    let procedures = build_procedures(cat, v, &mut ctx);
    let observations = build_observations(cat, v, &mut ctx);
    let specimen = build_specimen(cat, v, &mut ctx);
    let results: Vec<Reference> = observations.iter().map(|o| Reference::to("Observation", &o.id)).collect();
    let report = build_diagnostic_report(cat, v, &mut ctx, specimen.as_ref(), &results);
    let allergies = build_allergies(cat, v, &mut ctx);

    let mut resources = vec![Resource::Patient(patient)];
    resources.extend(conditions.into_iter().map(Resource::Condition));
    resources.extend(meds.into_iter().map(Resource::MedicationRequest));
    resources.extend(procedures.into_iter().map(Resource::Procedure));
    resources.extend(staging.into_iter().map(Resource::Observation));
    resources.extend(status.into_iter().map(Resource::Observation));
    resources.extend(observations.into_iter().map(Resource::Observation));
    resources.extend(specimen.into_iter().map(Resource::Specimen));
    resources.extend(report.into_iter().map(Resource::DiagnosticReport));
    resources.extend(allergies.into_iter().map(Resource::AllergyIntolerance));
    assemble_bundle(resources, BundleType::Document).expect("builder output is closed and ids are unique")
}
