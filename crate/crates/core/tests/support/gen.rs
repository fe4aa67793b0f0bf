//! Proptest strategies for valid resources, patient facts and small registries.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate};
use proptest::collection::{btree_map, btree_set, vec};
use proptest::option;
use proptest::prelude::*;
use serde_json::{json, Value};

use onco_core::fhir::*;
use onco_core::matching::PatientFacts;
use onco_core::mcode::BiomarkerStatus;
use onco_core::registry::*;

// ---- FHIR ----

pub fn text() -> BoxedStrategy<String> {
    prop_oneof![
        4 => "[ -~]{0,16}",
        1 => "\\PC{0,10}",
        1 => Just("line one\nline \"two\"\t\\".to_string()),
    ]
    .boxed()
}

pub fn id() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9.-]{0,20}"
}

fn json_leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|n| json!(n)),
        "[a-z ]{0,8}".prop_map(Value::String),
    ]
}

fn json_value() -> impl Strategy<Value = Value> {
    json_leaf().prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            vec(inner.clone(), 0..3).prop_map(Value::Array),
            btree_map("[a-z]{1,4}", inner, 0..3)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

/// Unknown keys; the `zz` prefix keeps them clear of modeled names.
pub fn extras() -> BoxedStrategy<Extras> {
    prop_oneof![
        3 => Just(Extras::new()),
        1 => btree_map("zz[a-z]{1,4}", json_value(), 1..3),
    ]
    .boxed()
}

pub fn system() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        SNOMED_URI,
        LOINC_URI,
        RXNORM_URI,
        ICD10_URI,
        V2_0074_URI,
        OBSERVATION_CATEGORY_URI,
        "urn:onco:local",
    ])
    .prop_map(str::to_string)
}

pub fn coding() -> impl Strategy<Value = Coding> {
    (system(), "[A-Za-z0-9.-]{1,10}", option::of(text()), extras()).prop_map(
        |(system, code, display, extras)| Coding {
            system,
            code,
            display,
            extras,
        },
    )
}

pub fn concept() -> impl Strategy<Value = CodeableConcept> {
    (vec(coding(), 0..3), option::of(text()), extras()).prop_map(|(codings, text, extras)| {
        let text = if codings.is_empty() && text.is_none() {
            Some("free text".to_string())
        } else {
            text
        };
        CodeableConcept {
            codings,
            text,
            extras,
        }
    })
}

pub fn reference() -> impl Strategy<Value = Reference> {
    let types: Vec<&'static str> = ResourceType::ALL
        .iter()
        .map(|t| t.as_str())
        .chain(EXTERNAL_REFERENCE_TYPES)
        .collect();
    (prop::sample::select(types), id(), extras()).prop_map(|(t, id, extras)| Reference {
        reference: format!("{t}/{id}"),
        extras,
    })
}

pub fn date_or_instant() -> impl Strategy<Value = DateOrInstant> {
    prop_oneof![
        (1900i32..2100).prop_map(DateOrInstant::Year),
        (1900i32..2100, 1u32..=12).prop_map(|(y, m)| DateOrInstant::YearMonth(y, m)),
        (1900i32..2100, 1u32..=12, 1u32..=28)
            .prop_map(|(y, m, d)| DateOrInstant::Date(NaiveDate::from_ymd_opt(y, m, d).unwrap())),
        (0i64..4_000_000_000, prop_oneof![Just(0u32), 0u32..1000])
            .prop_map(|(s, ms)| DateOrInstant::Instant(
                DateTime::from_timestamp(s, ms * 1_000_000).unwrap()
            )),
    ]
}

pub fn extension() -> impl Strategy<Value = Extension> {
    let url = prop_oneof![
        "urn:onco:extension:[a-zA-Z]{1,10}",
        "http://hl7.org/fhir/StructureDefinition/[a-z-]{1,12}",
    ];
    let leaf = (
        url,
        prop_oneof![
            Just((None, None, None, None)),
            text().prop_map(|s| (Some(s), None, None, None)),
            coding().prop_map(|c| (None, Some(c), None, None)),
            (-4000i32..4000).prop_map(|n| (None, None, Some(f64::from(n) / 4.0), None)),
            concept().prop_map(|c| (None, None, None, Some(c))),
        ],
    )
        .prop_map(|(url, (s, c, d, cc))| Extension {
            url,
            value_string: s,
            value_coding: c,
            value_decimal: d,
            value_codeable_concept: cc,
            extension: Vec::new(),
        });
    leaf.prop_recursive(2, 6, 3, |inner| {
        ("urn:onco:extension:[a-z]{1,8}", vec(inner, 1..3))
            .prop_map(|(url, children)| Extension::nested(&url, children))
    })
}

pub fn meta() -> impl Strategy<Value = Option<Meta>> {
    option::of(
        (vec("http://hl7.org/fhir/us/mcode/StructureDefinition/[a-z-]{1,20}", 0..3), extras())
            .prop_map(|(profiles, extras)| Meta { profiles, extras }),
    )
}

fn exts() -> impl Strategy<Value = Vec<Extension>> {
    vec(extension(), 0..3)
}

fn identifier() -> impl Strategy<Value = Identifier> {
    (option::of("urn:[a-z]{1,8}"), text(), extras()).prop_map(|(system, value, extras)| Identifier {
        system,
        value,
        extras,
    })
}

fn human_name() -> impl Strategy<Value = HumanName> {
    (option::of(text()), option::of(text()), vec(text(), 0..3), extras()).prop_map(
        |(text, family, given, extras)| HumanName {
            text,
            family,
            given,
            extras,
        },
    )
}

fn annotation() -> impl Strategy<Value = Annotation> {
    (text(), extras()).prop_map(|(text, extras)| Annotation { text, extras })
}

fn pick<T: Copy + std::fmt::Debug + 'static>(all: &'static [T]) -> impl Strategy<Value = T> {
    prop::sample::select(all)
}

type Head = (String, Option<Meta>, Vec<Extension>, Extras);

fn head() -> impl Strategy<Value = Head> {
    (id(), meta(), exts(), extras())
}

fn patient() -> impl Strategy<Value = Resource> {
    (
        head(),
        vec(identifier(), 0..2),
        vec(human_name(), 0..2),
        option::of(pick(AdministrativeGender::ALL)),
        option::of(date_or_instant()),
        option::of(concept()),
    )
        .prop_map(|((id, meta, extension, extras), identifier, name, gender, birth_date, marital_status)| {
            Resource::Patient(Patient {
                id,
                meta,
                extension,
                identifier,
                name,
                gender,
                birth_date,
                marital_status,
                extras,
            })
        })
}

fn condition() -> impl Strategy<Value = Resource> {
    let stage = (option::of(concept()), vec(reference(), 0..2), option::of(concept()), extras())
        .prop_map(|(summary, assessment, stage_type, extras)| ConditionStage {
            summary,
            assessment,
            stage_type,
            extras,
        });
    (
        head(),
        option::of(concept()),
        option::of(concept()),
        option::of(concept()),
        vec(concept(), 0..2),
        option::of(reference()),
        option::of(date_or_instant()),
        vec(stage, 0..2),
    )
        .prop_map(
            |((id, meta, extension, extras), clinical_status, verification_status, code, body_site, subject, onset, stage)| {
                Resource::Condition(Condition {
                    id,
                    meta,
                    extension,
                    clinical_status,
                    verification_status,
                    code,
                    body_site,
                    subject,
                    onset,
                    stage,
                    extras,
                })
            },
        )
}

fn observation() -> impl Strategy<Value = Resource> {
    let value = prop_oneof![
        Just((None, None)),
        text().prop_map(|s| (Some(s), None)),
        concept().prop_map(|c| (None, Some(c))),
    ];
    (
        head(),
        option::of(pick(ObservationStatus::ALL)),
        vec(concept(), 0..2),
        option::of(concept()),
        option::of(text()),
        option::of(reference()),
        option::of(date_or_instant()),
        value,
        option::of(reference()),
    )
        .prop_map(
            |((id, meta, extension, extras), status, category, code, text, subject, effective, (vs, vcc), specimen)| {
                Resource::Observation(Observation {
                    id,
                    meta,
                    extension,
                    status,
                    category,
                    code,
                    text,
                    subject,
                    effective,
                    value_string: vs,
                    value_codeable_concept: vcc,
                    specimen,
                    extras,
                })
            },
        )
}

fn medication_request() -> impl Strategy<Value = Resource> {
    let dosage = (text(), extras()).prop_map(|(text, extras)| Dosage { text, extras });
    (
        head(),
        option::of(pick(MedicationRequestStatus::ALL)),
        option::of(pick(MedicationRequestIntent::ALL)),
        option::of(concept()),
        option::of(reference()),
        vec(dosage, 0..2),
    )
        .prop_map(
            |((id, meta, extension, extras), status, intent, medication, subject, dosage_instruction)| {
                Resource::MedicationRequest(MedicationRequest {
                    id,
                    meta,
                    extension,
                    status,
                    intent,
                    medication,
                    subject,
                    dosage_instruction,
                    extras,
                })
            },
        )
}

fn procedure() -> impl Strategy<Value = Resource> {
    (
        head(),
        option::of(pick(ProcedureStatus::ALL)),
        option::of(concept()),
        option::of(reference()),
        option::of(date_or_instant()),
    )
        .prop_map(|((id, meta, extension, extras), status, code, subject, performed)| {
            Resource::Procedure(Procedure {
                id,
                meta,
                extension,
                status,
                code,
                subject,
                performed,
                extras,
            })
        })
}

fn specimen() -> impl Strategy<Value = Resource> {
    let collection = (option::of(date_or_instant()), extras())
        .prop_map(|(collected, extras)| SpecimenCollection { collected, extras });
    (
        head(),
        option::of(concept()),
        option::of(reference()),
        option::of(collection),
        vec(annotation(), 0..3),
    )
        .prop_map(|((id, meta, extension, extras), specimen_type, subject, collection, note)| {
            Resource::Specimen(Specimen {
                id,
                meta,
                extension,
                specimen_type,
                subject,
                collection,
                note,
                extras,
            })
        })
}

fn diagnostic_report() -> impl Strategy<Value = Resource> {
    let category = option::of(prop_oneof![
        concept().prop_map(OneOrMany::One),
        vec(concept(), 0..3).prop_map(OneOrMany::Many),
    ]);
    let performer = (option::of("Practitioner/[a-z0-9]{1,6}"), option::of(text()), extras(), extras())
        .prop_map(|(reference, display, ae, pe)| Performer {
            actor: Actor {
                reference,
                display,
                extras: ae,
            },
            extras: pe,
        });
    (
        head(),
        option::of(pick(DiagnosticReportStatus::ALL)),
        category,
        option::of(concept()),
        option::of(text()),
        option::of(reference()),
        (option::of(date_or_instant()), option::of(date_or_instant())),
        vec(performer, 0..2),
        vec(reference(), 0..2),
        vec(reference(), 0..3),
    )
        .prop_map(
            |((id, meta, extension, extras), status, category, code, text, subject, (effective, issued), performer, specimen, result)| {
                Resource::DiagnosticReport(DiagnosticReport {
                    id,
                    meta,
                    extension,
                    status,
                    category,
                    code,
                    text,
                    subject,
                    effective,
                    issued,
                    performer,
                    specimen,
                    result,
                    extras,
                })
            },
        )
}

fn allergy() -> impl Strategy<Value = Resource> {
    let reaction = (vec(concept(), 0..2), option::of(text()), extras()).prop_map(
        |(manifestation, description, extras)| AllergyReaction {
            manifestation,
            description,
            extras,
        },
    );
    (head(), option::of(concept()), option::of(reference()), vec(reaction, 0..2)).prop_map(
        |((id, meta, extension, extras), code, patient, reaction)| {
            Resource::AllergyIntolerance(AllergyIntolerance {
                id,
                meta,
                extension,
                code,
                patient,
                reaction,
                extras,
            })
        },
    )
}

fn research_study() -> impl Strategy<Value = Resource> {
    (
        head(),
        vec(identifier(), 0..2),
        option::of(text()),
        option::of(pick(ResearchStudyStatus::ALL)),
        option::of(concept()),
        vec(concept(), 0..2),
        vec(concept(), 0..2),
        option::of(text()),
        vec(reference(), 0..2),
    )
        .prop_map(
            |((id, meta, extension, extras), identifier, title, status, phase, category, condition, description, enrollment)| {
                Resource::ResearchStudy(ResearchStudy {
                    id,
                    meta,
                    extension,
                    identifier,
                    title,
                    status,
                    phase,
                    category,
                    condition,
                    description,
                    enrollment,
                    extras,
                })
            },
        )
}

fn operation_outcome() -> impl Strategy<Value = Resource> {
    let issue = (
        pick(IssueSeverity::ALL),
        "[a-z-]{1,12}",
        option::of(text()),
        vec("[A-Za-z.\\[\\]0-9]{1,20}", 0..2),
        extras(),
    )
        .prop_map(|(severity, code, diagnostics, expression, extras)| OutcomeIssue {
            severity,
            code,
            diagnostics,
            expression,
            extras,
        });
    (head(), vec(issue, 0..3)).prop_map(|((id, meta, extension, extras), issue)| {
        Resource::OperationOutcome(OperationOutcome {
            id,
            meta,
            extension,
            issue,
            extras,
        })
    })
}

/// Any valid resource of the supported subset.
pub fn resource() -> BoxedStrategy<Resource> {
    prop_oneof![
        patient(),
        condition(),
        observation(),
        medication_request(),
        procedure(),
        specimen(),
        diagnostic_report(),
        allergy(),
        research_study(),
        operation_outcome(),
    ]
    .boxed()
}

// ---- matching ----

pub const DIAGNOSES: [&str; 5] = [
    "breast cancer",
    "lung cancer",
    "acute myeloid leukemia",
    "melanoma",
    "colorectal cancer",
];
pub const STAGES: [&str; 15] = [
    "0", "I", "IA", "IB", "II", "IIA", "IIB", "IIC", "III", "IIIA", "IIIB", "IIIC", "IV", "IVA", "IVB",
];
pub const TNM: [&str; 9] = ["T1", "T2", "T4", "N0", "N1", "N1a", "M0", "M1", "Tis"];
pub const BIOMARKERS: [&str; 5] = ["HER2", "ER", "PR", "PD-L1", "EGFR"];
pub const THERAPIES: [&str; 5] = ["trastuzumab", "pertuzumab", "docetaxel", "letrozole", "radiation therapy"];
pub const SITES: [&str; 4] = ["Bone(s)", "Brain/Central Nervous System (CNS)", "Liver", "Lung"];
pub const SITE_TERMS: [&str; 7] = ["Brain", "Bone", "Liver", "Lung", "Central Nervous System", "CNS", "Skin"];
pub const GRADES: [&str; 3] = ["G1", "G2", "G3"];
pub const LATERALITY: [&str; 3] = ["Unilateral - Left", "Unilateral - Right", "Bilateral"];
pub const DISEASE_STATUS: [&str; 3] = ["Progressing", "Stable", "Improving"];
pub const GENDERS: [&str; 3] = ["male", "female", "unknown"];
pub const CONDITIONS: [&str; 6] = [
    "Breast Cancer",
    "Metastatic Breast Cancer",
    "Non-Small Cell Lung Cancer",
    "Melanoma",
    "Leukemia, Myeloid, Acute",
    "Solid Tumor",
];

fn select(xs: &'static [&'static str]) -> impl Strategy<Value = String> + Clone {
    prop::sample::select(xs).prop_map(str::to_string)
}

/// A vocabulary value, "Other", or one of the two unknown sentinels.
fn categorical(xs: &'static [&'static str]) -> impl Strategy<Value = String> {
    prop_oneof![
        4 => select(xs),
        1 => Just("Other".to_string()),
        2 => Just("Not Documented".to_string()),
        1 => Just(String::new()),
    ]
}

fn status() -> impl Strategy<Value = BiomarkerStatus> {
    prop_oneof![
        Just(BiomarkerStatus::Positive),
        Just(BiomarkerStatus::Negative),
        Just(BiomarkerStatus::Indeterminate),
    ]
}

pub fn facts() -> impl Strategy<Value = PatientFacts> {
    (
        btree_set(select(&DIAGNOSES), 0..3),
        categorical(&STAGES),
        (categorical(&TNM), categorical(&TNM), categorical(&TNM)),
        btree_map(select(&BIOMARKERS).prop_map(|b| b.to_uppercase()), status(), 0..4),
        option::of(btree_set(select(&THERAPIES), 0..4)),
        option::of(btree_set(select(&SITES), 0..3)),
        (categorical(&GRADES), categorical(&LATERALITY), categorical(&DISEASE_STATUS)),
        option::of(0u32..100),
        option::of(select(&GENDERS)),
    )
        .prop_map(
            |(diagnoses, numerical_stage, (t, n, m), biomarkers, prior_therapies, metastasis_sites, (g, l, d), age, gender)| {
                PatientFacts {
                    diagnoses,
                    numerical_stage,
                    tnm_t: t,
                    tnm_n: n,
                    tnm_m: m,
                    biomarkers,
                    prior_therapies,
                    metastasis_sites,
                    histology_grade: g,
                    laterality: l,
                    disease_status: d,
                    age,
                    gender,
                }
            },
        )
}

/// Spelling variants that normalize to the same term.
fn respell(s: String) -> impl Strategy<Value = String> {
    let upper = s.to_uppercase();
    let dashed = s.replace(' ', "-");
    let padded = format!("  {s} ");
    prop::sample::select(vec![s.clone(), s, upper, dashed, padded])
}

fn value_for(xs: &'static [&'static str], set: bool) -> BoxedStrategy<CriterionValue> {
    if set {
        vec(select(xs).prop_flat_map(respell), 1..3)
            .prop_map(CriterionValue::Set)
            .boxed()
    } else {
        select(xs)
            .prop_flat_map(respell)
            .prop_map(CriterionValue::Text)
            .boxed()
    }
}

fn vocab(field: Field) -> &'static [&'static str] {
    match field {
        Field::Diagnosis => &DIAGNOSES,
        Field::Stage => &STAGES,
        Field::TnmT | Field::TnmN | Field::TnmM => &TNM,
        Field::Biomarker => &["positive", "negative", "indeterminate"],
        Field::PriorTherapy => &THERAPIES,
        Field::MetastasisSite => &SITE_TERMS,
        Field::HistologyGrade => &GRADES,
        Field::Laterality => &LATERALITY,
        Field::DiseaseStatus => &DISEASE_STATUS,
        Field::Gender => &GENDERS,
        Field::Age => &[],
    }
}

const FIELDS: [Field; 13] = [
    Field::Diagnosis,
    Field::Stage,
    Field::TnmT,
    Field::TnmN,
    Field::TnmM,
    Field::Biomarker,
    Field::PriorTherapy,
    Field::MetastasisSite,
    Field::HistologyGrade,
    Field::Laterality,
    Field::DiseaseStatus,
    Field::Age,
    Field::Gender,
];

pub fn criterion() -> impl Strategy<Value = Criterion> {
    let kind = prop_oneof![3 => Just(CriterionKind::Inclusion), 1 => Just(CriterionKind::Exclusion)];
    (kind, prop::sample::select(FIELDS.to_vec()), any::<bool>(), any::<u8>())
        .prop_flat_map(|(kind, field, set, pick_op)| {
            let op = match field {
                Field::Age => [Op::Ge, Op::Le][pick_op as usize % 2],
                Field::Stage => [Op::Equals, Op::InSet, Op::AtLeastStage][pick_op as usize % 3],
                Field::Biomarker => [Op::Equals, Op::InSet, Op::Has, Op::Lacks][pick_op as usize % 4],
                Field::PriorTherapy | Field::MetastasisSite => [Op::Has, Op::Lacks][pick_op as usize % 2],
                _ => [Op::Equals, Op::InSet][pick_op as usize % 2],
            };
            let value = match op {
                Op::Ge | Op::Le => (0u32..100).prop_map(CriterionValue::Number).boxed(),
                Op::InSet => value_for(vocab(field), true),
                Op::AtLeastStage => value_for(&STAGES, false),
                _ => value_for(vocab(field), set),
            };
            let biomarker = if field == Field::Biomarker {
                select(&BIOMARKERS)
                    .prop_flat_map(|b| prop::sample::select(vec![b.clone(), b.to_lowercase()]))
                    .prop_map(Some)
                    .boxed()
            } else {
                Just(None).boxed()
            };
            (Just(kind), Just(field), Just(op), value, biomarker)
        })
        .prop_map(|(kind, field, op, value, biomarker)| Criterion {
            kind,
            field,
            op,
            value,
            biomarker,
            text: None,
        })
}

pub fn trial(n: usize) -> impl Strategy<Value = TrialRecord> {
    let cohort = (0usize..3, vec(criterion(), 0..6)).prop_map(|(i, criteria)| Cohort {
        name: format!("Cohort {}", i + 1),
        criteria,
    });
    (
        vec(select(&CONDITIONS), 1..3),
        prop::sample::select(Recruitment::ALL.to_vec()),
        prop::sample::select(Phase::ALL.to_vec()),
        prop::sample::select(StudyType::ALL.to_vec()),
        vec(cohort, 1..4),
    )
        .prop_map(move |(conditions, recruitment, phase, study_type, cohorts)| TrialRecord {
            trial_id: format!("FZ-{n:03}"),
            title: format!("Fuzz study {n}"),
            conditions,
            recruitment,
            phase,
            study_type,
            sponsor: "Fuzz".into(),
            description: String::new(),
            cohorts,
        })
}

/// Up to `max` trials with unique ids, shuffled so file order differs from id order.
pub fn registry(max: usize) -> impl Strategy<Value = Registry> {
    (1..=max)
        .prop_flat_map(|n| (0..n).map(trial).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|ts| Registry::new(ts).expect("generated trials are valid"))
}

pub fn filter() -> impl Strategy<Value = TrialFilter> {
    (
        option::weighted(0.2, prop::sample::select(Recruitment::ALL.to_vec())),
        option::weighted(0.2, prop::sample::select(Phase::ALL.to_vec())),
        option::weighted(0.2, prop::sample::select(StudyType::ALL.to_vec())),
        option::weighted(0.2, prop::sample::select(vec!["breast cancer", "Cancer", "lung", "Acute", "tumor"])),
    )
        .prop_map(|(recruitment, phase, study_type, term)| TrialFilter {
            recruitment,
            phase,
            study_type,
            condition_term: term.map(str::to_string),
        })
}

/// Owned string set from literals.
pub fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn biomarkers(xs: &[(&str, BiomarkerStatus)]) -> BTreeMap<String, BiomarkerStatus> {
    xs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
