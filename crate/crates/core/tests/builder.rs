mod support;

use proptest::prelude::*;

use onco_core::builder::*;
use onco_core::catalog::Catalog;
use onco_core::extraction::*;
use onco_core::fhir::*;
use onco_core::terminology::{CodeSystemId, NOT_DOCUMENTED, OTHER};

fn cat() -> &'static Catalog {
    Catalog::global()
}

fn stroke_vars() -> ClinicalVariables {
    let note = RawNote::new(support::note("n01-synthea-stroke"));
    run_extractor(cat(), &BaselineExtractor::new(cat()), &note).unwrap()
}

fn of_type(b: &Bundle, t: ResourceType) -> Vec<&Resource> {
    b.entries.iter().filter(|r| r.resource_type() == t).collect()
}

#[test]
fn stroke_bundle() {
    let v = stroke_vars();
    let b = build_bundle(cat(), &v);
    assert_eq!(b.bundle_type, BundleType::Document);
    assert_eq!(of_type(&b, ResourceType::Patient).len(), 1);
    let meds = of_type(&b, ResourceType::MedicationRequest);
    assert!(meds.len() >= 6, "{}", meds.len());
    assert_eq!(of_type(&b, ResourceType::Procedure).len(), 2);
    let alteplase = meds.iter().filter(|r| {
        let Resource::MedicationRequest(m) = r else { return false };
        m.medication.as_ref().unwrap().codings.iter().any(|c| c.code == "1804799")
    });
    assert_eq!(alteplase.count(), 1);

    let Resource::Patient(p) = &b.entries[0] else { panic!("Patient first") };
    assert_eq!(p.gender, Some(AdministrativeGender::Male));
    assert_eq!(p.marital_status.as_ref().unwrap().text.as_deref(), Some("Married"));
    let note_year = v.note_date.unwrap().year();
    assert_eq!(p.birth_date.unwrap().year(), note_year - 68);
}

#[test]
fn diagnosis_date_alone_gives_no_birth_date() {
    let v = ClinicalVariables {
        diagnosis_date: DateOrInstant::parse("2020-02-01").ok(),
        ..Default::default()
    };
    let p = build_patient(&v, &BuildContext::new(&v));
    assert_eq!(p.birth_date, None);
}

#[test]
fn colon_cancer_stage_three() {
    let v = ClinicalVariables {
        cancer_diagnosis: vec![DiagnosisTerm {
            term: "Colon cancer".into(),
            code: None,
        }],
        numerical_stage: "III".into(),
        ..Default::default()
    };
    let (conds, staging) = build_condition(cat(), &v, &mut BuildContext::new(&v));
    assert_eq!(conds.len(), 1);
    let c = &conds[0];
    let coding = &c.code.as_ref().unwrap().codings[0];
    assert_eq!((coding.system.as_str(), coding.code.as_str()), (SNOMED_URI, "363406005"));
    assert_eq!(c.stage[0].summary.as_ref().unwrap().text.as_deref(), Some("III"));
    assert_eq!(staging.len(), 1);
    assert_eq!(c.onset, None);
}

#[test]
fn no_diagnoses_no_conditions() {
    let v = ClinicalVariables::default();
    assert!(build_condition(cat(), &v, &mut BuildContext::new(&v)).0.is_empty());
}

#[test]
fn chemo_medication_procedure_observation() {
    let v = ClinicalVariables {
        medications: vec![MedicationItem {
            name: "Cisplatin and Pemetrexed".into(),
            dosage_text: Some("Administered as part of chemotherapy regimen".into()),
        }],
        procedures: vec![ProcedureItem {
            name: "Chemotherapy".into(),
            date: DateOrInstant::parse("2023-07-15").ok(),
        }],
        observations: vec![ObservationItem {
            name: "CT of chest".into(),
            value: "Partial response to treatment".into(),
            date: None,
        }],
        ..Default::default()
    };
    let b = build_bundle(cat(), &v);
    let expected: serde_json::Value = serde_json::from_str(&support::fixture("fig4-resources.json")).unwrap();
    for (i, t) in ["MedicationRequest", "Procedure", "Observation"].iter().enumerate() {
        let got = b.entries.iter().find(|r| r.resource_type().as_str() == *t).unwrap();
        let got = resource_to_value(got);
        let want = &expected[i];
        for key in ["id", "status", "intent", "medicationCodeableConcept", "subject", "dosageInstruction", "code", "performedDateTime", "valueString"] {
            assert_eq!(got.get(key), want.get(key), "{t}.{key}");
        }
    }
    let Some(Resource::Observation(o)) = b.entries.iter().find(|r| r.resource_type() == ResourceType::Observation) else {
        panic!()
    };
    assert_eq!(o.category[0].codings[0].code, "imaging");
    assert_eq!(o.code.as_ref().unwrap().codings[0].code, "30746-1");
}

#[test]
fn alteplase_dosage_is_verbatim() {
    let v = ClinicalVariables {
        medications: vec![MedicationItem {
            name: "alteplase 100 mg injection".into(),
            dosage_text: Some("alteplase 100 mg injection".into()),
        }],
        ..Default::default()
    };
    let ms = build_medication_requests(cat(), &v, &mut BuildContext::new(&v));
    assert_eq!(ms[0].dosage_instruction[0].text, "alteplase 100 mg injection");
    assert_eq!(ms[0].status, Some(MedicationRequestStatus::Active));
    assert_eq!(ms[0].intent, Some(MedicationRequestIntent::Order));
}

#[test]
fn nothing_to_build() {
    let v = ClinicalVariables::default();
    let mut ctx = BuildContext::new(&v);
    assert!(build_medication_requests(cat(), &v, &mut ctx).is_empty());
    assert!(build_observations(cat(), &v, &mut ctx).is_empty());
    assert!(build_procedures(cat(), &v, &mut ctx).is_empty());
    assert!(build_specimen(cat(), &v, &mut ctx).is_none());
    assert!(build_diagnostic_report(cat(), &v, &mut ctx, None, &[]).is_none());
    let b = build_bundle(cat(), &v);
    assert_eq!(b.entries.len(), 1);
    assert_eq!(b.entries[0].resource_type(), ResourceType::Patient);
}

fn members(set: &str) -> Vec<String> {
    let mut m = cat().value_sets.expect(set).members.clone();
    m.push(NOT_DOCUMENTED.into());
    m.push(OTHER.into());
    m
}

fn pick(set: &str) -> impl Strategy<Value = String> {
    prop::sample::select(members(set))
}

fn displays(system: CodeSystemId) -> Vec<String> {
    cat().codes.entries().iter().filter(|e| e.system == system).map(|e| e.display.clone()).collect()
}

/// A lexicon term or free text that may not map.
fn term(system: CodeSystemId) -> impl Strategy<Value = String> {
    prop_oneof![3 => prop::sample::select(displays(system)), 1 => "[a-z]{3,10}( [a-z]{3,10}){0,2}"]
}

fn date() -> impl Strategy<Value = Option<DateOrInstant>> {
    proptest::option::of((2000i32..2030, 1u32..13, 1u32..29).prop_map(|(y, m, d)| {
        DateOrInstant::parse(&format!("{y:04}-{m:02}-{d:02}")).unwrap()
    }))
}

fn variables() -> impl Strategy<Value = ClinicalVariables> {
    use proptest::collection::vec;
    let panel_keywords: Vec<String> = cat().panel_keywords.iter().map(|k| k.keyword.clone()).collect();
    (
        (
            vec(pick("cancer_diagnosis"), 0..3),
            date(),
            pick("metastasis_indication"),
            vec(pick("metastasis_site"), 0..3),
            (pick("tnm_t"), pick("tnm_n"), pick("tnm_m"), pick("numerical_stage")),
            (proptest::option::of(pick("histology")), pick("histology_grade"), pick("laterality"), pick("disease_status")),
        ),
        (
            vec((term(CodeSystemId::Rxnorm), proptest::option::of("[ -~]{1,20}")), 0..4),
            vec((term(CodeSystemId::Snomed), date()), 0..3),
            vec((term(CodeSystemId::Snomed), proptest::option::of("[a-z ]{1,12}")), 0..2),
            vec((term(CodeSystemId::Loinc), "[ -~]{1,20}", date()), 0..4),
        ),
        (
            pick("administrative_gender"),
            pick("marital_status"),
            proptest::option::of(0u32..100),
            proptest::option::of("[0-9]{3,6}"),
            date(),
        ),
        proptest::option::of((pick("metastasis_site"), proptest::option::of("[0-9]{1,2}%"), date())),
        proptest::option::of((prop::sample::select(panel_keywords), date(), date())),
    )
        .prop_map(|(dx, rx, demo, specimen, panel)| {
            let (diagnoses, diagnosis_date, mi, sites, (t, n, m, stage), (hist, grade, lat, status)) = dx;
            let (meds, procs, allergies, obs) = rx;
            let (gender, marital, age, mrn, note_date) = demo;
            let mut v = ClinicalVariables {
                cancer_diagnosis: diagnoses.into_iter().map(|term| DiagnosisTerm { term, code: None }).collect(),
                diagnosis_date,
                metastasis_indication: mi,
                metastasis_sites: sites,
                tnm_t: t,
                tnm_n: n,
                tnm_m: m,
                numerical_stage: stage,
                histology: hist,
                histology_grade: grade,
                laterality: lat,
                disease_status: status,
                medications: meds.into_iter().map(|(name, dosage_text)| MedicationItem { name, dosage_text }).collect(),
                procedures: procs.into_iter().map(|(name, date)| ProcedureItem { name, date }).collect(),
                allergies: allergies.into_iter().map(|(substance, reaction)| AllergyItem { substance, reaction }).collect(),
                observations: obs.into_iter().map(|(name, value, date)| ObservationItem { name, value, date }).collect(),
                note_date,
                specimen: specimen.map(|(source, viability, collected)| SpecimenInfo {
                    source,
                    viability,
                    collected,
                    ..Default::default()
                }),
                lab_panel: panel.map(|(keyword, collected, issued)| LabPanel {
                    keyword,
                    status: Some("final".into()),
                    collected,
                    issued,
                    ..Default::default()
                }),
                ..Default::default()
            };
            v.demographics.gender = gender;
            v.demographics.marital_status = marital;
            v.demographics.age = age;
            v.demographics.mrn = mrn;
            v
        })
}

/// Codings the builder writes from fixed vocabularies rather than the lookup table.
const STRUCTURAL: &[&str] = &[
    OBSERVATION_CATEGORY_URI,
    V2_0074_URI,
    CONDITION_CLINICAL_URI,
    CONDITION_VERIFICATION_URI,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bundles_are_closed_and_valid(v in variables()) {
        let b = build_bundle(cat(), &v);
        prop_assert_eq!(b.closure_violation(), None);
        for r in &b.entries {
            prop_assert_eq!(check_invariants(r), Ok(()));
        }
        let reparsed = Bundle::parse(&b.serialize()).unwrap();
        prop_assert_eq!(&reparsed, &b);
    }

    #[test]
    fn no_fabricated_codings(v in variables()) {
        let b = build_bundle(cat(), &v);
        for r in &b.entries {
            for c in all_codings(r) {
                if STRUCTURAL.contains(&c.system.as_str()) {
                    continue;
                }
                let e = CodeSystemId::from_uri(&c.system).and_then(|s| cat().codes.lookup(s, &c.code));
                prop_assert!(e.is_some(), "{:?} not in table", c);
                prop_assert_eq!(c.display.as_deref(), Some(e.unwrap().display.as_str()));
            }
        }
    }

    #[test]
    fn every_resource_points_at_the_patient(v in variables()) {
        let b = build_bundle(cat(), &v);
        let patients = of_type(&b, ResourceType::Patient);
        prop_assert_eq!(patients.len(), 1);
        let target = format!("Patient/{}", patients[0].id());
        for r in b.entries.iter().filter(|r| r.resource_type() != ResourceType::Patient) {
            let subjects: Vec<String> = references(r)
                .into_iter()
                .filter(|(_, x)| x.reference.starts_with("Patient/"))
                .map(|(_, x)| x.reference.clone())
                .collect();
            prop_assert_eq!(subjects, vec![target.clone()], "{}", r.id());
        }
    }

    #[test]
    fn building_is_deterministic(v in variables()) {
        let a = build_bundle(cat(), &v).serialize();
        prop_assert_eq!(build_bundle(cat(), &v.clone()).serialize(), a);
    }
}
