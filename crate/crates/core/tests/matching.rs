mod support;

use std::path::Path;

use num_rational::Ratio;
use proptest::prelude::*;

use onco_core::catalog::Catalog;
use onco_core::fhir::*;
use onco_core::matching::*;
use onco_core::mcode::BiomarkerStatus;
use onco_core::registry::*;

use support::gen;
use support::oracle::{self, OracleResult, V};

fn registry() -> Registry {
    Registry::load(&support::data_dir().join("trials.ndjson")).unwrap()
}

fn breast_bundle() -> Bundle {
    Bundle::parse(&support::fixture("breast-mcode.json")).unwrap()
}

fn to_v(v: Verdict) -> V {
    match v {
        Verdict::Satisfied => V::Sat,
        Verdict::Violated => V::Vio,
        Verdict::Unknown => V::Unk,
    }
}

fn same_as_oracle(r: &MatchResult, o: &OracleResult) -> Result<(), String> {
    let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(format!("{}: {what} differs", r.trial_id)) };
    check(r.trial_id == o.trial_id, "trialId")?;
    check(r.likelihood.rank() == o.tier, "likelihood")?;
    check(r.score == Ratio::new(o.score.0, o.score.1), "score")?;
    check(r.matched_cohort.as_deref() == Some(o.cohort.as_str()), "matchedCohort")?;
    let vs: Vec<V> = r.per_criterion.iter().map(|(_, v)| to_v(*v)).collect();
    check(vs == o.verdicts, "perCriterion")?;
    check(r.cohorts.len() == o.cohorts.len(), "cohort count")?;
    for (c, oc) in r.cohorts.iter().zip(&o.cohorts) {
        let vs: Vec<V> = c.verdicts.iter().map(|(_, v)| to_v(*v)).collect();
        check(c.name == oc.name && c.likelihood.rank() == oc.tier, "cohort outcome")?;
        check(c.score == Ratio::new(oc.score.0, oc.score.1) && vs == oc.verdicts, "cohort verdicts")?;
    }
    Ok(())
}

fn same_list(rs: &[MatchResult], os: &[OracleResult]) -> Result<(), String> {
    if rs.len() != os.len() {
        return Err(format!("length {} vs oracle {}", rs.len(), os.len()));
    }
    rs.iter().zip(os).try_for_each(|(r, o)| same_as_oracle(r, o))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn match_all_equals_brute_force(reg in gen::registry(50), f in gen::facts(), filter in gen::filter()) {
        let got = match_all(&reg, &f, &filter);
        let (kept, dropped) = oracle::match_everything(&reg, &f, &filter);
        prop_assert_eq!(same_list(&got.results, &kept), Ok(()));
        prop_assert_eq!(same_list(&got.no_match, &dropped), Ok(()));
    }
}

fn pick_verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::Satisfied), Just(Verdict::Violated), Just(Verdict::Unknown)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn resolving_an_unknown_is_monotone(
        mut vs in proptest::collection::vec(pick_verdict(), 1..10),
        at in any::<prop::sample::Index>(),
    ) {
        let i = at.index(vs.len());
        vs[i] = Verdict::Unknown;
        let before = Likelihood::of(&vs);
        let s_before = cohort_score(&vs);
        let mut up = vs.clone();
        up[i] = Verdict::Satisfied;
        let mut down = vs.clone();
        down[i] = Verdict::Violated;
        prop_assert!(Likelihood::of(&up).rank() >= before.rank());
        prop_assert!(Likelihood::of(&down).rank() <= before.rank());
        prop_assert!(cohort_score(&up) > s_before);
        prop_assert!(cohort_score(&down) < s_before);
    }

    #[test]
    fn learning_facts_only_resolves_unknowns(
        f in gen::facts(),
        g in gen::facts(),
        cs in proptest::collection::vec(gen::criterion(), 1..8),
    ) {
        let h = fill_unknowns(&f, &g);
        for c in &cs {
            let before = evaluate(c, &f);
            if before != Verdict::Unknown {
                prop_assert_eq!(evaluate(c, &h), before, "{:?}", c);
            }
        }
    }

    #[test]
    fn scores_are_bounded(reg in gen::registry(10), f in gen::facts()) {
        for t in reg.trials() {
            let r = match_trial(t, &f);
            prop_assert!(r.score <= Ratio::from_integer(1));
            if r.likelihood == Likelihood::LikelyMatch {
                prop_assert_eq!(r.score, Ratio::from_integer(1));
            }
            for c in &r.cohorts {
                prop_assert!(c.score <= Ratio::from_integer(1));
            }
        }
    }

    #[test]
    fn ranking_is_sorted_and_deterministic(reg in gen::registry(30), f in gen::facts()) {
        let a = match_all(&reg, &f, &TrialFilter::default());
        let b = match_all(&reg, &f, &TrialFilter::default());
        prop_assert_eq!(&a, &b);
        for w in a.results.windows(2) {
            prop_assert_eq!(rank_order(&w[0], &w[1]), std::cmp::Ordering::Less);
        }
        prop_assert_eq!(a.results.len() + a.no_match.len(), reg.len());
    }
}

fn unknown(s: &str) -> bool {
    s.is_empty() || s == "Not Documented"
}

/// `f` with each unknown fact taken from `g`; known facts are untouched.
fn fill_unknowns(f: &PatientFacts, g: &PatientFacts) -> PatientFacts {
    let mut h = f.clone();
    let text = |a: &mut String, b: &String| {
        if unknown(a) {
            *a = b.clone();
        }
    };
    if h.diagnoses.is_empty() {
        h.diagnoses = g.diagnoses.clone();
    }
    text(&mut h.numerical_stage, &g.numerical_stage);
    text(&mut h.tnm_t, &g.tnm_t);
    text(&mut h.tnm_n, &g.tnm_n);
    text(&mut h.tnm_m, &g.tnm_m);
    text(&mut h.histology_grade, &g.histology_grade);
    text(&mut h.laterality, &g.laterality);
    text(&mut h.disease_status, &g.disease_status);
    for (k, v) in &g.biomarkers {
        h.biomarkers.entry(k.clone()).or_insert(*v);
    }
    if h.prior_therapies.is_none() {
        h.prior_therapies = g.prior_therapies.clone();
    }
    if h.metastasis_sites.is_none() {
        h.metastasis_sites = g.metastasis_sites.clone();
    }
    if h.age.is_none() {
        h.age = g.age;
    }
    if matches!(h.gender.as_deref(), None | Some("unknown")) {
        h.gender = g.gender.clone();
    }
    h
}

fn text_criterion(kind: CriterionKind, field: Field, op: Op, value: &str) -> Criterion {
    Criterion::new(kind, field, op, CriterionValue::Text(value.into()))
}

#[test]
fn evaluate_examples() {
    let f = PatientFacts {
        diagnoses: gen::set(&["breast cancer"]),
        prior_therapies: Some(gen::set(&["trastuzumab"])),
        ..PatientFacts::default()
    };
    let dx = text_criterion(CriterionKind::Inclusion, Field::Diagnosis, Op::Equals, "Breast Cancer");
    assert_eq!(evaluate(&dx, &f), Verdict::Satisfied);
    let mut her2 = text_criterion(CriterionKind::Inclusion, Field::Biomarker, Op::Has, "positive");
    her2.biomarker = Some("HER2".into());
    assert_eq!(evaluate(&her2, &f), Verdict::Unknown);
    let tx = text_criterion(CriterionKind::Exclusion, Field::PriorTherapy, Op::Has, "trastuzumab");
    assert_eq!(evaluate(&tx, &f), Verdict::Violated);
}

fn three_cohort_trial() -> TrialRecord {
    registry().get("TRIAL-0001").unwrap().clone()
}

#[test]
fn three_cohort_cohort_one_is_likely() {
    let f = PatientFacts {
        diagnoses: gen::set(&["breast cancer"]),
        biomarkers: gen::biomarkers(&[("HER2", BiomarkerStatus::Positive)]),
        prior_therapies: Some(gen::set(&["trastuzumab"])),
        disease_status: "Progressing".into(),
        ..PatientFacts::default()
    };
    let r = match_trial(&three_cohort_trial(), &f);
    assert_eq!(r.likelihood, Likelihood::LikelyMatch);
    assert_eq!(r.matched_cohort.as_deref(), Some("Cohort 1"));
    assert_eq!(r.score, Ratio::from_integer(1));
    assert_eq!(r.cohorts.len(), 2);
    assert_eq!(r.cohorts[1].likelihood, Likelihood::NoMatch);
}

#[test]
fn three_cohort_breast_only_is_possible() {
    let f = PatientFacts {
        diagnoses: gen::set(&["breast cancer"]),
        ..PatientFacts::default()
    };
    let r = match_trial(&three_cohort_trial(), &f);
    assert_eq!(r.likelihood, Likelihood::PossibleMatch);
    // Both cohorts are possible; the first declared wins.
    assert_eq!(r.matched_cohort.as_deref(), Some("Cohort 1"));
    assert_eq!(r.score, Ratio::new(5, 8));
}

#[test]
fn three_cohort_lung_is_no_match() {
    let f = PatientFacts {
        diagnoses: gen::set(&["lung cancer"]),
        ..PatientFacts::default()
    };
    assert_eq!(match_trial(&three_cohort_trial(), &f).likelihood, Likelihood::NoMatch);
}

#[test]
fn facts_from_breast_fixture() {
    let cat = Catalog::global();
    let f = facts_from_bundle(cat, &breast_bundle()).unwrap();
    assert_eq!(f.biomarkers.get("HER2"), Some(&BiomarkerStatus::Positive));
    assert!(f.diagnoses.contains("breast cancer"));
    assert_eq!(f.disease_status, "Progressing");
    assert!(f.prior_therapies.as_ref().unwrap().contains("trastuzumab"));
    assert_eq!(f.gender.as_deref(), Some("female"));
}

#[test]
fn patient_only_bundle_is_all_unknown() {
    let cat = Catalog::global();
    let p = Resource::Patient(Patient {
        id: "p1".into(),
        ..Default::default()
    });
    let b = assemble_bundle(vec![p], BundleType::Collection).unwrap();
    assert_eq!(facts_from_bundle(cat, &b).unwrap(), PatientFacts::default());
}

#[test]
fn bundle_without_patient_is_rejected() {
    let cat = Catalog::global();
    let b = Bundle::new(BundleType::Collection, Vec::new());
    assert_eq!(facts_from_bundle(cat, &b), Err(MatchError::NoPatient));
}

#[test]
fn fixture_registry_with_breast_facts() {
    let cat = Catalog::global();
    let reg = registry();
    let f = facts_from_bundle(cat, &breast_bundle()).unwrap();
    let s = match_all(&reg, &f, &TrialFilter::default());
    assert_eq!(s.results.len(), 215);
    let head = &s.results[0];
    assert_eq!(head.likelihood, Likelihood::LikelyMatch);
    let t = reg.get(&head.trial_id).unwrap();
    assert!(t.conditions.iter().any(|c| c.contains("Breast")));
    let (kept, dropped) = oracle::match_everything(&reg, &f, &TrialFilter::default());
    assert_eq!(same_list(&s.results, &kept), Ok(()));
    assert_eq!(same_list(&s.no_match, &dropped), Ok(()));
}

#[test]
fn all_unknown_facts_give_possible_matches() {
    let reg = registry();
    let s = match_all(&reg, &PatientFacts::default(), &TrialFilter::default());
    assert!(s.no_match.is_empty());
    assert_eq!(s.results.len(), reg.len());
    assert!(s.results.iter().all(|r| r.likelihood == Likelihood::PossibleMatch));
    for w in s.results.windows(2) {
        assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].trial_id < w[1].trial_id));
    }
}

#[test]
fn searchset_paging() {
    let cat = Catalog::global();
    let reg = registry();
    let f = facts_from_bundle(cat, &breast_bundle()).unwrap();
    let s = match_all(&reg, &f, &TrialFilter::default());
    let b = to_searchset(&reg, &s.results, 1, 10).unwrap();
    assert_eq!(b.bundle_type, BundleType::Searchset);
    assert_eq!(b.total, Some(215));
    assert_eq!(b.entries.len(), 10);
    assert_eq!(b.serialize(), support::fixture("fig12-searchset.json"));
    let empty = to_searchset(&reg, &[], 1, 10).unwrap();
    assert_eq!((empty.total, empty.entries.len()), (Some(0), 0));
    assert!(to_searchset(&reg, &s.results, 0, 10).is_err());
}

#[test]
fn research_study_carries_match_extension() {
    let reg = registry();
    let t = reg.get("TRIAL-0002").unwrap();
    let r = match_trial(t, &PatientFacts::default());
    let s = research_study(t, Some(&r));
    assert_eq!(s.id, "TRIAL-0002");
    assert_eq!(s.status, Some(ResearchStudyStatus::ClosedToAccrual));
    let ext = s.extension.iter().find(|e| e.url == MATCH_EXTENSION).unwrap();
    assert_eq!(ext.child("likelihood").unwrap().value_string.as_deref(), Some("PossibleMatch"));
    let outcomes = ext.extension.iter().filter(|e| e.url == "cohortOutcome").count();
    assert_eq!(outcomes, t.cohorts.len());
    check_invariants(&Resource::ResearchStudy(s)).unwrap();
}

#[test]
fn external_matcher_reads_searchset() {
    let client = MockMatcher::replying(support::fixture("fig12-searchset.json"));
    let rs = external_match(&client, &breast_bundle()).unwrap();
    assert_eq!(rs.len(), 10);
    assert_eq!(rs[0].trial_id, "TRIAL-0001");
    assert_eq!(rs[0].likelihood, Likelihood::LikelyMatch);
    assert_eq!(rs[0].matched_cohort.as_deref(), Some("Cohort 1"));
}

#[test]
fn external_matcher_failures() {
    let b = breast_bundle();
    let down = MockMatcher::failing(MatchError::Transport("connection refused".into()));
    assert_eq!(external_match(&down, &b), Err(MatchError::Transport("connection refused".into())));
    for body in [
        "not json",
        r#"{"type": "searchset"}"#,
        r#"{"resourceType": "Bundle", "type": "collection"}"#,
        r#"{"resourceType": "Bundle", "type": "searchset", "entry": [{"resource": {"resourceType": "Patient", "id": "x"}}]}"#,
        r#"{"resourceType": "Bundle", "type": "searchset", "entry": [{"resource": {"resourceType": "ResearchStudy", "id": "x"}}]}"#,
    ] {
        let got = external_match(&MockMatcher::replying(body), &b);
        assert!(matches!(got, Err(MatchError::MalformedResponse(_))), "{body}: {got:?}");
    }
}

#[test]
fn fixture_registry_path_is_stable() {
    assert!(Path::new(&support::data_dir().join("trials.ndjson")).exists());
}
