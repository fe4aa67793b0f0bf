//! Patient facts, three-valued criterion evaluation, trial ranking and searchset output.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::builder::EXTENSION_PREFIX;
use crate::catalog::Catalog;
use crate::fhir::{
    Bundle, BundleType, CodeableConcept, Coding, DateOrInstant, Extension, Identifier, Resource,
    ResearchStudy, ResearchStudyStatus, RESEARCH_PHASE_URI,
};
use crate::mcode::{GenomicsExtension, BiomarkerStatus, STAGE_GROUP_CODE, TNM_M_CODE, TNM_N_CODE, TNM_T_CODE};
use crate::registry::{
    paginate, Criterion, CriterionKind, CriterionValue, Field, Op, PageError, Recruitment, Registry,
    TrialFilter, TrialRecord,
};
use crate::terminology::{normalize_term, CodeSystemId, NOT_DOCUMENTED};

pub const MATCH_EXTENSION: &str = "urn:onco:extension:match";
pub const TRIAL_ID_SYSTEM: &str = "urn:onco:trial";

/// Weight an Unknown verdict contributes to a cohort score.
pub const UNKNOWN_WEIGHT: (u64, u64) = (1, 2);

/// What matching knows about one patient. `None` and "Not Documented" mean unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PatientFacts {
    /// Normalized diagnosis terms, including lexicon synonyms of coded diagnoses.
    pub diagnoses: BTreeSet<String>,
    pub numerical_stage: String,
    pub tnm_t: String,
    pub tnm_n: String,
    pub tnm_m: String,
    /// Upper-cased biomarker name to status.
    pub biomarkers: BTreeMap<String, BiomarkerStatus>,
    /// Normalized treatment terms; `None` when no treatment is recorded.
    pub prior_therapies: Option<BTreeSet<String>>,
    /// Value-set members; `None` unless metastatic status is documented.
    pub metastasis_sites: Option<BTreeSet<String>>,
    pub histology_grade: String,
    pub laterality: String,
    pub disease_status: String,
    pub age: Option<u32>,
    pub gender: Option<String>,
}

impl Default for PatientFacts {
    fn default() -> Self {
        let nd = || NOT_DOCUMENTED.to_string();
        PatientFacts {
            diagnoses: BTreeSet::new(),
            numerical_stage: nd(),
            tnm_t: nd(),
            tnm_n: nd(),
            tnm_m: nd(),
            biomarkers: BTreeMap::new(),
            prior_therapies: None,
            metastasis_sites: None,
            histology_grade: nd(),
            laterality: nd(),
            disease_status: nd(),
            age: None,
            gender: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("bundle has no Patient entry")]
    NoPatient,
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

fn loinc_codes(c: Option<&CodeableConcept>) -> impl Iterator<Item = &str> {
    c.into_iter()
        .flat_map(|c| c.codings.iter())
        .filter(|c| c.system == CodeSystemId::Loinc.uri())
        .map(|c| c.code.as_str())
}

fn concept_text(c: Option<&CodeableConcept>) -> Option<String> {
    let c = c?;
    c.text.clone().or_else(|| c.codings.iter().find_map(|k| k.display.clone()))
}

/// Normalized names for a concept: text, displays, and lexicon synonyms of its codings.
fn concept_terms(cat: &Catalog, c: &CodeableConcept) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(t) = &c.text {
        out.push(normalize_term(t));
    }
    for k in &c.codings {
        if let Some(d) = &k.display {
            out.push(normalize_term(d));
        }
        if let Some(e) = CodeSystemId::from_uri(&k.system).and_then(|s| cat.codes.lookup(s, &k.code)) {
            out.push(normalize_term(&e.display));
            out.extend(e.synonyms.iter().cloned());
        }
    }
    out.retain(|s| !s.is_empty());
    out
}

fn ext_values<'a>(exts: &'a [Extension], name: &str) -> impl Iterator<Item = &'a str> + 'a {
    let url = format!("{EXTENSION_PREFIX}{name}");
    exts.iter()
        .filter(move |e| e.url == url)
        .filter_map(|e| e.value_string.as_deref())
}

fn known(s: &str) -> bool {
    !s.is_empty() && s != NOT_DOCUMENTED
}

fn dates_of(r: &Resource) -> Vec<&DateOrInstant> {
    match r {
        Resource::Condition(c) => c.onset.iter().collect(),
        Resource::Observation(o) => o.effective.iter().collect(),
        Resource::Procedure(p) => p.performed.iter().collect(),
        Resource::Specimen(s) => s.collection.iter().filter_map(|c| c.collected.as_ref()).collect(),
        Resource::DiagnosticReport(d) => d.effective.iter().chain(d.issued.iter()).collect(),
        _ => Vec::new(),
    }
}

fn whole_years(birth: NaiveDate, at: NaiveDate) -> Option<u32> {
    let mut years = at.year() - birth.year();
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    u32::try_from(years).ok()
}

/// Projects an mCODE bundle onto the facts matching reads.
pub fn facts_from_bundle(cat: &Catalog, b: &Bundle) -> Result<PatientFacts, MatchError> {
    let patient = b.patient().ok_or(MatchError::NoPatient)?;
    let mut f = PatientFacts {
        gender: patient.gender.map(|g| g.as_str().to_string()),
        ..PatientFacts::default()
    };
    let mut therapies = BTreeSet::new();
    let mut metastasis_documented = false;
    let mut sites = BTreeSet::new();
    for r in &b.entries {
        match r {
            Resource::Condition(c) => {
                if let Some(code) = &c.code {
                    f.diagnoses.extend(concept_terms(cat, code));
                }
                for s in &c.stage {
                    if let Some(t) = concept_text(s.summary.as_ref()) {
                        if !known(&f.numerical_stage) {
                            f.numerical_stage = t;
                        }
                    }
                }
                for v in ext_values(&c.extension, "metastasisIndication") {
                    metastasis_documented |= v == "Yes" || v == "No";
                }
                sites.extend(ext_values(&c.extension, "metastasisSite").map(str::to_string));
                if let Some(g) = ext_values(&c.extension, "histologyGrade").next() {
                    f.histology_grade = g.to_string();
                }
                if let Some(l) = ext_values(&c.extension, "laterality").next() {
                    f.laterality = l.to_string();
                }
            }
            Resource::Observation(o) => {
                let value = concept_text(o.value_codeable_concept.as_ref()).or_else(|| o.value_string.clone());
                let codes: Vec<&str> = loinc_codes(o.code.as_ref()).collect();
                let slot = if codes.contains(&TNM_T_CODE) {
                    Some(&mut f.tnm_t)
                } else if codes.contains(&TNM_N_CODE) {
                    Some(&mut f.tnm_n)
                } else if codes.contains(&TNM_M_CODE) {
                    Some(&mut f.tnm_m)
                } else if codes.contains(&STAGE_GROUP_CODE) {
                    Some(&mut f.numerical_stage)
                } else if codes
                    .iter()
                    .any(|c| cat.disease_status_codes.iter().any(|(s, k)| *s == CodeSystemId::Loinc && k == c))
                {
                    Some(&mut f.disease_status)
                } else {
                    None
                };
                if let (Some(slot), Some(v)) = (slot, value) {
                    *slot = v;
                }
                for e in &o.extension {
                    if let Some(g) = GenomicsExtension::from_extension(e) {
                        if g.status != BiomarkerStatus::Indeterminate {
                            f.biomarkers.insert(g.biomarker_name.to_uppercase(), g.status);
                        }
                    }
                }
            }
            Resource::MedicationRequest(m) => {
                if let Some(c) = &m.medication {
                    therapies.extend(concept_terms(cat, c));
                }
            }
            Resource::Procedure(p) => {
                if let Some(c) = &p.code {
                    therapies.extend(concept_terms(cat, c));
                }
            }
            _ => {}
        }
    }
    if !therapies.is_empty() {
        f.prior_therapies = Some(therapies);
    }
    if f.tnm_m.starts_with("M0") || f.tnm_m.starts_with("M1") {
        metastasis_documented = true;
    }
    if metastasis_documented || !sites.is_empty() {
        f.metastasis_sites = Some(sites);
    }
    let latest = b
        .entries
        .iter()
        .flat_map(dates_of)
        .filter_map(|d| d.date())
        .max();
    f.age = match (&patient.birth_date, latest) {
        (Some(birth), Some(at)) => match birth.date() {
            Some(bd) if matches!(birth, DateOrInstant::Date(_) | DateOrInstant::Instant(_)) => {
                whole_years(bd, at)
            }
            _ => u32::try_from(at.year() - birth.year()).ok(),
        },
        _ => None,
    };
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Satisfied,
    Violated,
    Unknown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Satisfied => "Satisfied",
            Verdict::Violated => "Violated",
            Verdict::Unknown => "Unknown",
        }
    }
}

/// Ordinal for stage comparisons: roman group then sub-letter.
pub fn stage_rank(stage: &str) -> Option<u32> {
    let s = stage.trim().to_ascii_uppercase();
    let roman_len = s.chars().take_while(|c| matches!(c, 'I' | 'V' | '0')).count();
    let (roman, rest) = s.split_at(roman_len);
    let base = match roman {
        "0" => 0,
        "I" => 1,
        "II" => 2,
        "III" => 3,
        "IV" => 4,
        _ => return None,
    };
    let sub = match rest.chars().next() {
        None => 0,
        Some(c @ 'A'..='D') => c as u32 - 'A' as u32 + 1,
        Some(_) => return None,
    };
    Some(base * 10 + sub)
}

fn same(a: &str, b: &str) -> bool {
    normalize_term(a) == normalize_term(b)
}

/// Word-bounded containment, so "Brain" finds "Brain/Central Nervous System (CNS)".
fn mentions(haystack: &str, needle: &str) -> bool {
    let n = normalize_term(needle);
    !n.is_empty() && format!(" {} ", normalize_term(haystack)).contains(&format!(" {n} "))
}

fn categorical(f: &PatientFacts, field: Field) -> Option<&str> {
    let v = match field {
        Field::Stage => &f.numerical_stage,
        Field::TnmT => &f.tnm_t,
        Field::TnmN => &f.tnm_n,
        Field::TnmM => &f.tnm_m,
        Field::HistologyGrade => &f.histology_grade,
        Field::Laterality => &f.laterality,
        Field::DiseaseStatus => &f.disease_status,
        Field::Gender => return f.gender.as_deref().filter(|g| *g != "unknown"),
        _ => return None,
    };
    known(v).then_some(v.as_str())
}

/// The criterion's predicate on the facts; `None` when a referenced fact is missing.
fn predicate(c: &Criterion, f: &PatientFacts) -> Option<bool> {
    let terms = c.value.terms();
    match c.field {
        Field::Diagnosis => {
            if f.diagnoses.is_empty() {
                return None;
            }
            Some(terms.iter().any(|t| f.diagnoses.contains(&normalize_term(t))))
        }
        Field::Biomarker => {
            let name = c.biomarker.as_deref()?.to_uppercase();
            let status = f.biomarkers.get(&name)?.as_str();
            let hit = terms.iter().any(|t| same(t, status));
            Some(if c.op == Op::Lacks { !hit } else { hit })
        }
        Field::PriorTherapy | Field::MetastasisSite => {
            let set = if c.field == Field::PriorTherapy {
                f.prior_therapies.as_ref()?
            } else {
                f.metastasis_sites.as_ref()?
            };
            let hit = terms.iter().any(|t| {
                if c.field == Field::PriorTherapy {
                    set.contains(&normalize_term(t))
                } else {
                    set.iter().any(|s| mentions(s, t))
                }
            });
            Some(if c.op == Op::Lacks { !hit } else { hit })
        }
        Field::Age => {
            let age = f.age?;
            match (c.op, &c.value) {
                (Op::Ge, CriterionValue::Number(n)) => Some(age >= *n),
                (Op::Le, CriterionValue::Number(n)) => Some(age <= *n),
                _ => None,
            }
        }
        field => {
            let v = categorical(f, field)?;
            if c.op == Op::AtLeastStage {
                let want = stage_rank(terms.first()?)?;
                let have = stage_rank(v)?;
                let want_base = want / 10 * 10;
                // "at least II" accepts IIA; "at least IIB" does not.
                return Some(have >= if want % 10 == 0 { want_base } else { want });
            }
            Some(terms.iter().any(|t| same(t, v)))
        }
    }
}

pub fn evaluate(c: &Criterion, f: &PatientFacts) -> Verdict {
    match (predicate(c, f), c.kind) {
        (None, _) => Verdict::Unknown,
        (Some(true), CriterionKind::Inclusion) | (Some(false), CriterionKind::Exclusion) => Verdict::Satisfied,
        (Some(false), CriterionKind::Inclusion) | (Some(true), CriterionKind::Exclusion) => Verdict::Violated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Likelihood {
    LikelyMatch,
    PossibleMatch,
    NoMatch,
}

impl Likelihood {
    pub fn rank(&self) -> u8 {
        match self {
            Likelihood::LikelyMatch => 2,
            Likelihood::PossibleMatch => 1,
            Likelihood::NoMatch => 0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Likelihood::LikelyMatch => "LikelyMatch",
            Likelihood::PossibleMatch => "PossibleMatch",
            Likelihood::NoMatch => "NoMatch",
        }
    }

    /// Badge text shown in the finder.
    pub fn label(&self) -> &'static str {
        match self {
            Likelihood::LikelyMatch => "Likely Match",
            Likelihood::PossibleMatch => "Possible Match",
            Likelihood::NoMatch => "No Match",
        }
    }

    pub fn parse(s: &str) -> Option<Likelihood> {
        [Likelihood::LikelyMatch, Likelihood::PossibleMatch, Likelihood::NoMatch]
            .into_iter()
            .find(|l| l.as_str() == s)
    }

    pub fn of(verdicts: &[Verdict]) -> Likelihood {
        if verdicts.contains(&Verdict::Violated) {
            Likelihood::NoMatch
        } else if verdicts.iter().all(|v| *v == Verdict::Satisfied) {
            Likelihood::LikelyMatch
        } else {
            Likelihood::PossibleMatch
        }
    }
}

/// (#Satisfied + w·#Unknown) / #criteria; an empty cohort scores 1.
pub fn cohort_score(verdicts: &[Verdict]) -> Ratio<u64> {
    if verdicts.is_empty() {
        return Ratio::from_integer(1);
    }
    let (wn, wd) = UNKNOWN_WEIGHT;
    let sat = verdicts.iter().filter(|v| **v == Verdict::Satisfied).count() as u64;
    let unk = verdicts.iter().filter(|v| **v == Verdict::Unknown).count() as u64;
    Ratio::new(sat * wd + unk * wn, verdicts.len() as u64 * wd)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortOutcome {
    pub name: String,
    pub likelihood: Likelihood,
    pub score: Ratio<u64>,
    pub verdicts: Vec<(Criterion, Verdict)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub trial_id: String,
    pub likelihood: Likelihood,
    pub score: Ratio<u64>,
    /// Verdicts of the chosen cohort.
    pub per_criterion: Vec<(Criterion, Verdict)>,
    pub matched_cohort: Option<String>,
    /// Every cohort, in declaration order; empty for externally produced results.
    pub cohorts: Vec<CohortOutcome>,
}

fn fraction(r: &Ratio<u64>) -> Value {
    json!({
        "fraction": format!("{}/{}", r.numer(), r.denom()),
        "value": *r.numer() as f64 / *r.denom() as f64,
    })
}

fn verdicts_value(v: &[(Criterion, Verdict)]) -> Value {
    Value::Array(
        v.iter()
            .map(|(c, verdict)| json!({"criterion": c, "verdict": verdict}))
            .collect(),
    )
}

impl MatchResult {
    pub fn to_value(&self) -> Value {
        json!({
            "trialId": self.trial_id,
            "likelihood": self.likelihood.as_str(),
            "label": self.likelihood.label(),
            "score": fraction(&self.score),
            "matchedCohort": self.matched_cohort,
            "perCriterion": verdicts_value(&self.per_criterion),
            "cohorts": self.cohorts.iter().map(|c| json!({
                "name": c.name,
                "likelihood": c.likelihood.as_str(),
                "score": fraction(&c.score),
                "perCriterion": verdicts_value(&c.verdicts),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Best cohort by likelihood; ties go to the earlier cohort.
pub fn match_trial(t: &TrialRecord, f: &PatientFacts) -> MatchResult {
    let cohorts: Vec<CohortOutcome> = t
        .cohorts
        .iter()
        .map(|c| {
            let verdicts: Vec<(Criterion, Verdict)> =
                c.criteria.iter().map(|k| (k.clone(), evaluate(k, f))).collect();
            let vs: Vec<Verdict> = verdicts.iter().map(|(_, v)| *v).collect();
            CohortOutcome {
                name: c.name.clone(),
                likelihood: Likelihood::of(&vs),
                score: cohort_score(&vs),
                verdicts,
            }
        })
        .collect();
    let mut best: Option<&CohortOutcome> = None;
    for c in &cohorts {
        if best.is_none_or(|b| c.likelihood.rank() > b.likelihood.rank()) {
            best = Some(c);
        }
    }
    let (likelihood, score, per_criterion, matched_cohort) = match best {
        Some(b) => (b.likelihood, b.score, b.verdicts.clone(), Some(b.name.clone())),
        None => (Likelihood::NoMatch, Ratio::from_integer(0), Vec::new(), None),
    };
    MatchResult {
        trial_id: t.trial_id.clone(),
        likelihood,
        score,
        per_criterion,
        matched_cohort,
        cohorts,
    }
}

/// Likelihood rank, then score, both descending, then trialId.
pub fn rank_order(a: &MatchResult, b: &MatchResult) -> std::cmp::Ordering {
    b.likelihood
        .rank()
        .cmp(&a.likelihood.rank())
        .then_with(|| b.score.cmp(&a.score))
        .then_with(|| a.trial_id.cmp(&b.trial_id))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchSet {
    /// Likely and possible matches in rank order.
    pub results: Vec<MatchResult>,
    /// Trials ruled out, kept for diagnostics.
    pub no_match: Vec<MatchResult>,
}

pub fn match_all(reg: &Registry, f: &PatientFacts, filter: &TrialFilter) -> MatchSet {
    let (mut results, mut no_match): (Vec<MatchResult>, Vec<MatchResult>) = reg
        .filter(filter)
        .into_iter()
        .map(|t| match_trial(t, f))
        .partition(|r| r.likelihood != Likelihood::NoMatch);
    results.sort_by(rank_order);
    no_match.sort_by(rank_order);
    MatchSet { results, no_match }
}

fn study_status(r: Recruitment) -> ResearchStudyStatus {
    match r {
        Recruitment::Recruiting => ResearchStudyStatus::Active,
        Recruitment::ActiveNotRecruiting => ResearchStudyStatus::ClosedToAccrual,
        Recruitment::Completed => ResearchStudyStatus::Completed,
        Recruitment::Suspended => ResearchStudyStatus::TemporarilyClosedToAccrual,
    }
}

pub fn match_extension(r: &MatchResult) -> Extension {
    let mut children = vec![
        Extension::string("likelihood", r.likelihood.as_str()),
        Extension {
            url: "score".into(),
            value_decimal: Some(*r.score.numer() as f64 / *r.score.denom() as f64),
            ..Default::default()
        },
        Extension::string("scoreFraction", &format!("{}/{}", r.score.numer(), r.score.denom())),
    ];
    if let Some(c) = &r.matched_cohort {
        children.push(Extension::string("cohort", c));
    }
    // One child per cohort; its verdicts follow the cohort's criteria order.
    for c in &r.cohorts {
        let mut parts = vec![
            Extension::string("name", &c.name),
            Extension::string("likelihood", c.likelihood.as_str()),
        ];
        parts.extend(c.verdicts.iter().map(|(_, v)| Extension::string("verdict", v.as_str())));
        children.push(Extension::nested("cohortOutcome", parts));
    }
    Extension::nested(MATCH_EXTENSION, children)
}

pub fn research_study(t: &TrialRecord, r: Option<&MatchResult>) -> ResearchStudy {
    ResearchStudy {
        id: t.trial_id.clone(),
        extension: r.map(match_extension).into_iter().collect(),
        identifier: vec![Identifier {
            system: Some(TRIAL_ID_SYSTEM.into()),
            value: t.trial_id.clone(),
            extras: Default::default(),
        }],
        title: Some(t.title.clone()),
        status: Some(study_status(t.recruitment)),
        phase: Some(CodeableConcept {
            codings: vec![Coding::new(RESEARCH_PHASE_URI, t.phase.fhir_code(), None)],
            text: None,
            ..Default::default()
        }),
        category: vec![CodeableConcept::text(&t.study_type.as_str())],
        condition: t.conditions.iter().map(|c| CodeableConcept::text(c)).collect(),
        description: (!t.description.is_empty()).then(|| t.description.clone()),
        ..Default::default()
    }
}

/// One page of results as a searchset; `total` counts every result.
pub fn to_searchset(
    reg: &Registry,
    results: &[MatchResult],
    page: usize,
    page_size: usize,
) -> Result<Bundle, PageError> {
    let p = paginate(results, page, page_size)?;
    let entries = p
        .items
        .iter()
        .filter_map(|r| reg.get(&r.trial_id).map(|t| Resource::ResearchStudy(research_study(t, Some(r)))))
        .collect();
    let mut b = Bundle::new(BundleType::Searchset, entries);
    b.total = Some(results.len() as u64);
    Ok(b)
}

/// Client side of the external matcher wire contract: document bundle in, searchset out.
pub trait MatcherClient: Send + Sync {
    fn post_bundle(&self, body: &str) -> Result<String, MatchError>;
}

/// Replays one canned response.
#[derive(Debug, Clone)]
pub struct MockMatcher {
    pub response: Result<String, MatchError>,
}

impl MockMatcher {
    pub fn replying(body: impl Into<String>) -> Self {
        MockMatcher {
            response: Ok(body.into()),
        }
    }

    pub fn failing(e: MatchError) -> Self {
        MockMatcher { response: Err(e) }
    }
}

impl MatcherClient for MockMatcher {
    fn post_bundle(&self, _body: &str) -> Result<String, MatchError> {
        self.response.clone()
    }
}

fn parse_fraction(s: &str) -> Option<Ratio<u64>> {
    let (n, d) = s.split_once('/')?;
    let (n, d): (u64, u64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
    (d > 0 && n <= d).then(|| Ratio::new(n, d))
}

/// Reads match results out of a searchset of ResearchStudy entries.
pub fn parse_searchset(text: &str) -> Result<Vec<MatchResult>, MatchError> {
    let bad = |m: String| MatchError::MalformedResponse(m);
    let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if v.get("resourceType").is_none() {
        return Err(bad("missing resourceType".into()));
    }
    let b = Bundle::from_value(v).map_err(|e| bad(e.to_string()))?;
    if b.bundle_type != BundleType::Searchset {
        return Err(bad(format!("expected a searchset, got {}", b.bundle_type.as_str())));
    }
    let mut out = Vec::new();
    for (i, r) in b.entries.iter().enumerate() {
        let Resource::ResearchStudy(s) = r else {
            return Err(bad(format!("entry[{i}] is {}, not ResearchStudy", r.resource_type())));
        };
        let ext = s
            .extension
            .iter()
            .find(|e| e.url == MATCH_EXTENSION)
            .ok_or_else(|| bad(format!("entry[{i}] lacks the match extension")))?;
        let text_of = |url: &str| ext.child(url).and_then(|c| c.value_string.clone());
        let likelihood = text_of("likelihood")
            .as_deref()
            .and_then(Likelihood::parse)
            .ok_or_else(|| bad(format!("entry[{i}] has no valid likelihood")))?;
        let score = text_of("scoreFraction")
            .as_deref()
            .and_then(parse_fraction)
            .ok_or_else(|| bad(format!("entry[{i}] has no valid score")))?;
        out.push(MatchResult {
            trial_id: s.id.clone(),
            likelihood,
            score,
            per_criterion: Vec::new(),
            matched_cohort: text_of("cohort"),
            cohorts: Vec::new(),
        });
    }
    Ok(out)
}

pub fn external_match(client: &dyn MatcherClient, b: &Bundle) -> Result<Vec<MatchResult>, MatchError> {
    let reply = client.post_bundle(&b.serialize())?;
    parse_searchset(&reply)
}
