use std::sync::LazyLock;

use regex::Regex;

use crate::catalog::Catalog;
use crate::fhir::DateOrInstant;
use crate::terminology::{normalize_categorical, normalize_term, normalize_tnm, TnmAxis, NOT_DOCUMENTED, OTHER};

use super::dates::{find_dates, parse_date};
use super::segment::SectionedNote;
use super::{
    sanitize, AllergyItem, ClinicalVariables, DiagnosisTerm, LabPanel, MedicationItem,
    ObservationItem, ProcedureItem, SpecimenInfo,
};

static KEY_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^([A-Za-z][A-Za-z0-9 /()'+&.,#-]{0,59}?)\s*:(?:\s+(.*))?$").unwrap()
});
static BULLET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:[-*•]|\d{1,2}[.)])\s+(.*)$").unwrap());
static AGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(\d{1,3})[ -]?(?:year[ -]old|years[ -]old|yr[ -]old)\b").unwrap()
});
static GENDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(male|female|man|woman)\b").unwrap());
static MARITAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:is|was)\s+(never married|married|single|divorced|widowed|separated)\b")
        .unwrap()
});
static STAGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bstage\s+([0-4]|[IV]{1,4})([A-D]?[0-9]?)\b").unwrap());
static TNM_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:yp|yc|p|c|y|r|a)?([TNM])(?:is|[0-4]|[xX])(?:mi|[a-d])?[0-9]?(?:\([^()\s]{1,6}\))?")
        .unwrap()
});
static ICD10_CODE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b([A-TV-Z][0-9]{2}(?:\.[0-9A-Z]{1,4})?)\b").unwrap());
static EMPTY_PARENS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(\s*\)").unwrap());
static TRAILING_GLUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:[\s,;-]+|\b(?:on|dated|in)\b)+$").unwrap());
static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?](?:\s|$)").unwrap());

const OBSERVATION_SECTIONS: [&str; 7] = [
    "results",
    "interpretation",
    "imaging",
    "pathology",
    "biomarkers",
    "vital_signs",
    "disease_status",
];
const NARRATIVE_SECTIONS: [&str; 6] = [
    "residual",
    "history_of_present_illness",
    "social_history",
    "assessment_and_plan",
    "diagnosis",
    "past_medical_history",
];
const STAGING_SECTIONS: [&str; 4] = ["staging", "pathology", "diagnosis", "history_of_present_illness"];

#[derive(Debug, Clone, PartialEq)]
enum Line {
    Blank,
    Plain(String),
    Bullet(String),
    Key { key: String, value: String },
}

fn classify(line: &str) -> Line {
    let t = line.trim();
    if t.is_empty() {
        return Line::Blank;
    }
    let (content, bullet) = match BULLET.captures(t) {
        Some(c) => (c[1].trim().to_string(), true),
        None => (t.to_string(), false),
    };
    if let Some(c) = KEY_LINE.captures(&content) {
        return Line::Key {
            key: c[1].trim().to_string(),
            value: c.get(2).map(|m| m.as_str().trim().to_string()).unwrap_or_default(),
        };
    }
    if bullet {
        Line::Bullet(content)
    } else {
        Line::Plain(content)
    }
}

/// Lines of one block, with continuation lines folded into the preceding key value
/// where the section allows it.
fn lines(text: &str, continuations: bool) -> Vec<Line> {
    let mut out: Vec<Line> = Vec::new();
    for raw in text.lines() {
        let l = classify(raw);
        if continuations {
            if let (Line::Plain(p), Some(Line::Key { value, .. })) = (&l, out.last_mut()) {
                if !value.is_empty() {
                    value.push(' ');
                    value.push_str(p);
                    continue;
                }
            }
        }
        out.push(l);
    }
    out
}

fn split_items(s: &str) -> Vec<String> {
    s.split(';')
        .map(|x| x.trim().trim_end_matches('.').trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

/// Removes the first date from a phrase, returning the cleaned phrase and the date.
fn strip_date(s: &str) -> (String, Option<DateOrInstant>) {
    let Some((range, date)) = find_dates(s).into_iter().next() else {
        return (s.trim().to_string(), None);
    };
    let mut t = String::with_capacity(s.len());
    t.push_str(&s[..range.start]);
    t.push_str(&s[range.end..]);
    let t = EMPTY_PARENS.replace_all(&t, "");
    let t = TRAILING_GLUE.replace(t.trim(), "");
    (t.trim().to_string(), Some(date))
}

fn split_name_detail(s: &str) -> (String, Option<String>) {
    if let (Some(open), true) = (s.find('('), s.ends_with(')')) {
        let name = s[..open].trim();
        let detail = s[open + 1..s.len() - 1].trim();
        if !name.is_empty() && !detail.is_empty() {
            return (name.to_string(), Some(detail.to_string()));
        }
    }
    (s.to_string(), None)
}

fn has_dose(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
}

#[derive(Clone, Copy, PartialEq)]
enum ListKind {
    Medications,
    Procedures,
    Allergies,
    Diagnoses,
}

fn list_kind_for_header(key: &str) -> Option<ListKind> {
    let k = normalize_term(key);
    if k.contains("procedure") {
        Some(ListKind::Procedures)
    } else if k.contains("medication") || k.contains("prescribed") {
        Some(ListKind::Medications)
    } else if k.contains("allerg") {
        Some(ListKind::Allergies)
    } else if k.contains("diagnos") {
        Some(ListKind::Diagnoses)
    } else {
        None
    }
}

struct Extraction<'a> {
    cat: &'a Catalog,
    v: ClinicalVariables,
    tnm: [Option<String>; 3],
    stage: Option<String>,
    grade: Option<String>,
    laterality: Option<String>,
    metastasis: Option<String>,
    gender: Option<String>,
    marital: Option<String>,
    collected: Option<DateOrInstant>,
    issued: Option<DateOrInstant>,
    status: Option<String>,
    performer: Option<String>,
    indication: Option<String>,
    panel_hint: Vec<String>,
    specimen: Option<SpecimenInfo>,
}

impl<'a> Extraction<'a> {
    fn new(cat: &'a Catalog) -> Self {
        Extraction {
            cat,
            v: ClinicalVariables::default(),
            tnm: [None, None, None],
            stage: None,
            grade: None,
            laterality: None,
            metastasis: None,
            gender: None,
            marital: None,
            collected: None,
            issued: None,
            status: None,
            performer: None,
            indication: None,
            panel_hint: Vec::new(),
            specimen: None,
        }
    }

    fn specimen(&mut self) -> &mut SpecimenInfo {
        self.specimen.get_or_insert_with(SpecimenInfo::default)
    }

    fn add_list_item(&mut self, kind: ListKind, item: &str) {
        let item = item.trim().trim_end_matches('.').trim();
        if item.is_empty() {
            return;
        }
        match kind {
            ListKind::Medications => self.v.medications.push(MedicationItem {
                name: item.to_string(),
                dosage_text: has_dose(item).then(|| item.to_string()),
            }),
            ListKind::Procedures => {
                let (name, date) = strip_date(item);
                self.v.procedures.push(ProcedureItem { name, date });
            }
            ListKind::Allergies => {
                if normalize_term(item).contains("no known") {
                    return;
                }
                let (substance, reaction) = split_name_detail(item);
                self.v.allergies.push(AllergyItem { substance, reaction });
            }
            ListKind::Diagnoses => self.add_diagnosis(item),
        }
    }

    fn add_diagnosis(&mut self, raw: &str) {
        let (term, date) = strip_date(raw);
        if date.is_some() && self.v.diagnosis_date.is_none() {
            self.v.diagnosis_date = date;
        }
        for t in split_items(&term) {
            if !self.v.cancer_diagnosis.iter().any(|d| d.term == t) {
                self.v.cancer_diagnosis.push(DiagnosisTerm { term: t, code: None });
            }
        }
        if self.laterality.is_none() {
            let n = format!(" {} ", normalize_term(raw));
            if n.contains(" bilateral ") {
                self.laterality = Some("Bilateral".into());
            } else if n.contains(" left ") {
                self.laterality = Some("left".into());
            } else if n.contains(" right ") {
                self.laterality = Some("right".into());
            }
        }
    }

    fn scan_tnm(&mut self, text: &str) {
        let mut last_end: Option<usize> = None;
        for m in TNM_TOKEN.find_iter(text) {
            let before = text[..m.start()].chars().next_back();
            let glued = last_end == Some(m.start());
            if before.is_some_and(|c| c.is_alphanumeric()) && !glued {
                continue;
            }
            let after = text[m.end()..].chars().next();
            if after.is_some_and(|c| c.is_alphanumeric()) && !TNM_TOKEN.find_at(text, m.end()).is_some_and(|n| n.start() == m.end()) {
                continue;
            }
            last_end = Some(m.end());
            let axis = match m.as_str().trim_start_matches(['y', 'p', 'c', 'r', 'a']).chars().next() {
                Some('T') => 0,
                Some('N') => 1,
                Some('M') => 2,
                _ => continue,
            };
            if self.tnm[axis].is_none() {
                self.tnm[axis] = Some(m.as_str().to_string());
            }
        }
    }

    fn scan_stage(&mut self, text: &str) {
        if self.stage.is_some() {
            return;
        }
        if let Some(c) = STAGE.captures(text) {
            let base = match &c[1] {
                "0" => "0",
                "1" => "I",
                "2" => "II",
                "3" => "III",
                "4" => "IV",
                other => other,
            }
            .to_ascii_uppercase();
            self.stage = Some(format!("{base}{}", c[2].to_ascii_uppercase()));
        }
    }

    fn scan_narrative(&mut self, text: &str) {
        if self.v.demographics.age.is_none() {
            if let Some(c) = AGE.captures(text) {
                self.v.demographics.age = c[1].parse().ok();
                if self.gender.is_none() {
                    let start = c.get(0).unwrap().start();
                    let end = SENTENCE_END
                        .find_at(text, c.get(0).unwrap().end())
                        .map_or(text.len(), |m| m.end());
                    if let Some(g) = GENDER.captures(&text[start..end]) {
                        self.gender = Some(g[1].to_ascii_lowercase());
                    }
                }
            }
        }
        if self.marital.is_none() {
            if let Some(c) = MARITAL.captures(text) {
                self.marital = Some(c[1].to_string());
            }
        }
    }

    /// Returns false when the key is not one the extractor knows.
    fn key(&mut self, section: &str, key: &str, value: &str) -> bool {
        let k = normalize_term(key);
        let val = value.trim();
        match k.as_str() {
            "name" | "patient" | "patient name" => self.v.demographics.name = Some(val.to_string()),
            "mrn" | "medical record number" | "patient id" | "mrn number" => {
                self.v.demographics.mrn = Some(val.to_string())
            }
            "sex" | "gender" => self.gender = Some(val.to_string()),
            "dob" | "date of birth" | "birth date" => self.v.demographics.birth_date = parse_date(val),
            "age" => {
                self.v.demographics.age = val
                    .split(|c: char| !c.is_ascii_digit())
                    .next()
                    .and_then(|d| d.parse().ok())
            }
            "marital status" => self.marital = Some(val.to_string()),
            "date" | "note date" | "visit date" | "date of service" | "encounter date" => {
                self.v.note_date = parse_date(val).or(self.v.note_date)
            }
            "collected" | "collection date" | "date collected" | "collection time" | "collected date" => {
                self.collected = parse_date(val)
            }
            "reported" | "report date" | "date reported" | "issued" | "final report date" | "reported date" => {
                self.issued = parse_date(val)
            }
            "received" | "date received" => {}
            "report status" => self.status = Some(val.to_ascii_lowercase()),
            "pathologist" | "performed by" | "reviewed by" | "attending physician" | "physician" => {
                self.performer = Some(val.to_string())
            }
            "clinical indication" | "indication" | "icd 10" | "icd10" => {
                self.indication = ICD10_CODE.captures(val).map(|c| c[1].to_string())
            }
            "test" | "test name" | "panel" | "test performed" | "report" => {
                self.panel_hint.push(val.to_string())
            }
            "diagnosis" | "primary diagnosis" | "cancer diagnosis" | "cancer type" | "diagnoses" => {
                self.add_diagnosis(val)
            }
            "diagnosis date" | "date of diagnosis" | "diagnosed" => self.v.diagnosis_date = parse_date(val),
            "stage" | "clinical stage" | "pathologic stage" | "stage group" | "numerical stage"
            | "ajcc stage" | "overall stage" => {
                self.scan_tnm(val);
                let before = self.stage.clone();
                self.scan_stage(&format!("stage {val}"));
                if before.is_none() && self.stage.is_none() && TNM_TOKEN.find(val).is_none() {
                    self.stage = Some(val.to_string());
                }
            }
            "tnm" | "tnm stage" | "tnm staging" | "staging" | "tnm classification" => {
                self.scan_tnm(val);
                self.scan_stage(val);
            }
            "histology" | "histologic type" | "histology type" | "histologic subtype" => {
                self.v.histology = Some(val.to_string())
            }
            "grade" | "histologic grade" | "histology grade" | "tumor grade" => {
                self.grade = Some(val.to_string())
            }
            "laterality" | "side" => self.laterality = Some(val.to_string()),
            "metastasis" | "metastatic disease" | "metastases" | "metastatic" => {
                let n = normalize_term(val);
                if matches!(n.as_str(), "yes" | "no" | "y" | "n" | "present" | "absent" | "none") {
                    self.metastasis = Some(val.to_string());
                } else {
                    self.add_sites(val);
                }
            }
            "metastatic sites" | "sites of metastasis" | "metastasis sites" | "metastasis site"
            | "metastatic site" => self.add_sites(val),
            "disease status" | "response assessment" | "status of disease" | "response" => {
                self.v.disease_status = val.to_string()
            }
            "allergies" | "drug allergies" | "allergy" => {
                for item in val.split([';', ',']) {
                    self.add_list_item(ListKind::Allergies, item);
                }
            }
            "source" | "specimen source" | "specimen type" | "specimen" => {
                self.specimen().source = val.to_string()
            }
            "viability" => self.specimen().viability = Some(val.to_string()),
            _ if k.starts_with("specimen ") => {
                let label = key.trim()["specimen".len()..].trim().to_string();
                let s = self.specimen();
                s.label = Some(label);
                s.source = val.to_string();
            }
            _ if section == "specimen" => {
                self.specimen().notes.push(format!("{}: {}", key.trim(), val))
            }
            _ => return false,
        }
        true
    }

    fn add_sites(&mut self, val: &str) {
        let spaced = val.replace(" and ", ",");
        for s in spaced.split([',', ';']) {
            let s = s.trim().trim_end_matches('.');
            if !s.is_empty() {
                self.v.metastasis_sites.push(s.to_string());
            }
        }
    }

    fn block(&mut self, section: &str, text: &str) {
        let observations = OBSERVATION_SECTIONS.contains(&section) || section == "specimen";
        let ls = lines(text, observations || section == "medications");
        let mut list: Option<ListKind> = match section {
            "medications" => Some(ListKind::Medications),
            "procedures" => Some(ListKind::Procedures),
            "allergies" => Some(ListKind::Allergies),
            "diagnosis" => Some(ListKind::Diagnoses),
            _ => None,
        };
        let section_list = list;
        let mut plain_run: Vec<String> = Vec::new();
        let flush_plain = |this: &mut Self, run: &mut Vec<String>, kind: Option<ListKind>| {
            if run.is_empty() {
                return;
            }
            let joined = run.join(" ");
            let joined_lines = run.join("\n");
            run.clear();
            match kind {
                Some(ListKind::Medications) | Some(ListKind::Allergies) => {
                    for item in split_items(&joined) {
                        this.add_list_item(kind.unwrap(), &item);
                    }
                }
                Some(ListKind::Procedures) => {
                    for item in split_items(&joined) {
                        this.add_list_item(ListKind::Procedures, &item);
                    }
                }
                Some(ListKind::Diagnoses) => {
                    let vs = this.cat.value_sets.expect("cancer_diagnosis");
                    for line in joined_lines.split('\n') {
                        let (term, _) = strip_date(line);
                        let n = normalize_categorical(&term, vs);
                        if n != NOT_DOCUMENTED && n != OTHER {
                            this.add_diagnosis(line);
                        }
                    }
                }
                None => {}
            }
        };
        for l in ls {
            match l {
                Line::Blank => {
                    flush_plain(self, &mut plain_run, list);
                }
                Line::Plain(p) => {
                    if section == "disease_status" && self.v.disease_status == NOT_DOCUMENTED {
                        let n = normalize_categorical(&p, self.cat.value_sets.expect("disease_status"));
                        if n != NOT_DOCUMENTED && n != OTHER {
                            self.v.disease_status = p.clone();
                        }
                    }
                    if NARRATIVE_SECTIONS.contains(&section) {
                        self.scan_narrative(&p);
                    }
                    if STAGING_SECTIONS.contains(&section) || section == "residual" {
                        self.scan_stage(&p);
                    }
                    if section == "staging" || section == "pathology" {
                        self.scan_tnm(&p);
                    }
                    if section == "residual" {
                        self.panel_hint.push(p.clone());
                    }
                    if list.is_some() && section_list == list {
                        plain_run.push(p);
                    } else if list.is_some() {
                        list = None;
                    }
                }
                Line::Bullet(b) => {
                    flush_plain(self, &mut plain_run, list);
                    if let Some(kind) = list {
                        self.add_list_item(kind, &b);
                    }
                }
                Line::Key { key, value } => {
                    flush_plain(self, &mut plain_run, list);
                    if value.is_empty() {
                        if let Some(kind) = list_kind_for_header(&key) {
                            list = Some(kind);
                            continue;
                        }
                    }
                    if list == Some(ListKind::Allergies) && !value.is_empty() {
                        self.v.allergies.push(AllergyItem {
                            substance: key.trim().to_string(),
                            reaction: Some(value.trim().to_string()),
                        });
                        continue;
                    }
                    if section == "medications" {
                        self.v.medications.push(MedicationItem {
                            name: key.clone(),
                            dosage_text: (!value.is_empty()).then(|| value.clone()),
                        });
                        continue;
                    }
                    if self.key(section, &key, &value) {
                        continue;
                    }
                    if observations && !value.is_empty() {
                        let (name, date) = strip_date(&key);
                        self.v.observations.push(ObservationItem { name, value, date });
                    }
                }
            }
        }
        flush_plain(self, &mut plain_run, list);
    }

    fn finish(mut self, s: &SectionedNote) -> ClinicalVariables {
        let cat = self.cat;
        let vs = &cat.value_sets;
        let norm = |name: &str, raw: Option<&String>| match raw {
            Some(r) => normalize_categorical(r, vs.expect(name)),
            None => NOT_DOCUMENTED.to_string(),
        };
        for (i, axis) in [TnmAxis::T, TnmAxis::N, TnmAxis::M].into_iter().enumerate() {
            let n = match &self.tnm[i] {
                Some(raw) => normalize_tnm(raw, axis, vs.expect(axis.value_set_name())),
                None => continue,
            };
            if let Some(a) = n.annotation {
                self.v.tnm_annotations.insert(axis.letter().to_string(), a);
            }
            match axis {
                TnmAxis::T => self.v.tnm_t = n.value,
                TnmAxis::N => self.v.tnm_n = n.value,
                TnmAxis::M => self.v.tnm_m = n.value,
            }
        }
        self.v.numerical_stage = norm("numerical_stage", self.stage.as_ref());
        self.v.histology_grade = norm("histology_grade", self.grade.as_ref());
        self.v.laterality = norm("laterality", self.laterality.as_ref());
        self.v.demographics.gender = norm("administrative_gender", self.gender.as_ref());
        self.v.demographics.marital_status = norm("marital_status", self.marital.as_ref());
        self.v.disease_status = normalize_categorical(&self.v.disease_status, vs.expect("disease_status"));
        if let Some(h) = &self.v.histology {
            let m = normalize_categorical(h, vs.expect("histology"));
            if m != OTHER && m != NOT_DOCUMENTED {
                self.v.histology = Some(m);
            }
        }
        self.v.metastasis_indication = match &self.metastasis {
            Some(m) => normalize_categorical(m, vs.expect("metastasis_indication")),
            None if !self.v.metastasis_sites.is_empty() => "Yes".to_string(),
            None if self.v.tnm_m.starts_with("M1") => "Yes".to_string(),
            None if self.v.tnm_m == "M0" => "No".to_string(),
            None => NOT_DOCUMENTED.to_string(),
        };

        let titles: Vec<String> = s.sections.iter().map(|x| x.title.clone()).collect();
        let panel = titles
            .iter()
            .chain(self.panel_hint.iter())
            .find_map(|t| cat.panel_for(t));
        if let Some(p) = panel {
            self.v.lab_panel = Some(LabPanel {
                keyword: p.keyword.clone(),
                status: self.status.clone(),
                collected: self.collected,
                issued: self.issued,
                performer: self.performer.clone(),
                indication: self.indication.clone(),
            });
        }
        if let Some(mut sp) = self.specimen.take() {
            sp.collected = sp.collected.or(self.collected);
            if !sp.source.is_empty() || sp.label.is_some() {
                self.v.specimen = Some(sp);
            }
        }
        sanitize(cat, self.v)
    }
}

/// Lexicon and pattern pass over a sectioned note.
pub fn extract_entities(cat: &Catalog, s: &SectionedNote) -> ClinicalVariables {
    let mut x = Extraction::new(cat);
    let residual = s.residual();
    if let Some(first) = residual.lines().map(str::trim).find(|l| !l.is_empty()) {
        if let Some(d) = parse_date(first) {
            x.v.note_date = Some(d);
        }
    }
    x.block("residual", &residual);
    for sec in &s.sections {
        x.block(&sec.id, &sec.raw_body);
    }
    x.finish(s)
}
