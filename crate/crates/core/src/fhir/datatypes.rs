//! Datatypes shared by the resource model.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, SecondsFormat, Utc};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Unknown keys kept verbatim so re-serialization is lossless.
pub type Extras = BTreeMap<String, Value>;

pub const SNOMED_URI: &str = "http://snomed.info/sct";
pub const LOINC_URI: &str = "http://loinc.org";
pub const RXNORM_URI: &str = "http://www.nlm.nih.gov/research/umls/rxnorm";
pub const ICD10_URI: &str = "http://hl7.org/fhir/sid/icd-10-cm";
pub const OBSERVATION_CATEGORY_URI: &str =
    "http://terminology.hl7.org/CodeSystem/observation-category";
pub const V2_0074_URI: &str = "http://terminology.hl7.org/CodeSystem/v2-0074";
pub const CONDITION_CLINICAL_URI: &str =
    "http://terminology.hl7.org/CodeSystem/condition-clinical";
pub const CONDITION_VERIFICATION_URI: &str =
    "http://terminology.hl7.org/CodeSystem/condition-ver-status";
pub const RESEARCH_PHASE_URI: &str =
    "http://terminology.hl7.org/CodeSystem/research-study-phase";

const RECOGNIZED_PREFIXES: [&str; 3] = [
    "http://terminology.hl7.org/CodeSystem/",
    "http://hl7.org/fhir/",
    "urn:onco:",
];

/// True when `uri` is one of the table systems or a recognized extension namespace.
pub fn is_recognized_system(uri: &str) -> bool {
    matches!(uri, SNOMED_URI | LOINC_URI | RXNORM_URI | ICD10_URI)
        || RECOGNIZED_PREFIXES
            .iter()
            .any(|p| uri.starts_with(p) && uri.len() > p.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coding {
    pub system: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<String>,
    #[serde(flatten)]
    pub extras: Extras,
}

impl Coding {
    pub fn new(system: &str, code: &str, display: Option<&str>) -> Self {
        Coding {
            system: system.to_string(),
            code: code.to_string(),
            display: display.map(str::to_string),
            extras: Extras::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CodeableConcept {
    #[serde(default, rename = "coding", skip_serializing_if = "Vec::is_empty")]
    pub codings: Vec<Coding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(flatten)]
    pub extras: Extras,
}

impl CodeableConcept {
    pub fn text(text: &str) -> Self {
        CodeableConcept {
            text: Some(text.to_string()),
            ..Default::default()
        }
    }

    pub fn coded(codings: Vec<Coding>) -> Self {
        CodeableConcept {
            codings,
            ..Default::default()
        }
    }

    /// Codes, then text: the tokens a value-set binding is checked against.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.codings.iter().map(|c| c.code.as_str()).collect();
        if let Some(t) = &self.text {
            out.push(t);
        }
        out
    }
}

/// Literal reference of the form `<ResourceType>/<id>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub reference: String,
    #[serde(flatten)]
    pub extras: Extras,
}

impl Reference {
    pub fn to(resource_type: &str, id: &str) -> Self {
        Reference {
            reference: format!("{resource_type}/{id}"),
            extras: Extras::new(),
        }
    }

    /// Splits the target into (type, id) when it has the two-segment form.
    pub fn parts(&self) -> Option<(&str, &str)> {
        let (t, id) = self.reference.split_once('/')?;
        if t.is_empty() || id.is_empty() || id.contains('/') {
            return None;
        }
        Some((t, id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identifier {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub value: String,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HumanName {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub given: Vec<String>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Annotation {
    pub text: String,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, rename = "profile", skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<String>,
    #[serde(flatten)]
    pub extras: Extras,
}

impl Meta {
    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty() && self.extras.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Extension {
    pub url: String,
    #[serde(default, rename = "valueString", skip_serializing_if = "Option::is_none")]
    pub value_string: Option<String>,
    #[serde(default, rename = "valueCoding", skip_serializing_if = "Option::is_none")]
    pub value_coding: Option<Coding>,
    #[serde(default, rename = "valueDecimal", skip_serializing_if = "Option::is_none")]
    pub value_decimal: Option<f64>,
    #[serde(
        default,
        rename = "valueCodeableConcept",
        skip_serializing_if = "Option::is_none"
    )]
    pub value_codeable_concept: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
}

impl Extension {
    pub fn string(url: &str, value: &str) -> Self {
        Extension {
            url: url.to_string(),
            value_string: Some(value.to_string()),
            ..Default::default()
        }
    }

    pub fn concept(url: &str, value: CodeableConcept) -> Self {
        Extension {
            url: url.to_string(),
            value_codeable_concept: Some(value),
            ..Default::default()
        }
    }

    pub fn nested(url: &str, children: Vec<Extension>) -> Self {
        Extension {
            url: url.to_string(),
            extension: children,
            ..Default::default()
        }
    }

    pub fn child(&self, url: &str) -> Option<&Extension> {
        self.extension.iter().find(|e| e.url == url)
    }
}

/// A calendar value carrying its precision: year, year-month, date, or UTC instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DateOrInstant {
    Year(i32),
    YearMonth(i32, u32),
    Date(NaiveDate),
    Instant(DateTime<Utc>),
}

impl DateOrInstant {
    pub fn parse(s: &str) -> Result<Self, String> {
        let bytes = s.as_bytes();
        let digits = |r: std::ops::Range<usize>| bytes[r].iter().all(u8::is_ascii_digit);
        match s.len() {
            4 if digits(0..4) => Ok(DateOrInstant::Year(s.parse().unwrap())),
            7 if digits(0..4) && bytes[4] == b'-' && digits(5..7) => {
                let y: i32 = s[0..4].parse().unwrap();
                let m: u32 = s[5..7].parse().unwrap();
                if (1..=12).contains(&m) {
                    Ok(DateOrInstant::YearMonth(y, m))
                } else {
                    Err(format!("invalid month in {s:?}"))
                }
            }
            10 => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map(DateOrInstant::Date)
                .map_err(|_| format!("invalid date {s:?}")),
            _ if s.contains('T') => DateTime::parse_from_rfc3339(s)
                .map(|d| DateOrInstant::Instant(d.with_timezone(&Utc)))
                .map_err(|_| format!("invalid instant {s:?}: a timezone offset is required")),
            _ => Err(format!("invalid date or instant {s:?}")),
        }
    }

    pub fn year(&self) -> i32 {
        match self {
            DateOrInstant::Year(y) | DateOrInstant::YearMonth(y, _) => *y,
            DateOrInstant::Date(d) => d.year(),
            DateOrInstant::Instant(i) => i.year(),
        }
    }

    /// Calendar date when the precision is at least a day.
    pub fn date(&self) -> Option<NaiveDate> {
        match self {
            DateOrInstant::Date(d) => Some(*d),
            DateOrInstant::Instant(i) => Some(i.date_naive()),
            _ => None,
        }
    }
}

impl fmt::Display for DateOrInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DateOrInstant::Year(y) => write!(f, "{y:04}"),
            DateOrInstant::YearMonth(y, m) => write!(f, "{y:04}-{m:02}"),
            DateOrInstant::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            DateOrInstant::Instant(i) => {
                f.write_str(&i.to_rfc3339_opts(SecondsFormat::AutoSi, true))
            }
        }
    }
}

impl Serialize for DateOrInstant {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DateOrInstant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DateOrInstant::parse(&s).map_err(de::Error::custom)
    }
}

/// Either a single element or a list; keeps whichever shape the source used.
#[derive(Debug, Clone, PartialEq)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        match self {
            OneOrMany::One(x) => std::slice::from_ref(x).iter(),
            OneOrMany::Many(v) => v.iter(),
        }
    }
}

impl<T: Serialize> Serialize for OneOrMany<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            OneOrMany::One(x) => x.serialize(s),
            OneOrMany::Many(v) => v.serialize(s),
        }
    }
}

impl<'de, T: serde::de::DeserializeOwned> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        if v.is_array() {
            serde_json::from_value(v)
                .map(OneOrMany::Many)
                .map_err(de::Error::custom)
        } else {
            serde_json::from_value(v)
                .map(OneOrMany::One)
                .map_err(de::Error::custom)
        }
    }
}
