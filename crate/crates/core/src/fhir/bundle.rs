//! Bundles: assembly, reference closure, and resolution.

use std::collections::{BTreeMap, HashSet};

use serde_json::{Map, Value};

use super::datatypes::{Extras, Reference};
use super::resources::{Resource, ResourceType};
use super::wire::{join, parse_json, resource_from_value, resource_to_value, to_pretty};
use super::FhirError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleType {
    Document,
    Collection,
    Searchset,
}

impl BundleType {
    pub fn as_str(&self) -> &'static str {
        match self {
            BundleType::Document => "document",
            BundleType::Collection => "collection",
            BundleType::Searchset => "searchset",
        }
    }

    pub fn parse(s: &str) -> Option<BundleType> {
        match s {
            "document" => Some(BundleType::Document),
            "collection" => Some(BundleType::Collection),
            "searchset" => Some(BundleType::Searchset),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub id: Option<String>,
    pub bundle_type: BundleType,
    /// Number of logical matches; searchset only.
    pub total: Option<u64>,
    pub entries: Vec<Resource>,
    pub extras: Extras,
}

impl Bundle {
    pub fn new(bundle_type: BundleType, entries: Vec<Resource>) -> Self {
        Bundle {
            id: None,
            bundle_type,
            total: None,
            entries,
            extras: Extras::new(),
        }
    }

    pub fn patient(&self) -> Option<&crate::fhir::Patient> {
        self.entries.iter().find_map(|r| match r {
            Resource::Patient(p) => Some(p),
            _ => None,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("resourceType".into(), "Bundle".into());
        if let Some(id) = &self.id {
            m.insert("id".into(), id.clone().into());
        }
        m.insert("type".into(), self.bundle_type.as_str().into());
        if let Some(t) = self.total {
            m.insert("total".into(), t.into());
        }
        if !self.entries.is_empty() {
            let entries = self
                .entries
                .iter()
                .map(|r| {
                    let mut e = Map::new();
                    e.insert("resource".into(), resource_to_value(r));
                    Value::Object(e)
                })
                .collect();
            m.insert("entry".into(), Value::Array(entries));
        }
        for (k, v) in &self.extras {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }

    pub fn from_value(value: Value) -> Result<Bundle, FhirError> {
        let schema = |path: &str, message: &str| FhirError::Schema {
            path: path.to_string(),
            message: message.to_string(),
        };
        let Value::Object(mut m) = value else {
            return Err(schema("", "expected a JSON object"));
        };
        match m.shift_remove("resourceType") {
            Some(Value::String(s)) if s == "Bundle" => {}
            Some(Value::String(s)) => {
                return Err(schema("resourceType", &format!("expected Bundle, found {s:?}")))
            }
            _ => return Err(schema("resourceType", "missing resourceType")),
        }
        let id = match m.shift_remove("id") {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(schema("id", "id must be a string")),
        };
        let bundle_type = match m.shift_remove("type") {
            Some(Value::String(s)) => BundleType::parse(&s)
                .ok_or_else(|| schema("type", &format!("unknown bundle type {s:?}")))?,
            _ => return Err(schema("type", "missing bundle type")),
        };
        let total = match m.shift_remove("total") {
            None => None,
            Some(v) => Some(
                v.as_u64()
                    .ok_or_else(|| schema("total", "total must be a non-negative integer"))?,
            ),
        };
        let mut entries = Vec::new();
        match m.shift_remove("entry") {
            None => {}
            Some(Value::Array(items)) => {
                for (i, item) in items.into_iter().enumerate() {
                    let path = format!("entry[{i}]");
                    let Value::Object(mut e) = item else {
                        return Err(schema(&path, "expected an entry object"));
                    };
                    let Some(res) = e.shift_remove("resource") else {
                        return Err(schema(&join(&path, "resource"), "missing resource"));
                    };
                    entries.push(resource_from_value(res, &join(&path, "resource"))?);
                }
            }
            Some(_) => return Err(schema("entry", "entry must be an array")),
        }
        let extras: BTreeMap<String, Value> = m.into_iter().collect();
        Ok(Bundle {
            id,
            bundle_type,
            total,
            entries,
            extras,
        })
    }

    /// Canonical text of the bundle.
    pub fn serialize(&self) -> String {
        to_pretty(&self.to_value())
    }

    pub fn parse(text: &str) -> Result<Bundle, FhirError> {
        Bundle::from_value(parse_json(text)?)
    }

    /// First dangling internal reference, if any. Searchsets may point outside.
    pub fn closure_violation(&self) -> Option<(String, String)> {
        let present: HashSet<(ResourceType, &str)> = self
            .entries
            .iter()
            .map(|r| (r.resource_type(), r.id()))
            .collect();
        for (i, r) in self.entries.iter().enumerate() {
            for (path, reference) in super::wire::references(r) {
                let target = reference.reference.as_str();
                let resolved = reference
                    .parts()
                    .and_then(|(t, id)| ResourceType::parse(t).map(|t| (t, id)))
                    .is_some_and(|k| present.contains(&k));
                let external_ok = self.bundle_type == BundleType::Searchset;
                if !resolved && !external_ok {
                    return Some((
                        format!("entry[{i}].resource.{path}"),
                        target.to_string(),
                    ));
                }
            }
        }
        None
    }
}

/// Orders resources by type, keeping input order within a type, and checks ids and closure.
pub fn assemble_bundle(resources: Vec<Resource>, kind: BundleType) -> Result<Bundle, FhirError> {
    let mut seen = HashSet::new();
    for r in &resources {
        if !seen.insert((r.resource_type(), r.id().to_string())) {
            return Err(FhirError::DuplicateId {
                id: format!("{}/{}", r.resource_type(), r.id()),
            });
        }
    }
    let mut entries = resources;
    entries.sort_by_key(|r| r.resource_type());
    let bundle = Bundle::new(kind, entries);
    if let Some((path, target)) = bundle.closure_violation() {
        return Err(FhirError::DanglingReference { path, target });
    }
    Ok(bundle)
}

pub fn resolve_reference<'a>(b: &'a Bundle, reference: &Reference) -> Result<&'a Resource, FhirError> {
    let not_found = || FhirError::NotFound {
        target: reference.reference.clone(),
    };
    let (t, id) = reference.parts().ok_or_else(not_found)?;
    let t = ResourceType::parse(t).ok_or_else(not_found)?;
    let mut hits = b
        .entries
        .iter()
        .filter(|r| r.resource_type() == t && r.id() == id);
    match (hits.next(), hits.next()) {
        (Some(r), None) => Ok(r),
        _ => Err(not_found()),
    }
}
