//! Canonical JSON wire format.
//!
//! Layout: `resourceType`, `id`, `meta`, `extension`, then the modeled fields in
//! schema order, then any unknown keys in sorted order. Two-space indent, UTF-8,
//! one trailing newline.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use super::datatypes::*;
use super::resources::*;
use super::FhirError;

pub fn to_pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialize");
    s.push('\n');
    s
}

fn to_object<T: Serialize>(x: &T) -> Map<String, Value> {
    match serde_json::to_value(x).expect("model types always serialize") {
        Value::Object(m) => m,
        _ => unreachable!("resources serialize to objects"),
    }
}

pub fn resource_to_value(r: &Resource) -> Value {
    let body = match r {
        Resource::Patient(x) => to_object(x),
        Resource::Condition(x) => to_object(x),
        Resource::MedicationRequest(x) => to_object(x),
        Resource::Procedure(x) => to_object(x),
        Resource::Observation(x) => to_object(x),
        Resource::Specimen(x) => to_object(x),
        Resource::DiagnosticReport(x) => to_object(x),
        Resource::AllergyIntolerance(x) => to_object(x),
        Resource::ResearchStudy(x) => to_object(x),
        Resource::OperationOutcome(x) => to_object(x),
    };
    let mut out = Map::with_capacity(body.len() + 1);
    out.insert(
        "resourceType".into(),
        Value::String(r.resource_type().as_str().into()),
    );
    out.extend(body);
    Value::Object(out)
}

/// Canonical text of one resource.
pub fn serialize_resource(r: &Resource) -> String {
    to_pretty(&resource_to_value(r))
}

pub fn parse_resource(text: &str) -> Result<Resource, FhirError> {
    let value = parse_json(text)?;
    resource_from_value(value, "")
}

pub(crate) fn parse_json(text: &str) -> Result<Value, FhirError> {
    serde_json::from_str(text).map_err(|e| FhirError::Syntax {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

pub(crate) fn join(prefix: &str, path: &str) -> String {
    match (prefix.is_empty(), path.is_empty()) {
        (true, _) => path.to_string(),
        (false, true) => prefix.to_string(),
        (false, false) if path.starts_with('[') => format!("{prefix}{path}"),
        _ => format!("{prefix}.{path}"),
    }
}

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, FhirError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = e.path().to_string();
        if path == "." {
            path.clear();
        }
        let message = e.inner().to_string();
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|s| s.split('`').next())
        {
            path = join(&path, field);
        }
        FhirError::Schema {
            path: join(prefix, &path),
            message,
        }
    })
}

/// Decodes a resource object; `prefix` locates it inside an enclosing document for errors.
pub fn resource_from_value(value: Value, prefix: &str) -> Result<Resource, FhirError> {
    let Value::Object(mut map) = value else {
        return Err(FhirError::Schema {
            path: prefix.to_string(),
            message: "expected a JSON object".into(),
        });
    };
    let type_path = join(prefix, "resourceType");
    let rt = match map.shift_remove("resourceType") {
        Some(Value::String(s)) => s,
        Some(_) => {
            return Err(FhirError::Schema {
                path: type_path,
                message: "resourceType must be a string".into(),
            })
        }
        None => {
            return Err(FhirError::Schema {
                path: type_path,
                message: "missing resourceType".into(),
            })
        }
    };
    let Some(kind) = ResourceType::parse(&rt) else {
        return Err(FhirError::Schema {
            path: type_path,
            message: format!("unknown resourceType {rt:?}"),
        });
    };
    let body = Value::Object(map);
    let r = match kind {
        ResourceType::Patient => Resource::Patient(typed(body, prefix)?),
        ResourceType::Condition => Resource::Condition(typed(body, prefix)?),
        ResourceType::MedicationRequest => Resource::MedicationRequest(typed(body, prefix)?),
        ResourceType::Procedure => Resource::Procedure(typed(body, prefix)?),
        ResourceType::Observation => Resource::Observation(typed(body, prefix)?),
        ResourceType::Specimen => Resource::Specimen(typed(body, prefix)?),
        ResourceType::DiagnosticReport => Resource::DiagnosticReport(typed(body, prefix)?),
        ResourceType::AllergyIntolerance => Resource::AllergyIntolerance(typed(body, prefix)?),
        ResourceType::ResearchStudy => Resource::ResearchStudy(typed(body, prefix)?),
        ResourceType::OperationOutcome => Resource::OperationOutcome(typed(body, prefix)?),
    };
    check_invariants(&r).map_err(|(path, message)| FhirError::Schema {
        path: join(prefix, &path),
        message,
    })?;
    Ok(r)
}

pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'.')
}

fn is_known_reference_type(t: &str) -> bool {
    ResourceType::parse(t).is_some() || EXTERNAL_REFERENCE_TYPES.contains(&t)
}

/// Type-level invariants not expressible through serde alone.
pub fn check_invariants(r: &Resource) -> Result<(), (String, String)> {
    if !is_valid_id(r.id()) {
        return Err(("id".into(), format!("invalid id {:?}", r.id())));
    }
    for (path, reference) in references(r) {
        match reference.parts() {
            Some((t, id)) if is_known_reference_type(t) && is_valid_id(id) => {}
            _ => {
                return Err((
                    format!("{path}.reference"),
                    format!("malformed reference {:?}", reference.reference),
                ))
            }
        }
    }
    for (path, cc) in concepts(r) {
        if cc.codings.is_empty() && cc.text.is_none() {
            return Err((path, "codeable concept needs a coding or text".into()));
        }
        for (i, c) in cc.codings.iter().enumerate() {
            check_coding(c, &format!("{path}.coding[{i}]"))?;
        }
    }
    for (i, e) in r.extensions().iter().enumerate() {
        check_extension(e, &format!("extension[{i}]"))?;
    }
    if let Resource::Observation(o) = r {
        if o.value_string.is_some() && o.value_codeable_concept.is_some() {
            return Err((
                "valueString".into(),
                "only one of valueString and valueCodeableConcept may be present".into(),
            ));
        }
    }
    Ok(())
}

fn check_coding(c: &Coding, path: &str) -> Result<(), (String, String)> {
    if !is_recognized_system(&c.system) {
        return Err((
            format!("{path}.system"),
            format!("unrecognized code system {:?}", c.system),
        ));
    }
    if c.code.is_empty() {
        return Err((format!("{path}.code"), "code must not be empty".into()));
    }
    Ok(())
}

fn check_extension(e: &Extension, path: &str) -> Result<(), (String, String)> {
    if e.url.is_empty() {
        return Err((format!("{path}.url"), "extension url must not be empty".into()));
    }
    if let Some(c) = &e.value_coding {
        check_coding(c, &format!("{path}.valueCoding"))?;
    }
    if let Some(cc) = &e.value_codeable_concept {
        if cc.codings.is_empty() && cc.text.is_none() {
            return Err((
                format!("{path}.valueCodeableConcept"),
                "codeable concept needs a coding or text".into(),
            ));
        }
        for (i, c) in cc.codings.iter().enumerate() {
            check_coding(c, &format!("{path}.valueCodeableConcept.coding[{i}]"))?;
        }
    }
    if let Some(d) = e.value_decimal {
        if !d.is_finite() {
            return Err((format!("{path}.valueDecimal"), "decimal must be finite".into()));
        }
    }
    for (i, child) in e.extension.iter().enumerate() {
        check_extension(child, &format!("{path}.extension[{i}]"))?;
    }
    Ok(())
}

fn push_opt<'a, T>(out: &mut Vec<(String, &'a T)>, path: &str, x: &'a Option<T>) {
    if let Some(x) = x {
        out.push((path.to_string(), x));
    }
}

fn push_all<'a, T>(out: &mut Vec<(String, &'a T)>, path: &str, xs: &'a [T]) {
    for (i, x) in xs.iter().enumerate() {
        out.push((format!("{path}[{i}]"), x));
    }
}

/// Every literal reference inside the resource, with its element path.
pub fn references(r: &Resource) -> Vec<(String, &Reference)> {
    let mut out = Vec::new();
    match r {
        Resource::Patient(_) | Resource::OperationOutcome(_) => {}
        Resource::Condition(c) => {
            push_opt(&mut out, "subject", &c.subject);
            for (i, s) in c.stage.iter().enumerate() {
                push_all(&mut out, &format!("stage[{i}].assessment"), &s.assessment);
            }
        }
        Resource::MedicationRequest(m) => push_opt(&mut out, "subject", &m.subject),
        Resource::Procedure(p) => push_opt(&mut out, "subject", &p.subject),
        Resource::Observation(o) => {
            push_opt(&mut out, "subject", &o.subject);
            push_opt(&mut out, "specimen", &o.specimen);
        }
        Resource::Specimen(s) => push_opt(&mut out, "subject", &s.subject),
        Resource::DiagnosticReport(d) => {
            push_opt(&mut out, "subject", &d.subject);
            push_all(&mut out, "specimen", &d.specimen);
            push_all(&mut out, "result", &d.result);
        }
        Resource::AllergyIntolerance(a) => push_opt(&mut out, "patient", &a.patient),
        Resource::ResearchStudy(s) => push_all(&mut out, "enrollment", &s.enrollment),
    }
    out
}

/// Every codeable concept inside the resource (extensions excluded), with its path.
pub fn concepts(r: &Resource) -> Vec<(String, &CodeableConcept)> {
    let mut out = Vec::new();
    match r {
        Resource::Patient(p) => push_opt(&mut out, "maritalStatus", &p.marital_status),
        Resource::Condition(c) => {
            push_opt(&mut out, "clinicalStatus", &c.clinical_status);
            push_opt(&mut out, "verificationStatus", &c.verification_status);
            push_opt(&mut out, "code", &c.code);
            push_all(&mut out, "bodySite", &c.body_site);
            for (i, s) in c.stage.iter().enumerate() {
                push_opt(&mut out, &format!("stage[{i}].summary"), &s.summary);
                push_opt(&mut out, &format!("stage[{i}].type"), &s.stage_type);
            }
        }
        Resource::MedicationRequest(m) => {
            push_opt(&mut out, "medicationCodeableConcept", &m.medication)
        }
        Resource::Procedure(p) => push_opt(&mut out, "code", &p.code),
        Resource::Observation(o) => {
            push_all(&mut out, "category", &o.category);
            push_opt(&mut out, "code", &o.code);
            push_opt(&mut out, "valueCodeableConcept", &o.value_codeable_concept);
        }
        Resource::Specimen(s) => push_opt(&mut out, "type", &s.specimen_type),
        Resource::DiagnosticReport(d) => {
            match &d.category {
                Some(OneOrMany::One(c)) => out.push(("category".into(), c)),
                Some(OneOrMany::Many(cs)) => push_all(&mut out, "category", cs),
                None => {}
            }
            push_opt(&mut out, "code", &d.code);
        }
        Resource::AllergyIntolerance(a) => {
            push_opt(&mut out, "code", &a.code);
            for (i, re) in a.reaction.iter().enumerate() {
                push_all(&mut out, &format!("reaction[{i}].manifestation"), &re.manifestation);
            }
        }
        Resource::ResearchStudy(s) => {
            push_opt(&mut out, "phase", &s.phase);
            push_all(&mut out, "category", &s.category);
            push_all(&mut out, "condition", &s.condition);
        }
        Resource::OperationOutcome(_) => {}
    }
    out
}

/// All codings in the resource, including those inside extensions.
pub fn all_codings(r: &Resource) -> Vec<&Coding> {
    fn ext<'a>(e: &'a Extension, out: &mut Vec<&'a Coding>) {
        out.extend(e.value_coding.iter());
        if let Some(cc) = &e.value_codeable_concept {
            out.extend(cc.codings.iter());
        }
        for c in &e.extension {
            ext(c, out);
        }
    }
    let mut out: Vec<&Coding> = concepts(r)
        .into_iter()
        .flat_map(|(_, cc)| cc.codings.iter())
        .collect();
    for e in r.extensions() {
        ext(e, &mut out);
    }
    out
}
