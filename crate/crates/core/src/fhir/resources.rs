//! Resource structs for the supported subset. Field order is the wire order.

use serde::{Deserialize, Serialize};

use super::datatypes::*;

macro_rules! code_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident = $wire:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $wire)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $wire),+ }
            }
        }
    };
}

code_enum!(AdministrativeGender {
    Male = "male",
    Female = "female",
    Other = "other",
    Unknown = "unknown",
});

code_enum!(ObservationStatus {
    Registered = "registered",
    Preliminary = "preliminary",
    Final = "final",
    Amended = "amended",
    Corrected = "corrected",
    Cancelled = "cancelled",
    EnteredInError = "entered-in-error",
    Unknown = "unknown",
});

code_enum!(MedicationRequestStatus {
    Active = "active",
    OnHold = "on-hold",
    Cancelled = "cancelled",
    Completed = "completed",
    EnteredInError = "entered-in-error",
    Stopped = "stopped",
    Draft = "draft",
    Unknown = "unknown",
});

code_enum!(MedicationRequestIntent {
    Proposal = "proposal",
    Plan = "plan",
    Order = "order",
    OriginalOrder = "original-order",
    ReflexOrder = "reflex-order",
    FillerOrder = "filler-order",
    InstanceOrder = "instance-order",
    Option = "option",
});

code_enum!(ProcedureStatus {
    Preparation = "preparation",
    InProgress = "in-progress",
    NotDone = "not-done",
    OnHold = "on-hold",
    Stopped = "stopped",
    Completed = "completed",
    EnteredInError = "entered-in-error",
    Unknown = "unknown",
});

code_enum!(DiagnosticReportStatus {
    Registered = "registered",
    Partial = "partial",
    Preliminary = "preliminary",
    Final = "final",
    Amended = "amended",
    Corrected = "corrected",
    Appended = "appended",
    Cancelled = "cancelled",
    EnteredInError = "entered-in-error",
    Unknown = "unknown",
});

code_enum!(ResearchStudyStatus {
    Active = "active",
    AdministrativelyCompleted = "administratively-completed",
    Approved = "approved",
    ClosedToAccrual = "closed-to-accrual",
    ClosedToAccrualAndIntervention = "closed-to-accrual-and-intervention",
    Completed = "completed",
    Disapproved = "disapproved",
    InReview = "in-review",
    TemporarilyClosedToAccrual = "temporarily-closed-to-accrual",
    TemporarilyClosedToAccrualAndIntervention = "temporarily-closed-to-accrual-and-intervention",
    Withdrawn = "withdrawn",
});

code_enum!(IssueSeverity {
    Fatal = "fatal",
    Error = "error",
    Warning = "warning",
    Information = "information",
});

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Patient {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identifier: Vec<Identifier>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub name: Vec<HumanName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<AdministrativeGender>,
    #[serde(default, rename = "birthDate", skip_serializing_if = "Option::is_none")]
    pub birth_date: Option<DateOrInstant>,
    #[serde(default, rename = "maritalStatus", skip_serializing_if = "Option::is_none")]
    pub marital_status: Option<CodeableConcept>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionStage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assessment: Vec<Reference>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub stage_type: Option<CodeableConcept>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Condition {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, rename = "clinicalStatus", skip_serializing_if = "Option::is_none")]
    pub clinical_status: Option<CodeableConcept>,
    #[serde(
        default,
        rename = "verificationStatus",
        skip_serializing_if = "Option::is_none"
    )]
    pub verification_status: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeableConcept>,
    #[serde(default, rename = "bodySite", skip_serializing_if = "Vec::is_empty")]
    pub body_site: Vec<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<Reference>,
    #[serde(default, rename = "onsetDateTime", skip_serializing_if = "Option::is_none")]
    pub onset: Option<DateOrInstant>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage: Vec<ConditionStage>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ObservationStatus>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub category: Vec<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<Reference>,
    #[serde(
        default,
        rename = "effectiveDateTime",
        skip_serializing_if = "Option::is_none"
    )]
    pub effective: Option<DateOrInstant>,
    #[serde(default, rename = "valueString", skip_serializing_if = "Option::is_none")]
    pub value_string: Option<String>,
    #[serde(
        default,
        rename = "valueCodeableConcept",
        skip_serializing_if = "Option::is_none"
    )]
    pub value_codeable_concept: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specimen: Option<Reference>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dosage {
    pub text: String,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MedicationRequest {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<MedicationRequestStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<MedicationRequestIntent>,
    #[serde(
        default,
        rename = "medicationCodeableConcept",
        skip_serializing_if = "Option::is_none"
    )]
    pub medication: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<Reference>,
    #[serde(
        default,
        rename = "dosageInstruction",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub dosage_instruction: Vec<Dosage>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Procedure {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ProcedureStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<Reference>,
    #[serde(
        default,
        rename = "performedDateTime",
        skip_serializing_if = "Option::is_none"
    )]
    pub performed: Option<DateOrInstant>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpecimenCollection {
    #[serde(
        default,
        rename = "collectedDateTime",
        skip_serializing_if = "Option::is_none"
    )]
    pub collected: Option<DateOrInstant>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Specimen {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub specimen_type: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<Reference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collection: Option<SpecimenCollection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub note: Vec<Annotation>,
    #[serde(flatten)]
    pub extras: Extras,
}

/// Performer actor as a display-only participant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Actor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<String>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Performer {
    pub actor: Actor,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<DiagnosticReportStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<OneOrMany<CodeableConcept>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<Reference>,
    #[serde(
        default,
        rename = "effectiveDateTime",
        skip_serializing_if = "Option::is_none"
    )]
    pub effective: Option<DateOrInstant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issued: Option<DateOrInstant>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub performer: Vec<Performer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub specimen: Vec<Reference>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub result: Vec<Reference>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AllergyReaction {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub manifestation: Vec<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AllergyIntolerance {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient: Option<Reference>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reaction: Vec<AllergyReaction>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResearchStudy {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identifier: Vec<Identifier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ResearchStudyStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub category: Vec<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub condition: Vec<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub enrollment: Vec<Reference>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeIssue {
    pub severity: IssueSeverity,
    #[serde(default)]
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expression: Vec<String>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperationOutcome {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issue: Vec<OutcomeIssue>,
    #[serde(flatten)]
    pub extras: Extras,
}

/// Resource types in canonical bundle order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResourceType {
    Patient,
    Condition,
    MedicationRequest,
    Procedure,
    Observation,
    Specimen,
    DiagnosticReport,
    AllergyIntolerance,
    ResearchStudy,
    OperationOutcome,
}

impl ResourceType {
    pub const ALL: [ResourceType; 10] = [
        ResourceType::Patient,
        ResourceType::Condition,
        ResourceType::MedicationRequest,
        ResourceType::Procedure,
        ResourceType::Observation,
        ResourceType::Specimen,
        ResourceType::DiagnosticReport,
        ResourceType::AllergyIntolerance,
        ResourceType::ResearchStudy,
        ResourceType::OperationOutcome,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ResourceType::Patient => "Patient",
            ResourceType::Condition => "Condition",
            ResourceType::MedicationRequest => "MedicationRequest",
            ResourceType::Procedure => "Procedure",
            ResourceType::Observation => "Observation",
            ResourceType::Specimen => "Specimen",
            ResourceType::DiagnosticReport => "DiagnosticReport",
            ResourceType::AllergyIntolerance => "AllergyIntolerance",
            ResourceType::ResearchStudy => "ResearchStudy",
            ResourceType::OperationOutcome => "OperationOutcome",
        }
    }

    pub fn parse(s: &str) -> Option<ResourceType> {
        ResourceType::ALL.iter().copied().find(|t| t.as_str() == s)
    }
}

impl std::fmt::Display for ResourceType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference targets accepted besides the modeled resource types.
pub const EXTERNAL_REFERENCE_TYPES: [&str; 4] =
    ["Group", "Practitioner", "Organization", "Location"];

#[derive(Debug, Clone, PartialEq)]
pub enum Resource {
    Patient(Patient),
    Condition(Condition),
    MedicationRequest(MedicationRequest),
    Procedure(Procedure),
    Observation(Observation),
    Specimen(Specimen),
    DiagnosticReport(DiagnosticReport),
    AllergyIntolerance(AllergyIntolerance),
    ResearchStudy(ResearchStudy),
    OperationOutcome(OperationOutcome),
}

macro_rules! each_resource {
    ($self:expr, $r:ident => $body:expr) => {
        match $self {
            Resource::Patient($r) => $body,
            Resource::Condition($r) => $body,
            Resource::MedicationRequest($r) => $body,
            Resource::Procedure($r) => $body,
            Resource::Observation($r) => $body,
            Resource::Specimen($r) => $body,
            Resource::DiagnosticReport($r) => $body,
            Resource::AllergyIntolerance($r) => $body,
            Resource::ResearchStudy($r) => $body,
            Resource::OperationOutcome($r) => $body,
        }
    };
}

impl Resource {
    pub fn resource_type(&self) -> ResourceType {
        match self {
            Resource::Patient(_) => ResourceType::Patient,
            Resource::Condition(_) => ResourceType::Condition,
            Resource::MedicationRequest(_) => ResourceType::MedicationRequest,
            Resource::Procedure(_) => ResourceType::Procedure,
            Resource::Observation(_) => ResourceType::Observation,
            Resource::Specimen(_) => ResourceType::Specimen,
            Resource::DiagnosticReport(_) => ResourceType::DiagnosticReport,
            Resource::AllergyIntolerance(_) => ResourceType::AllergyIntolerance,
            Resource::ResearchStudy(_) => ResourceType::ResearchStudy,
            Resource::OperationOutcome(_) => ResourceType::OperationOutcome,
        }
    }

    pub fn id(&self) -> &str {
        each_resource!(self, r => &r.id)
    }

    pub fn meta(&self) -> Option<&Meta> {
        each_resource!(self, r => r.meta.as_ref())
    }

    pub fn meta_mut(&mut self) -> &mut Option<Meta> {
        each_resource!(self, r => &mut r.meta)
    }

    pub fn profiles(&self) -> &[String] {
        self.meta().map(|m| m.profiles.as_slice()).unwrap_or(&[])
    }

    pub fn extensions(&self) -> &[Extension] {
        each_resource!(self, r => &r.extension)
    }

    pub fn extensions_mut(&mut self) -> &mut Vec<Extension> {
        each_resource!(self, r => &mut r.extension)
    }

    /// `<ResourceType>/<id>`
    pub fn reference(&self) -> Reference {
        Reference::to(self.resource_type().as_str(), self.id())
    }

    /// The primary code of the resource, when it has one.
    pub fn code(&self) -> Option<&CodeableConcept> {
        match self {
            Resource::Condition(r) => r.code.as_ref(),
            Resource::Observation(r) => r.code.as_ref(),
            Resource::MedicationRequest(r) => r.medication.as_ref(),
            Resource::Procedure(r) => r.code.as_ref(),
            Resource::DiagnosticReport(r) => r.code.as_ref(),
            Resource::AllergyIntolerance(r) => r.code.as_ref(),
            Resource::Specimen(r) => r.specimen_type.as_ref(),
            _ => None,
        }
    }
}
