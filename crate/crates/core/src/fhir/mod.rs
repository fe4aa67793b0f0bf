//! Typed model of the FHIR R4 subset used by the pipeline.

mod bundle;
mod datatypes;
mod resources;
mod wire;

pub use bundle::{assemble_bundle, resolve_reference, Bundle, BundleType};
pub use datatypes::*;
pub use resources::*;
pub use wire::{
    all_codings, check_invariants, concepts, is_valid_id, parse_resource, references,
    resource_from_value, resource_to_value, serialize_resource, to_pretty,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FhirError {
    #[error("syntax error at {path}: {message}")]
    Syntax { path: String, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference {target} at {path}")]
    DanglingReference { path: String, target: String },
    #[error("reference {target} not found")]
    NotFound { target: String },
    #[error("duplicate resource id {id}")]
    DuplicateId { id: String },
}

impl FhirError {
    /// Element path for errors that have one.
    pub fn path(&self) -> Option<&str> {
        match self {
            FhirError::Syntax { path, .. }
            | FhirError::Schema { path, .. }
            | FhirError::DanglingReference { path, .. } => Some(path),
            _ => None,
        }
    }
}
