//! Oncology note standardization: extraction, FHIR building, mCODE tagging, conformance
//! checking and trial matching.

pub mod builder;
pub mod catalog;
pub mod conformance;
pub mod extraction;
pub mod fhir;
pub mod matching;
pub mod mcode;
pub mod pipeline;
pub mod registry;
pub mod terminology;
