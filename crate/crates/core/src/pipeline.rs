//! End-to-end steps shared by the CLI and the HTTP service, so both emit the same bytes.

use std::path::Path;

use crate::builder::build_bundle;
use crate::catalog::Catalog;
use crate::conformance::{load_corpus, score, validate_bundle, ConformanceError, MetricsReport, ValidationReport};
use crate::extraction::{run_extractor, ExtractError, Extractor, RawNote};
use crate::fhir::{Bundle, FhirError};
use crate::mcode::to_mcode_bundle;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Fhir(#[from] FhirError),
    #[error(transparent)]
    Conformance(#[from] ConformanceError),
}

impl PipelineError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Extract(ExtractError::EmptyNote) => "EmptyNote",
            PipelineError::Extract(ExtractError::BackendFailure(_)) => "BackendFailure",
            PipelineError::Fhir(FhirError::Syntax { .. }) => "SyntaxError",
            PipelineError::Fhir(FhirError::Schema { .. }) => "SchemaError",
            PipelineError::Fhir(FhirError::DanglingReference { .. }) => "DanglingReference",
            PipelineError::Fhir(FhirError::NotFound { .. }) => "NotFound",
            PipelineError::Fhir(FhirError::DuplicateId { .. }) => "DuplicateId",
            PipelineError::Conformance(_) => "CorpusError",
        }
    }

    pub fn path(&self) -> Option<&str> {
        match self {
            PipelineError::Fhir(e) => e.path(),
            _ => None,
        }
    }
}

/// Note text to document bundle.
pub fn convert(cat: &Catalog, x: &dyn Extractor, note: &str) -> Result<Bundle, PipelineError> {
    let v = run_extractor(cat, x, &RawNote::new(note))?;
    Ok(build_bundle(cat, &v))
}

pub fn convert_text(cat: &Catalog, x: &dyn Extractor, note: &str) -> Result<String, PipelineError> {
    Ok(convert(cat, x, note)?.serialize())
}

pub fn mcode(cat: &Catalog, bundle_text: &str) -> Result<Bundle, PipelineError> {
    let b = Bundle::parse(bundle_text)?;
    Ok(to_mcode_bundle(cat, &b).bundle)
}

pub fn mcode_text(cat: &Catalog, bundle_text: &str) -> Result<String, PipelineError> {
    Ok(mcode(cat, bundle_text)?.serialize())
}

pub fn validate(cat: &Catalog, bundle_text: &str) -> Result<ValidationReport, PipelineError> {
    let b = Bundle::parse(bundle_text)?;
    Ok(validate_bundle(cat, &b, &cat.profiles))
}

/// Scores an extractor over a gold corpus directory.
pub fn score_corpus(cat: &Catalog, x: &dyn Extractor, dir: &Path) -> Result<MetricsReport, PipelineError> {
    let corpus = load_corpus(dir)?;
    let mut pairs = Vec::with_capacity(corpus.len());
    for n in corpus {
        let v = run_extractor(cat, x, &RawNote::new(n.text))?;
        pairs.push((v, n.gold));
    }
    Ok(score(cat, &pairs)?)
}

pub fn default_corpus_dir(cat: &Catalog) -> std::path::PathBuf {
    cat.dir.join("corpus")
}
