//! Loads the shipped data directory: code tables, value sets, lexicons, keyword tables, profiles.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;

use crate::conformance::ProfileDefinition;
use crate::terminology::{tsv_rows, normalize_term, CodeSystemId, CodeTable, TableError, ValueSets};

pub const DATA_DIR_ENV: &str = "ONCO_DATA_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Table {
        file: String,
        #[source]
        source: TableError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelKeyword {
    /// Normalized keyword.
    pub keyword: String,
    pub loinc: String,
    pub section_code: String,
    pub section_display: String,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub dir: PathBuf,
    pub codes: CodeTable,
    pub value_sets: ValueSets,
    pub abbreviations: Vec<(String, String)>,
    /// (canonical section id, heading synonym)
    pub headings: Vec<(String, String)>,
    pub boilerplate: Vec<Regex>,
    /// Normalized keywords.
    pub imaging_keywords: Vec<String>,
    pub panel_keywords: Vec<PanelKeyword>,
    /// (system, code, biomarker name)
    pub genomics_codes: Vec<(CodeSystemId, String, String)>,
    pub disease_status_codes: Vec<(CodeSystemId, String)>,
    pub profiles: Vec<ProfileDefinition>,
}

fn read(dir: &Path, name: &str) -> Result<String, CatalogError> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|source| CatalogError::Io { path, source })
}

fn table_err(file: &str) -> impl Fn(TableError) -> CatalogError + '_ {
    move |source| CatalogError::Table {
        file: file.to_string(),
        source,
    }
}

fn columns<'a>(
    file: &'a str,
    text: &'a str,
    n: usize,
) -> impl Iterator<Item = Result<(usize, Vec<&'a str>), CatalogError>> + 'a {
    tsv_rows(text).map(move |(line, cols)| {
        if cols.len() < n || cols[..n].iter().any(|c| c.is_empty()) {
            Err(CatalogError::Table {
                file: file.to_string(),
                source: TableError::Parse {
                    line,
                    message: format!("expected {n} non-empty columns"),
                },
            })
        } else {
            Ok((line, cols))
        }
    })
}

fn system(file: &str, line: usize, s: &str) -> Result<CodeSystemId, CatalogError> {
    CodeSystemId::parse(s).ok_or_else(|| CatalogError::Table {
        file: file.to_string(),
        source: TableError::Parse {
            line,
            message: format!("unknown code system {s:?}"),
        },
    })
}

impl Catalog {
    /// `ONCO_DATA_DIR` when set, otherwise the data directory shipped with this crate.
    pub fn default_dir() -> PathBuf {
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data")))
    }

    pub fn load(dir: &Path) -> Result<Catalog, CatalogError> {
        let codes = CodeTable::parse_tsv(&read(dir, "codes.tsv")?).map_err(table_err("codes.tsv"))?;
        let value_sets = ValueSets::parse_tsv(
            &read(dir, "valuesets.tsv")?,
            &read(dir, "valueset_aliases.tsv")?,
        )
        .map_err(table_err("valuesets.tsv"))?;

        let text = read(dir, "abbreviations.tsv")?;
        let abbreviations = columns("abbreviations.tsv", &text, 2)
            .map(|r| r.map(|(_, c)| (c[0].to_string(), c[1].to_string())))
            .collect::<Result<_, _>>()?;

        let text = read(dir, "headings.tsv")?;
        let headings = columns("headings.tsv", &text, 2)
            .map(|r| r.map(|(_, c)| (c[0].to_string(), c[1].to_string())))
            .collect::<Result<_, _>>()?;

        let text = read(dir, "boilerplate.txt")?;
        let mut boilerplate = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let re = Regex::new(line).map_err(|e| CatalogError::Table {
                file: "boilerplate.txt".into(),
                source: TableError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                },
            })?;
            boilerplate.push(re);
        }

        let text = read(dir, "imaging_keywords.tsv")?;
        let imaging_keywords = columns("imaging_keywords.tsv", &text, 1)
            .map(|r| r.map(|(_, c)| normalize_term(c[0])))
            .collect::<Result<_, _>>()?;

        let text = read(dir, "panel_keywords.tsv")?;
        let panel_keywords = columns("panel_keywords.tsv", &text, 4)
            .map(|r| {
                r.map(|(_, c)| PanelKeyword {
                    keyword: normalize_term(c[0]),
                    loinc: c[1].to_string(),
                    section_code: c[2].to_string(),
                    section_display: c[3].to_string(),
                })
            })
            .collect::<Result<_, _>>()?;

        let text = read(dir, "genomics_codes.tsv")?;
        let mut genomics_codes = Vec::new();
        for r in columns("genomics_codes.tsv", &text, 3) {
            let (line, c) = r?;
            genomics_codes.push((
                system("genomics_codes.tsv", line, c[0])?,
                c[1].to_string(),
                c[2].to_string(),
            ));
        }

        let text = read(dir, "disease_status_codes.tsv")?;
        let mut disease_status_codes = Vec::new();
        for r in columns("disease_status_codes.tsv", &text, 2) {
            let (line, c) = r?;
            disease_status_codes.push((system("disease_status_codes.tsv", line, c[0])?, c[1].to_string()));
        }

        let profiles = ProfileDefinition::parse_tsv(&read(dir, "profiles.tsv")?)
            .map_err(table_err("profiles.tsv"))?;

        Ok(Catalog {
            dir: dir.to_path_buf(),
            codes,
            value_sets,
            abbreviations,
            headings,
            boilerplate,
            imaging_keywords,
            panel_keywords,
            genomics_codes,
            disease_status_codes,
            profiles,
        })
    }

    /// Process-wide catalog from [`Catalog::default_dir`], loaded on first use.
    pub fn try_global() -> Result<&'static Catalog, &'static CatalogError> {
        static GLOBAL: OnceLock<Result<Catalog, CatalogError>> = OnceLock::new();
        GLOBAL
            .get_or_init(|| Catalog::load(&Catalog::default_dir()))
            .as_ref()
    }

    pub fn global() -> &'static Catalog {
        match Catalog::try_global() {
            Ok(c) => c,
            Err(e) => panic!("cannot load data directory: {e}"),
        }
    }

    pub fn biomarker_for(&self, system: CodeSystemId, code: &str) -> Option<&str> {
        self.genomics_codes
            .iter()
            .find(|(s, c, _)| *s == system && c == code)
            .map(|(_, _, b)| b.as_str())
    }

    pub fn is_disease_status_code(&self, system: CodeSystemId, code: &str) -> bool {
        self.disease_status_codes
            .iter()
            .any(|(s, c)| *s == system && c == code)
    }

    /// First panel keyword occurring in the text, in table order.
    pub fn panel_for(&self, text: &str) -> Option<&PanelKeyword> {
        let norm = format!(" {} ", normalize_term(text));
        self.panel_keywords
            .iter()
            .find(|p| norm.contains(&format!(" {} ", p.keyword)))
    }

    pub fn is_imaging(&self, name: &str) -> bool {
        let norm = format!(" {} ", normalize_term(name));
        self.imaging_keywords
            .iter()
            .any(|k| norm.contains(&format!(" {k} ")))
    }

    pub fn profile(&self, name: &str) -> Option<&ProfileDefinition> {
        self.profiles.iter().find(|p| p.name == name)
    }
}
