#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::path::PathBuf;

pub fn data_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data"))
}

pub fn fixture(name: &str) -> String {
    let p = data_dir().join("fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Text of a corpus note by directory name.
pub fn note(name: &str) -> String {
    let p = data_dir().join("corpus").join(name).join("note.txt");
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}
