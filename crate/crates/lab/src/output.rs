//! Artifacts of one run and the directory writer with its manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use sieve_core::grid::GridField;

use crate::field_io::field_bytes;
use crate::svg::Plot;
use crate::table::{Cell, Table};

pub const MANIFEST: &str = "manifest.csv";

/// Everything an experiment produces, in emission order.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub tables: Vec<(String, Table)>,
    pub plots: Vec<(String, Plot)>,
    pub fields: Vec<(String, GridField)>,
}

impl Artifacts {
    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.push((format!("{name}.csv"), table));
    }

    pub fn plot(&mut self, name: &str, plot: Plot) {
        self.plots.push((format!("{name}.svg"), plot));
    }

    pub fn field(&mut self, name: &str, field: GridField) {
        self.fields.push((format!("{name}.bin"), field));
    }

    pub fn get_table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == file).map(|(_, t)| t)
    }

    /// File name and content of every artifact.
    pub fn files(&self) -> Vec<(String, Vec<u8>)> {
        let mut out: Vec<(String, Vec<u8>)> = self.tables.iter().map(|(n, t)| (n.clone(), t.to_bytes())).collect();
        out.extend(self.plots.iter().map(|(n, p)| (n.clone(), p.render().into_bytes())));
        out.extend(self.fields.iter().map(|(n, f)| (n.clone(), field_bytes(f))));
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<root>/<experiment>-<timestamp>`, with a numeric suffix if taken.
pub fn run_directory(root: &Path, experiment: &str, timestamp: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    let base = root.join(format!("{experiment}-{timestamp}"));
    let mut dir = base.clone();
    let mut n = 1;
    loop {
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                dir = PathBuf::from(format!("{}-{n}", base.display()));
                n += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Writes every artifact into `dir` and the manifest listing each file
/// with its SHA-256. Returns the manifest.
pub fn write_artifacts(dir: &Path, artifacts: &Artifacts) -> io::Result<Table> {
    let mut manifest = Table::new(["file", "sha256", "bytes"]);
    for (name, bytes) in artifacts.files() {
        fs::write(dir.join(&name), &bytes)?;
        manifest.push(vec![Cell::Text(name), Cell::Text(sha256_hex(&bytes)), bytes.len().into()]);
    }
    fs::write(dir.join(MANIFEST), manifest.to_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn directories_never_collide() {
        let root = tempfile::tempdir().unwrap();
        let a = run_directory(root.path(), "capacity", "20260101T000000Z").unwrap();
        let b = run_directory(root.path(), "capacity", "20260101T000000Z").unwrap();
        assert_ne!(a, b);
        assert!(a.ends_with("capacity-20260101T000000Z"));
    }

    #[test]
    fn manifest_hashes_match_the_written_files() {
        let root = tempfile::tempdir().unwrap();
        let mut art = Artifacts::default();
        let mut t = Table::new(["x"]);
        t.push(vec![1.0.into()]);
        art.table("values", t);
        let m = write_artifacts(root.path(), &art).unwrap();
        let bytes = fs::read(root.path().join("values.csv")).unwrap();
        assert_eq!(m.rows[0][1], sha256_hex(&bytes));
        let read = Table::read(fs::File::open(root.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(read, m);
    }
}
