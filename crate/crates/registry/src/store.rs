//! Append-only file of canonical JSON lines, one record per line. The last
//! line for an (id, version) wins; startup rewrites the file compacted.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use cube_conformance::ComplianceReport;
use serde::{Deserialize, Serialize};

use crate::{RegistryEntry, RegistryError, VerificationState, INTERRUPTED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub entry: RegistryEntry,
    pub report: Option<ComplianceReport>,
}

impl Record {
    pub fn canonical_line(&self) -> Vec<u8> {
        let mut line = cube_core::canonical::to_vec(self).expect("records hold finite values only");
        line.push(b'\n');
        line
    }
}

pub struct Store {
    path: PathBuf,
    file: File,
}

fn io(path: &Path, e: std::io::Error) -> RegistryError {
    RegistryError::Store(format!("{}: {e}", path.display()))
}

impl Store {
    /// Reads every record, compacts the file and reopens it for appending.
    /// Entries left pending by a crash come back failed.
    pub fn open(path: &Path) -> Result<(Self, Vec<Record>), RegistryError> {
        let mut latest: std::collections::BTreeMap<(String, semver::Version), Record> = Default::default();
        match File::open(path) {
            Ok(file) => {
                for (n, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|e| io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<Record>(&line) {
                        Ok(record) => {
                            latest.insert((record.entry.id.clone(), record.entry.semver()), record);
                        }
                        Err(e) => log::warn!("{}:{}: skipping unreadable record: {e}", path.display(), n + 1),
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io(path, e)),
        }

        let mut records: Vec<Record> = latest.into_values().collect();
        for record in &mut records {
            if record.entry.verification_state == VerificationState::Pending {
                record.entry.verification_state = VerificationState::Failed;
                record.entry.verification_detail = Some(INTERRUPTED.to_owned());
            }
        }

        let tmp = path.with_extension("compact.tmp");
        {
            let mut out = File::create(&tmp).map_err(|e| io(&tmp, e))?;
            for record in &records {
                out.write_all(&record.canonical_line()).map_err(|e| io(&tmp, e))?;
            }
            out.sync_all().map_err(|e| io(&tmp, e))?;
        }
        std::fs::rename(&tmp, path).map_err(|e| io(path, e))?;

        let file = OpenOptions::new().append(true).open(path).map_err(|e| io(path, e))?;
        Ok((Self { path: path.to_owned(), file }, records))
    }

    pub fn append(&mut self, record: &Record) -> Result<(), RegistryError> {
        self.file.write_all(&record.canonical_line()).map_err(|e| io(&self.path, e))?;
        self.file.flush().map_err(|e| io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
