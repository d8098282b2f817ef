//! Rating-log ingestion and reputation-snapshot persistence.
//!
//! Snapshots can be kept transient (in memory, recomputed on the fly),
//! locally persistent (one file tree per agency), or globally persistent
//! (one shared tree for all agencies, with identical re-writes allowed and
//! conflicting writes rejected). Writes go through a temp-file rename so
//! readers never observe partial files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::AgencyId;
use crate::model::{
    canonical_hash, validate_record, RatingRecord, RawRecord, ReputationState, StateDigest,
    Timestamp,
};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("cannot read input: {0}")]
    UnreadableInput(#[source] std::io::Error),
    #[error("snapshot not found: {0}")]
    NotFound(String),
    #[error("snapshot digest mismatch: stored {stored}, recomputed {recomputed}")]
    HashMismatch {
        stored: StateDigest,
        recomputed: StateDigest,
    },
    #[error("conflicting snapshot for {key}: existing hash {existing}, new hash {new}")]
    SnapshotConflict {
        key: String,
        existing: StateDigest,
        new: StateDigest,
    },
    #[error("snapshot is not valid JSON: {0}")]
    Malformed(#[source] serde_json::Error),
    #[error("snapshot violates state invariants: {0}")]
    InvalidState(#[from] crate::model::StateError),
    #[error("non-finite value in state: {0}")]
    Hash(#[from] crate::model::HashError),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Input encodings accepted by [`ingest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    JsonLines,
    Csv,
}

impl LogFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::Csv,
            _ => Self::JsonLines,
        }
    }
}

/// A rejected input line and why it was rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// The result of ingesting a rating log: valid records sorted by
/// (time, from, to, kind), plus one error per rejected line. Every input
/// line ends up in exactly one of the two.
#[derive(Debug, Clone, Default)]
pub struct IngestOutcome {
    pub records: Vec<RatingRecord>,
    pub errors: Vec<LineError>,
}

/// Read and validate a rating log from a file.
pub fn ingest_path(path: &Path, format: Option<LogFormat>) -> Result<IngestOutcome, StorageError> {
    let format = format.unwrap_or_else(|| LogFormat::from_path(path));
    let file = fs::File::open(path).map_err(StorageError::UnreadableInput)?;
    ingest(BufReader::new(file), format)
}

/// Read and validate a rating log from any reader.
pub fn ingest<R: Read>(reader: R, format: LogFormat) -> Result<IngestOutcome, StorageError> {
    let mut out = IngestOutcome::default();
    match format {
        LogFormat::JsonLines => {
            let reader = BufReader::new(reader);
            for (idx, line) in reader.lines().enumerate() {
                let line_no = idx + 1;
                let line = line.map_err(StorageError::UnreadableInput)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<RawRecord>(&line) {
                    Ok(raw) => match validate_record(raw) {
                        Ok(record) => out.records.push(record),
                        Err(e) => out.errors.push(LineError {
                            line: line_no,
                            message: e.to_string(),
                        }),
                    },
                    Err(e) => out.errors.push(LineError {
                        line: line_no,
                        message: format!("invalid json: {e}"),
                    }),
                }
            }
        }
        LogFormat::Csv => {
            let mut csv_reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_reader(reader);
            #[derive(Deserialize)]
            struct CsvRow {
                kind: Option<String>,
                from: Option<String>,
                to: Option<String>,
                time: Option<u64>,
                value: Option<f64>,
                weight: Option<f64>,
                #[serde(default)]
                aspect: Option<String>,
                #[serde(default)]
                category: Option<String>,
                #[serde(default)]
                event: Option<String>,
            }
            for (idx, row) in csv_reader.deserialize::<CsvRow>().enumerate() {
                let line_no = idx + 2; // header occupies line 1
                match row {
                    Ok(row) => {
                        let blank_to_none = |s: Option<String>| s.filter(|v| !v.is_empty());
                        let raw = RawRecord {
                            kind: blank_to_none(row.kind),
                            from: blank_to_none(row.from),
                            to: blank_to_none(row.to),
                            time: row.time,
                            value: row.value,
                            weight: row.weight,
                            aspect: blank_to_none(row.aspect),
                            category: blank_to_none(row.category),
                            event: blank_to_none(row.event),
                        };
                        match validate_record(raw) {
                            Ok(record) => out.records.push(record),
                            Err(e) => out.errors.push(LineError {
                                line: line_no,
                                message: e.to_string(),
                            }),
                        }
                    }
                    Err(e) => out.errors.push(LineError {
                        line: line_no,
                        message: format!("invalid csv row: {e}"),
                    }),
                }
            }
        }
    }
    out.records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(out)
}

/// Serialize records as JSON Lines, one record per line.
pub fn write_rating_log<W: std::io::Write>(
    records: &[RatingRecord],
    mut out: W,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// On-disk snapshot document: the state plus its canonical digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub as_of: Timestamp,
    pub origin: Timestamp,
    pub entries: BTreeMap<crate::model::MemberId, f64>,
    pub hash: StateDigest,
}

impl SnapshotDoc {
    pub fn from_state(state: &ReputationState, precision: u8) -> Result<Self, StorageError> {
        Ok(Self {
            as_of: state.as_of,
            origin: state.origin,
            entries: state.entries.clone(),
            hash: canonical_hash(state, precision)?,
        })
    }

    pub fn into_state(self) -> ReputationState {
        ReputationState {
            as_of: self.as_of,
            origin: self.origin,
            entries: self.entries,
        }
    }
}

/// Where a saved snapshot ended up.
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotRef {
    /// Kept in memory only.
    Transient,
    File(PathBuf),
}

/// Snapshot persistence in one of the three storage modes.
#[derive(Debug)]
pub enum SnapshotStore {
    Transient {
        cache: BTreeMap<(AgencyId, Timestamp), ReputationState>,
    },
    /// Each agency owns a private subtree; re-saving overwrites.
    LocalPersistent { root: PathBuf },
    /// All agencies share one subtree; identical writes are idempotent,
    /// conflicting writes fail.
    GlobalPersistent { root: PathBuf },
}

impl SnapshotStore {
    pub fn transient() -> Self {
        Self::Transient {
            cache: BTreeMap::new(),
        }
    }

    pub fn local(root: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self::LocalPersistent { root })
    }

    pub fn global(root: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self::GlobalPersistent { root })
    }

    fn snapshot_path(root: &Path, scope: &str, as_of: Timestamp) -> PathBuf {
        root.join(scope).join(format!("{}.json", as_of.ticks()))
    }

    /// Persist a state snapshot for `agency`.
    pub fn save(
        &mut self,
        state: &ReputationState,
        agency: &AgencyId,
        precision: u8,
    ) -> Result<SnapshotRef, StorageError> {
        state.check()?;
        match self {
            Self::Transient { cache } => {
                cache.insert((agency.clone(), state.as_of), state.clone());
                Ok(SnapshotRef::Transient)
            }
            Self::LocalPersistent { root } => {
                let path = Self::snapshot_path(root, agency.as_str(), state.as_of);
                let doc = SnapshotDoc::from_state(state, precision)?;
                write_atomically(&path, &doc)?;
                Ok(SnapshotRef::File(path))
            }
            Self::GlobalPersistent { root } => {
                let path = Self::snapshot_path(root, "shared", state.as_of);
                let doc = SnapshotDoc::from_state(state, precision)?;
                if path.exists() {
                    let existing: SnapshotDoc = read_doc(&path)?;
                    if existing.hash == doc.hash {
                        return Ok(SnapshotRef::File(path)); // idempotent re-write
                    }
                    return Err(StorageError::SnapshotConflict {
                        key: path.display().to_string(),
                        existing: existing.hash,
                        new: doc.hash,
                    });
                }
                write_atomically(&path, &doc)?;
                Ok(SnapshotRef::File(path))
            }
        }
    }

    /// Load the snapshot `agency` stored for `as_of`, verifying its digest
    /// and state invariants.
    pub fn load(
        &self,
        agency: &AgencyId,
        as_of: Timestamp,
        precision: u8,
    ) -> Result<ReputationState, StorageError> {
        match self {
            Self::Transient { cache } => cache
                .get(&(agency.clone(), as_of))
                .cloned()
                .ok_or_else(|| {
                    StorageError::NotFound(format!("{}@{}", agency, as_of.ticks()))
                }),
            Self::LocalPersistent { root } => {
                load_checked(&Self::snapshot_path(root, agency.as_str(), as_of), precision)
            }
            Self::GlobalPersistent { root } => {
                load_checked(&Self::snapshot_path(root, "shared", as_of), precision)
            }
        }
    }
}

fn write_atomically(path: &Path, doc: &SnapshotDoc) -> Result<(), StorageError> {
    let dir = path.parent().expect("snapshot paths always have a parent");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("snapshot")
    ));
    fs::write(&tmp, serde_json::to_vec_pretty(doc).expect("snapshot serializes"))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_doc(path: &Path) -> Result<SnapshotDoc, StorageError> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(StorageError::Malformed)
}

fn load_checked(path: &Path, precision: u8) -> Result<ReputationState, StorageError> {
    if !path.exists() {
        return Err(StorageError::NotFound(path.display().to_string()));
    }
    let doc = read_doc(path)?;
    let stored = doc.hash.clone();
    let state = doc.into_state();
    state.check()?;
    let recomputed = canonical_hash(&state, precision)?;
    if recomputed != stored {
        return Err(StorageError::HashMismatch {
            stored,
            recomputed,
        });
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MemberId;

    fn sample_state() -> ReputationState {
        ReputationState {
            as_of: Timestamp(7),
            origin: Timestamp(0),
            entries: [
                (MemberId::from("a"), 0.5),
                (MemberId::from("b"), -0.25),
            ]
            .into_iter()
            .collect(),
        }
    }

    #[test]
    fn jsonl_happy_path_sorts_by_time() {
        let input = concat!(
            r#"{"kind":"vote","from":"j","to":"i","time":3,"value":0.5,"weight":1.0}"#,
            "\n",
            r#"{"kind":"vote","from":"j","to":"i","time":1,"value":0.1,"weight":1.0}"#,
            "\n",
            r#"{"kind":"endorse","from":"k","to":"i","time":2,"value":1.0,"weight":2.0}"#,
            "\n",
        );
        let out = ingest(input.as_bytes(), LogFormat::JsonLines).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.errors.is_empty());
        let times: Vec<u64> = out.records.iter().map(|r| r.time.ticks()).collect();
        assert_eq!(times, vec![1, 2, 3]);
    }

    #[test]
    fn bad_lines_are_reported_with_line_numbers() {
        let input = concat!(
            r#"{"kind":"vote","from":"i","to":"i","time":1,"value":0.5,"weight":1.0}"#,
            "\n",
            "not json\n",
            r#"{"kind":"vote","from":"j","to":"i","time":1,"value":0.5,"weight":1.0}"#,
            "\n",
        );
        let out = ingest(input.as_bytes(), LogFormat::JsonLines).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.errors.len(), 2);
        assert_eq!(out.errors[0].line, 1);
        assert!(out.errors[0].message.contains("self-rating"));
        assert_eq!(out.errors[1].line, 2);
    }

    #[test]
    fn every_line_is_either_a_record_or_an_error() {
        let mut input = String::new();
        for i in 0..50 {
            if i % 3 == 0 {
                input.push_str("garbage\n");
            } else {
                input.push_str(&format!(
                    "{{\"kind\":\"vote\",\"from\":\"j\",\"to\":\"i\",\"time\":{i},\"value\":0.5,\"weight\":1.0}}\n"
                ));
            }
        }
        let out = ingest(input.as_bytes(), LogFormat::JsonLines).unwrap();
        assert_eq!(out.records.len() + out.errors.len(), 50);
    }

    #[test]
    fn csv_ingestion_with_blank_optionals() {
        let input = "kind,from,to,time,value,weight,aspect,category,event\n\
                     vote,j,i,1,0.5,1.0,quality,,\n\
                     finance,k,i,2,,100.0,,,\n\
                     vote,x,x,3,0.5,1.0,,,\n";
        let out = ingest(input.as_bytes(), LogFormat::Csv).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].aspect.as_ref().unwrap().as_str(), "quality");
        assert!(out.records[0].category.is_none());
        assert_eq!(out.records[1].value, 1.0);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line, 4);
    }

    #[test]
    fn shuffled_input_ingests_to_the_same_sequence() {
        let mut lines: Vec<String> = (1..=20)
            .map(|t| {
                format!(
                    "{{\"kind\":\"vote\",\"from\":\"j{t}\",\"to\":\"i\",\"time\":{},\"value\":0.5,\"weight\":1.0}}",
                    21 - t
                )
            })
            .collect();
        let sorted = ingest(lines.join("\n").as_bytes(), LogFormat::JsonLines).unwrap();
        lines.reverse();
        let reversed = ingest(lines.join("\n").as_bytes(), LogFormat::JsonLines).unwrap();
        assert_eq!(sorted.records, reversed.records);
    }

    #[test]
    fn transient_round_trip_and_miss() {
        let mut store = SnapshotStore::transient();
        let state = sample_state();
        let agency = AgencyId::from("ra-1");
        assert_eq!(
            store.save(&state, &agency, 10).unwrap(),
            SnapshotRef::Transient
        );
        assert_eq!(store.load(&agency, Timestamp(7), 10).unwrap(), state);
        assert!(matches!(
            store.load(&agency, Timestamp(8), 10),
            Err(StorageError::NotFound(_))
        ));
    }

    #[test]
    fn local_round_trip_preserves_state_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = SnapshotStore::local(dir.path()).unwrap();
        let state = sample_state();
        let agency = AgencyId::from("ra-1");
        let saved = store.save(&state, &agency, 10).unwrap();
        let SnapshotRef::File(path) = &saved else {
            panic!("expected file ref");
        };
        assert!(path.exists());
        let loaded = store.load(&agency, Timestamp(7), 10).unwrap();
        assert_eq!(loaded, state);
        assert_eq!(
            canonical_hash(&loaded, 10).unwrap(),
            canonical_hash(&state, 10).unwrap()
        );
    }

    #[test]
    fn global_identical_writes_are_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = SnapshotStore::global(dir.path()).unwrap();
        let state = sample_state();
        store.save(&state, &AgencyId::from("ra-1"), 10).unwrap();
        // a different agency writing the identical state succeeds
        store.save(&state, &AgencyId::from("ra-2"), 10).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path().join("shared"))
            .unwrap()
            .collect();
        assert_eq!(files.len(), 1);
    }

    #[test]
    fn global_conflicting_writes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = SnapshotStore::global(dir.path()).unwrap();
        let state = sample_state();
        store.save(&state, &AgencyId::from("ra-1"), 10).unwrap();
        let mut other = state.clone();
        other.entries.insert(MemberId::from("a"), 0.9);
        assert!(matches!(
            store.save(&other, &AgencyId::from("ra-2"), 10),
            Err(StorageError::SnapshotConflict { .. })
        ));
    }

    #[test]
    fn corrupted_snapshot_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = SnapshotStore::local(dir.path()).unwrap();
        let state = sample_state();
        let agency = AgencyId::from("ra-1");
        let SnapshotRef::File(path) = store.save(&state, &agency, 10).unwrap() else {
            panic!("expected file ref");
        };
        let tampered = fs::read_to_string(&path).unwrap().replace("0.5", "0.75");
        fs::write(&path, tampered).unwrap();
        assert!(matches!(
            store.load(&agency, Timestamp(7), 10),
            Err(StorageError::HashMismatch { .. })
        ));
    }
}
