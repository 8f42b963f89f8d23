//! Append-only annotation event log.
//!
//! Events live in `events.jsonl` inside the store directory, one JSON object
//! per LF-terminated line, and are fsynced before `append` returns. Every
//! `snapshot_every` appends the in-memory indexes are written to
//! `snapshot.json` (tagged [`SNAPSHOT_FORMAT`]) so that reopening only replays
//! the log tail. A torn final line left by a crash is ignored and terminated on
//! the next append; the log is never truncated or rewritten.

mod export;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::scheme::{validate, AnnotationRecord, BinaryLabel, GatingViolation};

pub use export::{
    build_export, export, import, AggregateRow, DatasetExport, DerivedRow, ExportContext, ExportFormat, ExportManifest,
    ImportReport, EVENT_CSV_COLUMNS, EXPORT_FORMAT,
};

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const SNAPSHOT_FORMAT: &str = "hsa-store-snapshot/1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("payload rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<GatingViolation>),
    #[error("idempotency key does not match payload: {0}")]
    KeyMismatch(String),
    #[error("revision must be at least 1")]
    ZeroRevision,
    #[error("imported sequence number {got} does not follow {last}")]
    SequenceOrder { last: u64, got: u64 },
    #[error(transparent)]
    Derivation(#[from] crate::agreement::AgreementError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Binary,
    Multilevel,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Binary => "binary",
            Arm::Multilevel => "multilevel",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Arm::Binary),
            "multilevel" => Ok(Arm::Multilevel),
            other => Err(format!("unknown arm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdempotencyKey {
    pub annotator_id: String,
    pub comment_id: String,
    pub revision: u32,
}

/// A single ±hate speech judgment from the binary arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryJudgment {
    pub comment_id: String,
    pub annotator_id: String,
    pub label: BinaryLabel,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arm", content = "payload", rename_all = "lowercase")]
pub enum Payload {
    Binary(BinaryJudgment),
    Multilevel(AnnotationRecord),
}

impl Payload {
    pub fn arm(&self) -> Arm {
        match self {
            Payload::Binary(_) => Arm::Binary,
            Payload::Multilevel(_) => Arm::Multilevel,
        }
    }

    pub fn annotator_id(&self) -> &str {
        match self {
            Payload::Binary(b) => &b.annotator_id,
            Payload::Multilevel(r) => &r.annotator_id,
        }
    }

    pub fn comment_id(&self) -> &str {
        match self {
            Payload::Binary(b) => &b.comment_id,
            Payload::Multilevel(r) => &r.comment_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub sequence_number: u64,
    pub idempotency_key: IdempotencyKey,
    #[serde(flatten)]
    pub payload: Payload,
    pub received_at: DateTime<Utc>,
}

impl AnnotationEvent {
    pub fn arm(&self) -> Arm {
        self.payload.arm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Appended {
    pub sequence_number: u64,
    /// The key was already stored; nothing was written.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub arm: Option<Arm>,
    pub annotator_id: Option<String>,
    pub comment_id: Option<String>,
    /// Only the highest revision per (annotator, comment).
    pub latest_only: bool,
}

impl EventFilter {
    fn matches(&self, e: &AnnotationEvent) -> bool {
        self.arm.is_none_or(|a| a == e.arm())
            && self.annotator_id.as_deref().is_none_or(|a| a == e.idempotency_key.annotator_id)
            && self.comment_id.as_deref().is_none_or(|c| c == e.idempotency_key.comment_id)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Snapshot {
    format: String,
    log_offset: u64,
    next_seq: u64,
    keys: Vec<(IdempotencyKey, u64)>,
    latest: Vec<AnnotationEvent>,
}

#[derive(Debug, Default)]
struct Index {
    next_seq: u64,
    keys: HashMap<IdempotencyKey, u64>,
    latest: BTreeMap<(String, String), AnnotationEvent>,
}

impl Index {
    fn insert(&mut self, event: &AnnotationEvent) {
        self.next_seq = self.next_seq.max(event.sequence_number + 1);
        self.keys.insert(event.idempotency_key.clone(), event.sequence_number);
        let slot = (event.idempotency_key.annotator_id.clone(), event.idempotency_key.comment_id.clone());
        match self.latest.get(&slot) {
            Some(cur) if cur.idempotency_key.revision > event.idempotency_key.revision => {}
            _ => {
                self.latest.insert(slot, event.clone());
            }
        }
    }
}

/// Read-only view of the committed log prefix; usable while appends continue.
#[derive(Debug, Clone)]
pub struct LogReader {
    path: PathBuf,
    len: u64,
}

impl LogReader {
    pub fn events(&self) -> Result<Vec<AnnotationEvent>, StoreError> {
        let mut out = Vec::new();
        scan_log(&self.path, 0, self.len, |e| out.push(e))?;
        Ok(out)
    }
}

/// Parses complete lines of the log in `[from, to)`. Returns the offset just
/// past the last complete line and the number of unparsable lines skipped.
fn scan_log(path: &Path, from: u64, to: u64, mut f: impl FnMut(AnnotationEvent)) -> Result<(u64, usize), StoreError> {
    let mut file = File::open(path).map_err(io_err(path))?;
    file.seek(SeekFrom::Start(from)).map_err(io_err(path))?;
    let mut reader = BufReader::new(file.take(to - from));
    let mut offset = from;
    let mut skipped = 0;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err(path))?;
        if n == 0 || buf.last() != Some(&b'\n') {
            break;
        }
        offset += n as u64;
        let line = &buf[..n - 1];
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match serde_json::from_slice::<AnnotationEvent>(line) {
            Ok(e) => f(e),
            Err(_) => skipped += 1,
        }
    }
    Ok((offset, skipped))
}

pub struct EventStore {
    dir: PathBuf,
    log: File,
    committed: u64,
    torn_tail: bool,
    index: Index,
    since_snapshot: usize,
    snapshot_every: usize,
    skipped_lines: usize,
}

impl EventStore {
    pub const DEFAULT_SNAPSHOT_EVERY: usize = 256;

    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(dir, Self::DEFAULT_SNAPSHOT_EVERY)
    }

    pub fn open_with(dir: impl AsRef<Path>, snapshot_every: usize) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let log_path = dir.join(LOG_FILE);
        let log = OpenOptions::new().create(true).append(true).read(true).open(&log_path).map_err(io_err(&log_path))?;
        let file_len = log.metadata().map_err(io_err(&log_path))?.len();

        let mut index = Index { next_seq: 1, ..Default::default() };
        let mut start = 0;
        if let Some(snap) = Self::read_snapshot(&dir.join(SNAPSHOT_FILE), file_len) {
            index.next_seq = snap.next_seq;
            index.keys = snap.keys.into_iter().collect();
            for e in snap.latest {
                index.latest.insert((e.idempotency_key.annotator_id.clone(), e.idempotency_key.comment_id.clone()), e);
            }
            start = snap.log_offset;
        }
        let (committed, skipped_lines) = scan_log(&log_path, start, file_len, |e| index.insert(&e))?;
        Ok(EventStore {
            dir,
            log,
            committed,
            torn_tail: committed < file_len,
            index,
            since_snapshot: 0,
            snapshot_every: snapshot_every.max(1),
            skipped_lines,
        })
    }

    fn read_snapshot(path: &Path, file_len: u64) -> Option<Snapshot> {
        let bytes = fs::read(path).ok()?;
        let snap: Snapshot = serde_json::from_slice(&bytes).ok()?;
        (snap.format == SNAPSHOT_FORMAT && snap.log_offset <= file_len).then_some(snap)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    /// Bytes of fully written events.
    pub fn committed_len(&self) -> u64 {
        self.committed
    }

    /// Unparsable lines seen in the replayed log tail at open.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn len(&self) -> usize {
        self.index.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.keys.is_empty()
    }

    pub fn reader(&self) -> LogReader {
        LogReader { path: self.log_path(), len: self.committed }
    }

    fn check(key: &IdempotencyKey, payload: &Payload) -> Result<(), StoreError> {
        if key.revision == 0 {
            return Err(StoreError::ZeroRevision);
        }
        if key.annotator_id != payload.annotator_id() || key.comment_id != payload.comment_id() {
            return Err(StoreError::KeyMismatch(format!(
                "key ({}, {}) vs payload ({}, {})",
                key.annotator_id,
                key.comment_id,
                payload.annotator_id(),
                payload.comment_id()
            )));
        }
        if let Payload::Multilevel(record) = payload {
            validate(record).map_err(StoreError::Invalid)?;
        }
        Ok(())
    }

    /// Appends an event and returns its sequence number once it is on disk.
    /// A key that is already stored returns the original number unchanged.
    pub fn append(&mut self, key: IdempotencyKey, payload: Payload, received_at: DateTime<Utc>) -> Result<Appended, StoreError> {
        Self::check(&key, &payload)?;
        if let Some(&seq) = self.index.keys.get(&key) {
            return Ok(Appended { sequence_number: seq, duplicate: true });
        }
        let event = AnnotationEvent { sequence_number: self.index.next_seq, idempotency_key: key, payload, received_at };
        self.write(event)
    }

    /// Appends an event carrying its own sequence number, as read from an
    /// export. Numbers must keep increasing.
    pub fn append_imported(&mut self, event: AnnotationEvent) -> Result<Appended, StoreError> {
        Self::check(&event.idempotency_key, &event.payload)?;
        if let Some(&seq) = self.index.keys.get(&event.idempotency_key) {
            return Ok(Appended { sequence_number: seq, duplicate: true });
        }
        let last = self.index.next_seq - 1;
        if event.sequence_number <= last {
            return Err(StoreError::SequenceOrder { last, got: event.sequence_number });
        }
        self.write(event)
    }

    fn write(&mut self, event: AnnotationEvent) -> Result<Appended, StoreError> {
        let path = self.log_path();
        let mut line = Vec::new();
        if self.torn_tail {
            line.push(b'\n');
        }
        serde_json::to_writer(&mut line, &event).expect("events serialize");
        line.push(b'\n');
        self.log.write_all(&line).map_err(io_err(&path))?;
        self.log.sync_data().map_err(io_err(&path))?;
        self.torn_tail = false;
        self.committed = self.log.metadata().map_err(io_err(&path))?.len();
        self.index.insert(&event);
        self.since_snapshot += 1;
        if self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok(Appended { sequence_number: event.sequence_number, duplicate: false })
    }

    /// Writes the index snapshot atomically (temp file, fsync, rename).
    pub fn snapshot(&mut self) -> Result<(), StoreError> {
        let mut keys: Vec<(IdempotencyKey, u64)> = self.index.keys.iter().map(|(k, &v)| (k.clone(), v)).collect();
        keys.sort_by_key(|(_, seq)| *seq);
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            log_offset: self.committed,
            next_seq: self.index.next_seq,
            keys,
            latest: self.index.latest.values().cloned().collect(),
        };
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let dest = self.dir.join(SNAPSHOT_FILE);
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        serde_json::to_writer(&mut f, &snap).expect("snapshot serializes");
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, &dest).map_err(io_err(&dest))?;
        self.since_snapshot = 0;
        Ok(())
    }

    /// Matching events in sequence order.
    pub fn load(&self, filter: &EventFilter) -> Result<Vec<AnnotationEvent>, StoreError> {
        if filter.latest_only {
            let mut out: Vec<AnnotationEvent> = self.index.latest.values().filter(|e| filter.matches(e)).cloned().collect();
            out.sort_by_key(|e| e.sequence_number);
            return Ok(out);
        }
        Ok(self.reader().events()?.into_iter().filter(|e| filter.matches(e)).collect())
    }

    /// Highest-revision event per (annotator, comment), in sequence order.
    pub fn latest(&self) -> Vec<AnnotationEvent> {
        self.load(&EventFilter { latest_only: true, ..Default::default() }).expect("in-memory projection")
    }
}
