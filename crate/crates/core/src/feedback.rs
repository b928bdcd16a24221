//! Anonymous feedback store.
//!
//! Every transcription is appended as an `event` record; a user flag on an
//! output is appended as a `flag` record. The file is UTF-8 JSON lines and is
//! never rewritten. Unflagged events form the silver-label export.
//!
//! Records carry only the fields below. Deserialization rejects anything else,
//! so a record with, say, a client address cannot be constructed from input:
//!
//! ```text
//! {"kind":"event","event_id":…,"created_at":…,"audio_sha256":…,"dialect_used":…,
//!  "source":…,"did_top5":[{"label":…,"probability":…}]|null,
//!  "transcripts":[{"model_name":…,"raw_text":…}]}
//! {"kind":"flag","event_id":…,"flagged_at":…,"model_name":…|null}
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use crate::did::LabelProbability;
use crate::dialect::DialectUsed;
use crate::routing::RoutingSource;

pub const RECORD_FIELDS: &[&str] = &["kind"];
pub const EVENT_FIELDS: &[&str] = &[
    "event_id",
    "created_at",
    "audio_sha256",
    "dialect_used",
    "source",
    "did_top5",
    "transcripts",
];
pub const FLAG_FIELDS: &[&str] = &["event_id", "flagged_at", "model_name"];
pub const TRANSCRIPT_FIELDS: &[&str] = &["model_name", "raw_text"];
pub const TOP5_FIELDS: &[&str] = &["label", "probability"];

/// Lowercase hex SHA-256 of an uploaded payload, as stored in events.
pub fn content_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("event {0} already stored")]
    DuplicateEventId(Uuid),
    #[error("unknown event {0}")]
    UnknownEvent(Uuid),
    #[error("event {event_id} has no output from model {model_name:?}")]
    UnknownModel { event_id: Uuid, model_name: String },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),
}

impl From<std::io::Error> for FeedbackError {
    fn from(e: std::io::Error) -> Self {
        FeedbackError::StorageFailure(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTranscript {
    pub model_name: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptionEvent {
    pub event_id: Uuid,
    pub created_at: DateTime<Utc>,
    pub audio_sha256: String,
    pub dialect_used: DialectUsed,
    pub source: RoutingSource,
    pub did_top5: Option<Vec<LabelProbability>>,
    /// Successful outputs in registry order.
    pub transcripts: Vec<ModelTranscript>,
}

impl TranscriptionEvent {
    /// A new event with a random id, stamped now.
    pub fn new(
        audio_sha256: String,
        dialect_used: DialectUsed,
        source: RoutingSource,
        did_top5: Option<Vec<LabelProbability>>,
        transcripts: Vec<ModelTranscript>,
    ) -> Result<Self, FeedbackError> {
        let event = Self {
            event_id: Uuid::new_v4(),
            created_at: Utc::now(),
            audio_sha256,
            dialect_used,
            source,
            did_top5,
            transcripts,
        };
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        let digest_ok = self.audio_sha256.len() == 64
            && self
                .audio_sha256
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !digest_ok {
            return Err(FeedbackError::InvalidEvent(
                "audio_sha256 must be 64 lowercase hex digits".into(),
            ));
        }
        if self.did_top5.as_ref().is_some_and(|t| t.len() > 5) {
            return Err(FeedbackError::InvalidEvent("did_top5 holds more than 5 entries".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.transcripts.iter().find(|t| !seen.insert(&t.model_name)) {
            return Err(FeedbackError::InvalidEvent(format!(
                "model {:?} listed twice",
                dup.model_name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagRecord {
    pub event_id: Uuid,
    pub flagged_at: DateTime<Utc>,
    /// `None` flags the whole event.
    pub model_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum StoreRecord {
    Event(TranscriptionEvent),
    Flag(FlagRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagAck {
    Recorded,
    AlreadyFlagged,
}

/// One exported silver label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilverExample {
    pub audio_sha256: String,
    pub dialect_used: DialectUsed,
    pub model_name: String,
    pub transcript: String,
}

#[derive(Debug, Default)]
struct State {
    events: Vec<TranscriptionEvent>,
    index: HashMap<Uuid, usize>,
    flags: HashSet<(Uuid, Option<String>)>,
}

impl State {
    fn apply(&mut self, record: StoreRecord) -> Result<(), FeedbackError> {
        match record {
            StoreRecord::Event(e) => {
                if self.index.contains_key(&e.event_id) {
                    return Err(FeedbackError::DuplicateEventId(e.event_id));
                }
                self.index.insert(e.event_id, self.events.len());
                self.events.push(e);
            }
            StoreRecord::Flag(f) => {
                if !self.index.contains_key(&f.event_id) {
                    return Err(FeedbackError::UnknownEvent(f.event_id));
                }
                self.flags.insert((f.event_id, f.model_name));
            }
        }
        Ok(())
    }
}

struct Inner {
    file: File,
    state: State,
}

/// Append-only JSON-lines store. Writes are serialized internally; readers
/// see every record appended before their call.
pub struct FeedbackStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl FeedbackStore {
    /// Opens or creates the store at `path`, replaying existing records.
    ///
    /// An unterminated last line (an interrupted append) is cut off; any
    /// other unreadable line is a [`FeedbackError::StorageFailure`].
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FeedbackError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .create(true)
            .append(true)
            .open(&path)?;

        let mut state = State::default();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&mut file);
        let mut line = String::new();
        let mut line_no = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let terminated = line.ends_with('\n');
            let parsed = serde_json::from_str::<StoreRecord>(line.trim_end());
            match parsed {
                Ok(record) => state.apply(record).map_err(|e| {
                    FeedbackError::StorageFailure(format!("{}:{line_no}: {e}", path.display()))
                })?,
                Err(_) if !terminated => {
                    tracing::warn!(path = %path.display(), line_no, "dropping partial trailing record");
                    break;
                }
                Err(e) => {
                    return Err(FeedbackError::StorageFailure(format!(
                        "{}:{line_no}: {e}",
                        path.display()
                    )))
                }
            }
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok(Self {
            path,
            inner: Mutex::new(Inner { file, state }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn append(file: &mut File, record: &StoreRecord) -> Result<(), FeedbackError> {
        let mut line = serde_json::to_string(record)
            .map_err(|e| FeedbackError::StorageFailure(e.to_string()))?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    pub fn record_event(&self, event: TranscriptionEvent) -> Result<Uuid, FeedbackError> {
        event.validate()?;
        let mut inner = self.lock();
        if inner.state.index.contains_key(&event.event_id) {
            return Err(FeedbackError::DuplicateEventId(event.event_id));
        }
        let id = event.event_id;
        let record = StoreRecord::Event(event);
        Self::append(&mut inner.file, &record)?;
        inner.state.apply(record)?;
        Ok(id)
    }

    /// Flags an event, or one model's output within it. Repeating a flag is
    /// acknowledged without writing anything.
    pub fn flag(&self, event_id: Uuid, model_name: Option<&str>) -> Result<FlagAck, FeedbackError> {
        let mut inner = self.lock();
        let Some(&i) = inner.state.index.get(&event_id) else {
            return Err(FeedbackError::UnknownEvent(event_id));
        };
        if let Some(m) = model_name {
            if !inner.state.events[i].transcripts.iter().any(|t| t.model_name == m) {
                return Err(FeedbackError::UnknownModel {
                    event_id,
                    model_name: m.to_string(),
                });
            }
        }
        let key = (event_id, model_name.map(str::to_string));
        if inner.state.flags.contains(&key) {
            return Ok(FlagAck::AlreadyFlagged);
        }
        let record = StoreRecord::Flag(FlagRecord {
            event_id,
            flagged_at: Utc::now(),
            model_name: key.1,
        });
        Self::append(&mut inner.file, &record)?;
        inner.state.apply(record)?;
        Ok(FlagAck::Recorded)
    }

    pub fn get(&self, event_id: Uuid) -> Option<TranscriptionEvent> {
        let inner = self.lock();
        inner.state.index.get(&event_id).map(|&i| inner.state.events[i].clone())
    }

    pub fn len(&self) -> usize {
        self.lock().state.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_flagged(&self, event_id: Uuid, model_name: Option<&str>) -> bool {
        self.lock()
            .state
            .flags
            .contains(&(event_id, model_name.map(str::to_string)))
    }

    /// Unflagged events with the output of their first model. An event is
    /// skipped when flagged as a whole or when that first output is flagged.
    pub fn export_silver(&self) -> Vec<SilverExample> {
        let inner = self.lock();
        let st = &inner.state;
        st.events
            .iter()
            .filter(|e| !st.flags.contains(&(e.event_id, None)))
            .filter_map(|e| {
                let best = e.transcripts.first()?;
                if st.flags.contains(&(e.event_id, Some(best.model_name.clone()))) {
                    return None;
                }
                Some(SilverExample {
                    audio_sha256: e.audio_sha256.clone(),
                    dialect_used: e.dialect_used,
                    model_name: best.model_name.clone(),
                    transcript: best.raw_text.clone(),
                })
            })
            .collect()
    }

    /// Fails when the store file can no longer be opened for appending.
    pub fn check_writable(&self) -> Result<(), FeedbackError> {
        OpenOptions::new().append(true).open(&self.path)?;
        Ok(())
    }
}

impl std::fmt::Debug for FeedbackStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeedbackStore").field("path", &self.path).finish()
    }
}

/// Content-addressed audio directory: `{dir}/{sha256}.{ext}`.
#[derive(Debug, Clone)]
pub struct AudioBlobStore {
    dir: PathBuf,
}

impl AudioBlobStore {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, FeedbackError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn put(&self, sha256: &str, extension: &str, bytes: &[u8]) -> Result<PathBuf, FeedbackError> {
        let path = self.dir.join(format!("{sha256}.{extension}"));
        if !path.exists() {
            let tmp = self.dir.join(format!(".{sha256}.{extension}.tmp"));
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialect::DialectLabel;

    const SHA: &str = "0000000000000000000000000000000000000000000000000000000000000000";

    fn event(models: &[(&str, &str)]) -> TranscriptionEvent {
        TranscriptionEvent::new(
            SHA.into(),
            DialectUsed::Dialect(DialectLabel::Msa),
            RoutingSource::Manual,
            None,
            models
                .iter()
                .map(|(m, t)| ModelTranscript {
                    model_name: m.to_string(),
                    raw_text: t.to_string(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn record_and_duplicate() {
        let dir = tempfile::tempdir().unwrap();
        let store = FeedbackStore::open(dir.path().join("s.jsonl")).unwrap();
        let e = event(&[("A", "نص")]);
        assert_eq!(store.record_event(e.clone()).unwrap(), e.event_id);
        assert!(matches!(store.record_event(e.clone()), Err(FeedbackError::DuplicateEventId(_))));
        assert_eq!(store.get(e.event_id), Some(e));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn flags_and_export() {
        let dir = tempfile::tempdir().unwrap();
        let store = FeedbackStore::open(dir.path().join("s.jsonl")).unwrap();
        assert!(store.export_silver().is_empty());

        let a = event(&[("A", "اول")]);
        let b = event(&[("A", "ثاني")]);
        let c = event(&[("A", "ثالث"), ("B", "رابع")]);
        for e in [&a, &b, &c] {
            store.record_event(e.clone()).unwrap();
        }
        assert_eq!(store.flag(b.event_id, None).unwrap(), FlagAck::Recorded);
        assert_eq!(store.flag(b.event_id, None).unwrap(), FlagAck::AlreadyFlagged);
        assert_eq!(store.flag(c.event_id, Some("B")).unwrap(), FlagAck::Recorded);

        let export = store.export_silver();
        let texts: Vec<_> = export.iter().map(|s| s.transcript.as_str()).collect();
        assert_eq!(texts, ["اول", "ثالث"]);
        assert_eq!(export[1].model_name, "A");

        store.flag(c.event_id, Some("A")).unwrap();
        assert_eq!(store.export_silver().len(), 1);

        assert!(matches!(store.flag(Uuid::new_v4(), None), Err(FeedbackError::UnknownEvent(_))));
        assert!(matches!(
            store.flag(a.event_id, Some("Z")),
            Err(FeedbackError::UnknownModel { .. })
        ));

        // one line per event plus one per distinct flag
        let text = std::fs::read_to_string(store.path()).unwrap();
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn reopen_reproduces_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/s.jsonl");
        let before;
        {
            let store = FeedbackStore::open(&path).unwrap();
            for i in 0..5 {
                let e = event(&[("A", &format!("نص {i}"))]);
                let id = store.record_event(e).unwrap();
                if i % 2 == 0 {
                    store.flag(id, None).unwrap();
                }
            }
            before = store.export_silver();
        }
        let store = FeedbackStore::open(&path).unwrap();
        assert_eq!(store.export_silver(), before);
        assert_eq!(store.len(), 5);
    }

    #[test]
    fn partial_trailing_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        {
            let store = FeedbackStore::open(&path).unwrap();
            store.record_event(event(&[("A", "x")])).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"kind\":\"eve").unwrap();
        drop(f);
        let store = FeedbackStore::open(&path).unwrap();
        assert_eq!(store.len(), 1);
        store.record_event(event(&[("A", "y")])).unwrap();
        let store = FeedbackStore::open(&path).unwrap();
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn corrupt_middle_line_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(FeedbackStore::open(&path), Err(FeedbackError::StorageFailure(_))));
    }

    #[test]
    fn extra_fields_rejected() {
        let e = event(&[("A", "x")]);
        let mut v = serde_json::to_value(StoreRecord::Event(e)).unwrap();
        v["client_ip"] = "203.0.113.7".into();
        assert!(serde_json::from_value::<StoreRecord>(v).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let line = format!(
            "{{\"kind\":\"event\",\"event_id\":\"{}\",\"created_at\":\"2024-01-01T00:00:00Z\",\"audio_sha256\":\"{SHA}\",\"dialect_used\":\"EGY\",\"source\":\"MANUAL\",\"did_top5\":null,\"transcripts\":[],\"user_agent\":\"x\"}}\n",
            Uuid::new_v4()
        );
        std::fs::write(&path, line).unwrap();
        assert!(FeedbackStore::open(&path).is_err());
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            content_digest(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn invalid_digest_rejected() {
        let err = TranscriptionEvent::new(
            "abc".into(),
            DialectUsed::Other,
            RoutingSource::Fallback,
            None,
            vec![],
        );
        assert!(matches!(err, Err(FeedbackError::InvalidEvent(_))));
    }

    #[test]
    fn serialized_fields_match_schema() {
        let e = event(&[("A", "x")]);
        let v = serde_json::to_value(StoreRecord::Event(e)).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        let mut want: Vec<_> = RECORD_FIELDS.iter().chain(EVENT_FIELDS).map(|s| s.to_string()).collect();
        want.sort();
        assert_eq!(keys, want);
    }

    #[test]
    fn blob_store_is_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let blobs = AudioBlobStore::new(dir.path().join("blobs")).unwrap();
        let p = blobs.put(SHA, "wav", b"RIFF").unwrap();
        assert_eq!(p.file_name().unwrap().to_str().unwrap(), format!("{SHA}.wav"));
        assert_eq!(blobs.put(SHA, "wav", b"other").unwrap(), p);
        assert_eq!(std::fs::read(&p).unwrap(), b"RIFF");
    }

    #[test]
    fn unwritable_after_directory_removed() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("gone");
        let store = FeedbackStore::open(sub.join("s.jsonl")).unwrap();
        assert!(store.check_writable().is_ok());
        std::fs::remove_dir_all(&sub).unwrap();
        assert!(store.check_writable().is_err());
    }
}
