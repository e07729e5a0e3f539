//! Durable quiz state: session snapshots, the attempt log and the manifest
//! registry.
//!
//! Layout under the store root:
//! - `sessions/<id>.json`: one snapshot per session, replaced atomically
//! - `attempts.jsonl`: every attempt, appended and fsynced before it is acknowledged
//! - `manifests/<manifest_id>.json` and `registry.json`
//!
//! On open, attempts found in the log but missing from a snapshot are
//! replayed, so a crash between the log append and the snapshot write loses
//! nothing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::hash::{BuildHasher, Hasher};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use lipread_core::lexicon::{GradingConfig, PronDict, VisemeMap, VocabEntry};
use lipread_core::quiz::{self, AttemptRecord, QuizError, QuizLexicon, QuizSession, SessionRequest};
use lipread_core::synth::{DatasetManifest, EntryStatus, SynthError};
use lipread_core::{DatasetTag, Protocol};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::{open_append, read_json, sync_dir, write_json_atomic};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("store is corrupt at {path}: {message}")]
    Corruption { path: PathBuf, message: String },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("no manifest registered for {0}")]
    UnknownManifest(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(#[from] SynthError),
    #[error(transparent)]
    Quiz(#[from] QuizError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Which earlier sessions a new session must not repeat labels from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScope {
    /// All of the user's sessions in the same protocol.
    #[default]
    Protocol,
    /// Only the user's sessions in the same protocol and dataset.
    ProtocolDataset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
    pub manifest_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Registry {
    bindings: Vec<Binding>,
}

/// Vocabulary and pronunciation data used to build quiz items.
pub struct Lexicon {
    pub vocab: Vec<VocabEntry>,
    pub dict: PronDict,
    pub map: VisemeMap,
}

impl Lexicon {
    pub fn demo() -> Self {
        Self { vocab: crate::lexfiles::demo_vocab_all(), dict: crate::lexfiles::demo_dict(), map: VisemeMap::default_table() }
    }
}

pub struct StoreConfig {
    pub root: PathBuf,
    /// Fixed base seed for session ids and item sampling; random when `None`.
    pub seed: Option<u64>,
    pub label_scope: LabelScope,
    pub grading: GradingConfig,
    pub lexicon: Lexicon,
}

impl StoreConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            seed: None,
            label_scope: LabelScope::default(),
            grading: GradingConfig::default(),
            lexicon: Lexicon::demo(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSession {
    pub user_id: String,
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
    #[serde(default)]
    pub manifest_id: Option<String>,
}

/// Counts of what `open` found and repaired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Recovery {
    pub sessions: usize,
    pub log_records: usize,
    pub replayed: usize,
    pub torn_tail_bytes: usize,
}

type SessionCell = Arc<Mutex<QuizSession>>;

pub struct Store {
    root: PathBuf,
    base_seed: u64,
    label_scope: LabelScope,
    grading: GradingConfig,
    lexicon: Lexicon,
    sessions: RwLock<BTreeMap<String, SessionCell>>,
    manifests: RwLock<Manifests>,
    /// Single writer for the attempt log.
    log: Mutex<File>,
    /// Serializes session creation so concurrent requests cannot both claim the same fresh labels.
    creating: Mutex<()>,
}

#[derive(Default)]
struct Manifests {
    by_id: BTreeMap<String, Arc<DatasetManifest>>,
    registry: Registry,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_u64() -> u64 {
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u128(std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0));
    h.finish()
}

impl Store {
    pub fn open(cfg: StoreConfig) -> Result<(Self, Recovery), StoreError> {
        let root = cfg.root;
        for dir in [root.join("sessions"), root.join("manifests")] {
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let manifests = load_manifests(&root)?;
        let mut sessions = load_sessions(&root.join("sessions"))?;

        let log_path = root.join("attempts.jsonl");
        let (records, torn) = read_log(&log_path)?;
        let mut recovery = Recovery { sessions: sessions.len(), log_records: records.len(), torn_tail_bytes: torn, ..Recovery::default() };
        let mut touched = BTreeSet::new();
        for (line, r) in records.into_iter().enumerate() {
            let corrupt =
                |message: String| StoreError::Corruption { path: log_path.clone(), message: format!("line {}: {message}", line + 1) };
            let s = sessions.get_mut(&r.session_id).ok_or_else(|| corrupt(format!("unknown session {}", r.session_id)))?;
            if r.position < s.cursor {
                if s.attempts.get(r.position) != Some(&r) {
                    return Err(corrupt(format!("attempt disagrees with snapshot of {}", r.session_id)));
                }
                continue;
            }
            if r.position > s.cursor {
                return Err(corrupt(format!("gap in attempts of {}", r.session_id)));
            }
            s.apply(r).map_err(|e| corrupt(e.to_string()))?;
            touched.insert(s.session_id.clone());
            recovery.replayed += 1;
        }
        for id in &touched {
            let path = snapshot_path(&root, id);
            write_json_atomic(&path, &sessions[id]).map_err(io_err(&path))?;
        }

        let log = open_append(&log_path).map_err(io_err(&log_path))?;
        let store = Store {
            base_seed: cfg.seed.unwrap_or_else(random_u64),
            label_scope: cfg.label_scope,
            grading: cfg.grading,
            lexicon: cfg.lexicon,
            sessions: RwLock::new(sessions.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect()),
            manifests: RwLock::new(manifests),
            log: Mutex::new(log),
            creating: Mutex::new(()),
            root,
        };
        Ok((store, recovery))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stores a manifest and makes it the default for its protocol and dataset.
    pub fn register_manifest(&self, dataset_tag: DatasetTag, manifest: DatasetManifest) -> Result<Binding, StoreError> {
        manifest.validate()?;
        let mut m = self.manifests.write().expect("manifest lock");
        let path = self.root.join("manifests").join(format!("{}.json", manifest.manifest_id));
        write_json_atomic(&path, &manifest).map_err(io_err(&path))?;
        let binding = Binding { protocol: manifest.protocol, dataset_tag, manifest_id: manifest.manifest_id.clone() };
        let mut registry = m.registry.clone();
        registry.bindings.retain(|b| (b.protocol, b.dataset_tag) != (binding.protocol, binding.dataset_tag));
        registry.bindings.push(binding.clone());
        let reg_path = self.root.join("registry.json");
        write_json_atomic(&reg_path, &registry).map_err(io_err(&reg_path))?;
        m.registry = registry;
        m.by_id.insert(manifest.manifest_id.clone(), Arc::new(manifest));
        Ok(binding)
    }

    pub fn manifest(&self, manifest_id: &str) -> Option<Arc<DatasetManifest>> {
        self.manifests.read().expect("manifest lock").by_id.get(manifest_id).cloned()
    }

    pub fn bindings(&self) -> Vec<Binding> {
        self.manifests.read().expect("manifest lock").registry.bindings.clone()
    }

    /// Path of the finished video whose checksum is `checksum`.
    pub fn video_path(&self, checksum: &str) -> Option<PathBuf> {
        let m = self.manifests.read().expect("manifest lock");
        m.by_id
            .values()
            .flat_map(|man| &man.entries)
            .find(|e| e.status == EntryStatus::Done && e.checksum.as_deref() == Some(checksum))
            .and_then(|e| e.generated_video_path.as_ref())
            .map(PathBuf::from)
    }

    fn resolve_manifest(&self, req: &NewSession) -> Result<Arc<DatasetManifest>, StoreError> {
        let m = self.manifests.read().expect("manifest lock");
        let id = match &req.manifest_id {
            Some(id) => id.clone(),
            None => m
                .registry
                .bindings
                .iter()
                .find(|b| b.protocol == req.protocol && b.dataset_tag == req.dataset_tag)
                .map(|b| b.manifest_id.clone())
                .ok_or_else(|| StoreError::UnknownManifest(format!("{} / {}", req.protocol, req.dataset_tag)))?,
        };
        m.by_id.get(&id).cloned().ok_or(StoreError::UnknownManifest(id))
    }

    pub fn create_session(&self, req: NewSession, now_ms: u64) -> Result<QuizSession, StoreError> {
        let manifest = self.resolve_manifest(&req)?;
        let _guard = self.creating.lock().expect("creation lock");
        let existing: Vec<QuizSession> =
            self.sessions.read().expect("session lock").values().map(|c| c.lock().expect("session").clone()).collect();
        let dataset = match self.label_scope {
            LabelScope::Protocol => None,
            LabelScope::ProtocolDataset => Some(req.dataset_tag),
        };
        let used = quiz::used_labels(&existing, &req.user_id, req.protocol, dataset);

        let mut n = existing.len() as u64;
        let (session_id, seed) = loop {
            let seed = splitmix(self.base_seed ^ splitmix(n));
            let id = format!("{seed:016x}");
            if !existing.iter().any(|s| s.session_id == id) {
                break (id, seed);
            }
            n += 1;
        };
        let session = quiz::create_session(SessionRequest {
            session_id,
            user_id: req.user_id,
            protocol: req.protocol,
            dataset_tag: req.dataset_tag,
            manifest: &manifest,
            lexicon: QuizLexicon { vocab: &self.lexicon.vocab, dict: &self.lexicon.dict, map: &self.lexicon.map },
            used_labels: &used,
            seed,
            now_ms,
        })?;
        let path = snapshot_path(&self.root, &session.session_id);
        write_json_atomic(&path, &session).map_err(io_err(&path))?;
        self.sessions.write().expect("session lock").insert(session.session_id.clone(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn cell(&self, session_id: &str) -> Result<SessionCell, StoreError> {
        self.sessions.read().expect("session lock").get(session_id).cloned().ok_or_else(|| StoreError::UnknownSession(session_id.into()))
    }

    /// A copy of the session's current state.
    pub fn session(&self, session_id: &str) -> Result<QuizSession, StoreError> {
        Ok(self.cell(session_id)?.lock().expect("session").clone())
    }

    pub fn sessions(&self) -> Vec<QuizSession> {
        self.sessions.read().expect("session lock").values().map(|c| c.lock().expect("session").clone()).collect()
    }

    /// Grades the answer, makes the record durable, then applies it.
    pub fn submit_answer(&self, session_id: &str, item_id: &str, answer: &str, now_ms: u64) -> Result<AttemptRecord, StoreError> {
        let cell = self.cell(session_id)?;
        let mut session = cell.lock().expect("session");
        let record = session.grade(item_id, answer, &self.grading, now_ms)?;
        self.append(&record)?;
        session.apply(record.clone())?;
        let path = snapshot_path(&self.root, session_id);
        // The log already holds the attempt; a failed snapshot is repaired on the next open.
        if let Err(e) = write_json_atomic(&path, &*session) {
            eprintln!("warning: snapshot of {session_id} not written: {e}");
        }
        Ok(record)
    }

    fn append(&self, record: &AttemptRecord) -> Result<(), StoreError> {
        let path = self.root.join("attempts.jsonl");
        let mut line = serde_json::to_vec(record).map_err(|e| StoreError::Io { path: path.clone(), source: e.into() })?;
        line.push(b'\n');
        let mut log = self.log.lock().expect("log lock");
        log.write_all(&line).map_err(io_err(&path))?;
        log.sync_data().map_err(io_err(&path))
    }

    /// Every attempt in the log, in append order.
    pub fn attempt_log(&self) -> Result<Vec<AttemptRecord>, StoreError> {
        let _log = self.log.lock().expect("log lock");
        Ok(read_log(&self.root.join("attempts.jsonl"))?.0)
    }

    pub fn flush(&self) -> Result<(), StoreError> {
        let path = self.root.join("attempts.jsonl");
        self.log.lock().expect("log lock").sync_all().map_err(io_err(&path))
    }
}

fn snapshot_path(root: &Path, session_id: &str) -> PathBuf {
    root.join("sessions").join(format!("{session_id}.json"))
}

fn load_manifests(root: &Path) -> Result<Manifests, StoreError> {
    let reg_path = root.join("registry.json");
    let registry: Registry = if reg_path.exists() {
        read_json(&reg_path).map_err(|e| StoreError::Corruption { path: reg_path.clone(), message: e.to_string() })?
    } else {
        Registry::default()
    };
    let mut by_id = BTreeMap::new();
    let dir = root.join("manifests");
    for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
        let path = entry.map_err(io_err(&dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let m: DatasetManifest = read_json(&path).map_err(|e| StoreError::Corruption { path: path.clone(), message: e.to_string() })?;
            by_id.insert(m.manifest_id.clone(), Arc::new(m));
        }
    }
    for b in &registry.bindings {
        if !by_id.contains_key(&b.manifest_id) {
            return Err(StoreError::Corruption { path: reg_path, message: format!("missing manifest {}", b.manifest_id) });
        }
    }
    Ok(Manifests { by_id, registry })
}

fn load_sessions(dir: &Path) -> Result<HashMap<String, QuizSession>, StoreError> {
    let mut out = HashMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name.starts_with('.') {
            // Leftover temp file from an interrupted atomic write.
            let _ = std::fs::remove_file(&path);
            continue;
        }
        if path.extension().is_some_and(|e| e == "json") {
            let s: QuizSession = read_json(&path).map_err(|e| StoreError::Corruption { path: path.clone(), message: e.to_string() })?;
            out.insert(s.session_id.clone(), s);
        }
    }
    Ok(out)
}

/// Reads the attempt log. A final line without its newline is a write cut
/// short by a crash and is truncated away; any other bad line is corruption.
fn read_log(path: &Path) -> Result<(Vec<AttemptRecord>, usize), StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if buf.last() != Some(&b'\n') {
            let torn = n;
            let f = std::fs::OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
            f.set_len(good_len).map_err(io_err(path))?;
            f.sync_all().map_err(io_err(path))?;
            return Ok((records, torn));
        }
        good_len += n as u64;
        if buf.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let r: AttemptRecord = serde_json::from_slice(&buf)
            .map_err(|e| StoreError::Corruption { path: path.to_path_buf(), message: format!("line {line_no}: {e}") })?;
        records.push(r);
    }
    if let Some(dir) = path.parent() {
        sync_dir(dir).map_err(io_err(dir))?;
    }
    Ok((records, 0))
}
