//! Executes a dataset manifest: TTS, alignment, lip-sync and muting for
//! every pending entry, on a bounded worker pool with one manifest writer.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use lipread_core::alignment::{
    build_alignment_plan, detect_mouth_activity, mouth_motion_signal, render_padded_audio, ActivityConfig, MouthActivitySegment,
};
use lipread_core::landmark::{validate_video, GateConfig, ValidityReport};
use lipread_core::synth::{
    AdapterKind, AdapterSpec, DatasetManifest, EntryError, GenerationJob, ManifestEntry, NextStep, RetryPolicy, Stage, SynthError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{health_check, run_lipsync, run_tts, AdapterError, LipSyncRequest, TtsRequest};
use crate::audio::{self, SAMPLE_RATE};
use crate::fsutil::{now_ms, sha256_file, write_json_atomic};
use crate::media::{MediaTool, MockMediaTool};
use crate::track::read_track_file;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{kind:?} adapter is misconfigured: {source}")]
    InvalidAdapter { kind: AdapterKind, source: SynthError },
    #[error("{kind:?} adapter failed its health probe: {source}")]
    AdapterUnreachable { kind: AdapterKind, source: AdapterError },
    #[error("cannot persist manifest: {0}")]
    Persist(std::io::Error),
    #[error("cannot prepare output directory {path}: {source}")]
    OutputDir { path: PathBuf, source: std::io::Error },
}

/// A directory of driving videos: `<id>.jsonl` landmark tracks next to a
/// video file `<id>.<ext>` with the same stem.
#[derive(Debug, Clone)]
pub struct DriverSet {
    pub dir: PathBuf,
}

impl DriverSet {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn track_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn video_path(&self, id: &str) -> Option<PathBuf> {
        let mut candidates: Vec<PathBuf> = std::fs::read_dir(&self.dir)
            .ok()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_stem().is_some_and(|s| s == id) && p.extension().is_some_and(|e| e != "jsonl"))
            .collect();
        candidates.sort();
        candidates.into_iter().next()
    }

    /// Ids of every track in the directory, sorted.
    pub fn ids(&self) -> std::io::Result<Vec<String>> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Splits the tracks into those passing the validity gates (with a
    /// video file present) and the rejected ones with their reports.
    pub fn screen(&self, gates: &GateConfig) -> std::io::Result<Screening> {
        let mut s = Screening::default();
        for id in self.ids()? {
            let report = match read_track_file(&self.track_path(&id)) {
                Ok(track) => validate_video(&track, gates).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            match report {
                Ok(r) if r.valid && self.video_path(&id).is_some() => s.valid.push(id),
                Ok(r) if r.valid => s.rejected.push(Rejection { video_id: id, report: Some(r), error: Some("no video file".into()) }),
                Ok(r) => s.rejected.push(Rejection { video_id: id, report: Some(r), error: None }),
                Err(e) => s.rejected.push(Rejection { video_id: id, report: None, error: Some(e) }),
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct Screening {
    pub valid: Vec<String>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rejection {
    pub video_id: String,
    pub report: Option<ValidityReport>,
    pub error: Option<String>,
}

/// Adapter settings as read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub tts: AdapterSpec,
    pub lipsync: AdapterSpec,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// "mock" or "ffmpeg".
    #[serde(default = "default_media")]
    pub media_tool: String,
}

fn default_media() -> String {
    "mock".into()
}

impl AdapterConfig {
    pub fn mock() -> Self {
        Self {
            tts: AdapterSpec::mock(AdapterKind::Tts),
            lipsync: AdapterSpec::mock(AdapterKind::LipSync),
            retry: RetryPolicy::default(),
            media_tool: default_media(),
        }
    }
}

pub struct RunConfig {
    pub tts: AdapterSpec,
    pub lipsync: AdapterSpec,
    pub retry: RetryPolicy,
    pub workers: usize,
    pub drivers: DriverSet,
    /// Finished, muted videos go to `<out_dir>/<manifest_id>/`.
    pub out_dir: PathBuf,
    pub activity: ActivityConfig,
    pub media: Arc<dyn MediaTool>,
}

impl RunConfig {
    pub fn mock(drivers: DriverSet, out_dir: PathBuf) -> Self {
        Self {
            tts: AdapterSpec::mock(AdapterKind::Tts),
            lipsync: AdapterSpec::mock(AdapterKind::LipSync),
            retry: RetryPolicy::default(),
            workers: 1,
            drivers,
            out_dir,
            activity: ActivityConfig::default(),
            media: Arc::new(MockMediaTool),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    /// Entries attempted in this run.
    pub executed: usize,
    pub done: usize,
    pub failed: usize,
    /// Entries already done before the run.
    pub skipped: usize,
}

enum Outcome {
    Done { path: PathBuf, checksum: String, attempts: u32 },
    Failed { error: EntryError, attempts: u32 },
}

/// Alignment input shared by every entry using the same driving video.
struct Driver {
    segment: MouthActivitySegment,
    duration_s: f64,
    video: PathBuf,
}

fn load_driver(drivers: &DriverSet, id: &str, activity: &ActivityConfig) -> Result<Driver, String> {
    let track = read_track_file(&drivers.track_path(id)).map_err(|e| format!("track {id}: {e}"))?;
    let signal = mouth_motion_signal(&track).map_err(|e| format!("track {id}: {e}"))?;
    let segment = detect_mouth_activity(&signal, track.fps, activity).map_err(|e| format!("track {id}: {e}"))?;
    let video = drivers.video_path(id).ok_or_else(|| format!("no video file for driving video {id}"))?;
    Ok(Driver { segment, duration_s: track.duration_s, video })
}

fn file_key(entry: &ManifestEntry) -> String {
    let safe: String = entry.label_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("{safe}-v{:02}", entry.variation_id)
}

struct StageError {
    error: EntryError,
    retryable: bool,
}

impl StageError {
    fn adapter(stage: Stage, e: AdapterError) -> Self {
        Self { error: EntryError { code: e.code().into(), stage: Some(stage), message: e.to_string() }, retryable: true }
    }

    fn fatal(stage: Stage, code: &str, message: String) -> Self {
        Self { error: EntryError { code: code.into(), stage: Some(stage), message }, retryable: false }
    }
}

struct Worker<'a> {
    cfg: &'a RunConfig,
    drivers: &'a HashMap<String, Result<Driver, String>>,
    final_dir: PathBuf,
}

impl Worker<'_> {
    fn run_stage(
        &self,
        stage: Stage,
        entry: &ManifestEntry,
        work: &Path,
        synced: &mut Option<PathBuf>,
    ) -> Result<Option<(PathBuf, String)>, StageError> {
        let speech = work.join("speech.wav");
        let padded = work.join("padded.wav");
        let driver = || match self.drivers.get(&entry.driving_video_id) {
            Some(Ok(d)) => Ok(d),
            Some(Err(e)) => Err(StageError::fatal(stage, "driving_video_unusable", e.clone())),
            None => Err(StageError::fatal(stage, "driving_video_unusable", format!("unknown driving video {}", entry.driving_video_id))),
        };
        match stage {
            Stage::Tts => {
                run_tts(&self.cfg.tts, &TtsRequest { label_id: &entry.label_id, text: &entry.text, out: &speech })
                    .map_err(|e| StageError::adapter(stage, e))?;
            }
            Stage::Align => {
                let d = driver()?;
                let samples = audio::read_speech(&speech).map_err(|e| StageError::fatal(stage, "bad_audio", e.to_string()))?;
                let plan =
                    build_alignment_plan(&entry.driving_video_id, &d.segment, samples.len() as f64 / SAMPLE_RATE as f64, d.duration_s)
                        .map_err(|e| StageError::fatal(stage, "alignment_failed", e.to_string()))?;
                let out = render_padded_audio(&plan, &samples, SAMPLE_RATE)
                    .map_err(|e| StageError::fatal(stage, "alignment_failed", e.to_string()))?;
                audio::write_wav(&padded, &out, SAMPLE_RATE).map_err(|e| StageError::fatal(stage, "io_error", e.to_string()))?;
                write_json_atomic(&work.join("plan.json"), &plan).map_err(|e| StageError::fatal(stage, "io_error", e.to_string()))?;
            }
            Stage::LipSync => {
                let d = driver()?;
                let ext = d.video.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "mp4".into());
                let out = work.join(format!("synced.{ext}"));
                let o = run_lipsync(
                    &self.cfg.lipsync,
                    &LipSyncRequest { label_id: &entry.label_id, video: &d.video, audio: &padded, out: &out },
                )
                .map_err(|e| StageError::adapter(stage, e))?;
                *synced = Some(o.path);
            }
            Stage::Mute => {
                let src = synced.clone().ok_or_else(|| StageError::fatal(stage, "internal", "lip-sync output missing".into()))?;
                let ext = src.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "mp4".into());
                let dest = self.final_dir.join(format!("{}.{ext}", file_key(entry)));
                self.cfg.media.strip_audio(&src, &dest).map_err(|e| StageError {
                    error: EntryError { code: "media_tool_failure".into(), stage: Some(stage), message: e.to_string() },
                    retryable: true,
                })?;
                let sum = sha256_file(&dest).map_err(|e| StageError::fatal(stage, "io_error", e.to_string()))?;
                return Ok(Some((dest, sum)));
            }
        }
        Ok(None)
    }

    fn execute(&self, manifest_id: &str, entry: &ManifestEntry) -> Outcome {
        let work = self.final_dir.join(".work").join(file_key(entry));
        if let Err(e) = std::fs::create_dir_all(&work) {
            return Outcome::Failed { error: EntryError { code: "io_error".into(), stage: None, message: e.to_string() }, attempts: 1 };
        }
        let mut job = GenerationJob::new(manifest_id, entry, self.cfg.retry);
        let mut synced = None;
        let mut last_error = None;
        while let Some(stage) = job.start() {
            match self.run_stage(stage, entry, &work, &mut synced) {
                Ok(Some((path, checksum))) => {
                    job.succeed();
                    let _ = std::fs::remove_dir_all(&work);
                    return Outcome::Done { path, checksum, attempts: job.attempts() };
                }
                Ok(None) => job.succeed(),
                Err(e) if !e.retryable => {
                    job.abort();
                    last_error = Some(e.error);
                }
                Err(e) => {
                    last_error = Some(e.error);
                    if let NextStep::RetryAfterMs(ms) = job.fail() {
                        std::thread::sleep(Duration::from_millis(ms));
                    }
                }
            }
        }
        let error = last_error.unwrap_or(EntryError { code: "internal".into(), stage: None, message: "job ended without output".into() });
        Outcome::Failed { error, attempts: job.attempts() }
    }
}

/// Runs every pending or failed entry and records the outcome of each.
///
/// Done entries are skipped. `persist` is called by the single writer after
/// each recorded outcome, so an interrupted run resumes where it stopped.
pub fn run_generation<F>(manifest: &mut DatasetManifest, cfg: &RunConfig, mut persist: F) -> Result<RunReport, RunError>
where
    F: FnMut(&DatasetManifest) -> std::io::Result<()>,
{
    for spec in [&cfg.tts, &cfg.lipsync] {
        spec.validate().map_err(|source| RunError::InvalidAdapter { kind: spec.kind, source })?;
        health_check(spec).map_err(|source| RunError::AdapterUnreachable { kind: spec.kind, source })?;
    }
    let final_dir = cfg.out_dir.join(&manifest.manifest_id);
    std::fs::create_dir_all(&final_dir).map_err(|source| RunError::OutputDir { path: final_dir.clone(), source })?;

    let skipped = manifest.counts().done;
    let queue = manifest.prepare_run();
    let mut report = RunReport { executed: queue.len(), skipped, ..RunReport::default() };
    if queue.is_empty() {
        return Ok(report);
    }

    let mut drivers = HashMap::new();
    for &i in &queue {
        let id = &manifest.entries[i].driving_video_id;
        if !drivers.contains_key(id) {
            drivers.insert(id.clone(), load_driver(&cfg.drivers, id, &cfg.activity));
        }
    }

    let worker = Worker { cfg, drivers: &drivers, final_dir };
    let jobs: Vec<(usize, ManifestEntry)> = queue.iter().map(|&i| (i, manifest.entries[i].clone())).collect();
    let next = AtomicUsize::new(0);
    let manifest_id = manifest.manifest_id.clone();
    let (tx, rx) = mpsc::channel::<(usize, Outcome)>();

    std::thread::scope(|scope| -> Result<(), RunError> {
        for _ in 0..cfg.workers.clamp(1, jobs.len()) {
            let tx = tx.clone();
            let (worker, jobs, next, manifest_id) = (&worker, &jobs, &next, &manifest_id);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((i, entry)) = jobs.get(k) else { break };
                if tx.send((*i, worker.execute(manifest_id, entry))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, outcome) in rx {
            let entry = &mut manifest.entries[i];
            let now = now_ms();
            let recorded = match outcome {
                Outcome::Done { path, checksum, attempts } => {
                    report.done += 1;
                    entry.mark_done(path.display().to_string(), checksum, attempts, now)
                }
                Outcome::Failed { error, attempts } => {
                    report.failed += 1;
                    entry.mark_failed(error, attempts, now)
                }
            };
            debug_assert!(recorded.is_ok(), "queued entries are pending");
            persist(manifest).map_err(RunError::Persist)?;
        }
        Ok(())
    })?;
    Ok(report)
}

/// Writes a 6 s, 25 fps talking-head driver: a landmark track whose mouth
/// moves in frames 40..110, plus a mock video file.
pub fn write_demo_driver(dir: &Path, id: &str) -> std::io::Result<()> {
    use crate::media::{MockContainer, MockStream, StreamKind};
    use lipread_core::landmark::synthetic::{track, FacePose};
    let poses: Vec<Option<FacePose>> = (0..150)
        .map(|i| {
            let open = if (40..110).contains(&i) && i % 2 == 1 { 20.0 } else { 0.0 };
            Some(FacePose { mouth_open: open, ..FacePose::default() })
        })
        .collect();
    let t = track(id, 25.0, &poses);
    crate::track::write_track(&t, std::fs::File::create(dir.join(format!("{id}.jsonl")))?)?;
    let stream = MockStream {
        kind: StreamKind::Video,
        codec: "mock".into(),
        duration_s: t.duration_s,
        sha256: crate::fsutil::sha256_hex(id.as_bytes()),
    };
    MockContainer::new(vec![stream]).write(&dir.join(format!("{id}.mock")))
}
