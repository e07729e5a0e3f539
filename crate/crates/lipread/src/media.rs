//! Container-level media operations: removing audio streams.
//!
//! [`MockMediaTool`] works on a small JSON stand-in container so the whole
//! pipeline runs without codecs; [`FfmpegTool`] shells out to `ffmpeg`.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::atomic_write;

pub const MOCK_FORMAT: &str = "lipread-mock-container";

#[derive(Debug, Error)]
#[error("media tool failed on {path}: {message}")]
pub struct MediaToolFailure {
    pub path: PathBuf,
    pub message: String,
}

impl MediaToolFailure {
    fn new(path: &Path, message: impl Into<String>) -> Self {
        Self { path: path.to_path_buf(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Video,
    Audio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockStream {
    pub kind: StreamKind,
    pub codec: String,
    pub duration_s: f64,
    /// Digest of the payload this stream stands for.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockContainer {
    pub format: String,
    pub streams: Vec<MockStream>,
}

impl MockContainer {
    pub fn new(streams: Vec<MockStream>) -> Self {
        Self { format: MOCK_FORMAT.to_string(), streams }
    }

    pub fn read(path: &Path) -> Result<Self, MediaToolFailure> {
        let bytes = std::fs::read(path).map_err(|e| MediaToolFailure::new(path, e.to_string()))?;
        let c: MockContainer = serde_json::from_slice(&bytes).map_err(|_| MediaToolFailure::new(path, "not a mock container"))?;
        if c.format != MOCK_FORMAT {
            return Err(MediaToolFailure::new(path, format!("unknown container format {:?}", c.format)));
        }
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }

    pub fn count(&self, kind: StreamKind) -> usize {
        self.streams.iter().filter(|s| s.kind == kind).count()
    }
}

pub trait MediaTool: Send + Sync {
    /// Writes `output` with every stream of `input` except audio, copied without re-encoding.
    fn strip_audio(&self, input: &Path, output: &Path) -> Result<(), MediaToolFailure>;

    fn audio_streams(&self, path: &Path) -> Result<usize, MediaToolFailure>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockMediaTool;

impl MediaTool for MockMediaTool {
    fn strip_audio(&self, input: &Path, output: &Path) -> Result<(), MediaToolFailure> {
        let mut c = MockContainer::read(input)?;
        c.streams.retain(|s| s.kind != StreamKind::Audio);
        c.write(output).map_err(|e| MediaToolFailure::new(output, e.to_string()))
    }

    fn audio_streams(&self, path: &Path) -> Result<usize, MediaToolFailure> {
        Ok(MockContainer::read(path)?.count(StreamKind::Audio))
    }
}

/// Uses `ffmpeg` for stream copying and `ffprobe` for inspection.
#[derive(Debug, Clone)]
pub struct FfmpegTool {
    pub ffmpeg: PathBuf,
    pub ffprobe: PathBuf,
}

impl Default for FfmpegTool {
    fn default() -> Self {
        Self { ffmpeg: "ffmpeg".into(), ffprobe: "ffprobe".into() }
    }
}

impl FfmpegTool {
    pub fn available(&self) -> bool {
        Command::new(&self.ffmpeg).arg("-version").output().is_ok_and(|o| o.status.success())
    }
}

impl MediaTool for FfmpegTool {
    fn strip_audio(&self, input: &Path, output: &Path) -> Result<(), MediaToolFailure> {
        if !input.is_file() {
            return Err(MediaToolFailure::new(input, "no such file"));
        }
        let out = Command::new(&self.ffmpeg)
            .args(["-v", "error", "-y", "-i"])
            .arg(input)
            .args(["-map", "0", "-map", "-0:a", "-c", "copy"])
            .arg(output)
            .output()
            .map_err(|e| MediaToolFailure::new(input, format!("cannot run {}: {e}", self.ffmpeg.display())))?;
        if !out.status.success() {
            return Err(MediaToolFailure::new(input, String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        Ok(())
    }

    fn audio_streams(&self, path: &Path) -> Result<usize, MediaToolFailure> {
        let out = Command::new(&self.ffprobe)
            .args(["-v", "error", "-select_streams", "a", "-show_entries", "stream=index", "-of", "csv=p=0"])
            .arg(path)
            .output()
            .map_err(|e| MediaToolFailure::new(path, format!("cannot run {}: {e}", self.ffprobe.display())))?;
        if !out.status.success() {
            return Err(MediaToolFailure::new(path, String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        Ok(String::from_utf8_lossy(&out.stdout).lines().filter(|l| !l.trim().is_empty()).count())
    }
}
