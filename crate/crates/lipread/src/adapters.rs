//! Invoking TTS and lip-sync generators through their adapter contracts.
//!
//! Subprocess: the command template is expanded into argv and run with a
//! timeout; exit status 0 means success and the `{out}` file must exist.
//! HTTP: the request is POSTed as JSON; a 200 response carries
//! `{"output_path": ..., "sha256": ...}` (`sha256` optional). The health
//! probe is `GET {endpoint}/health`.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use lipread_core::synth::{render_command, AdapterKind, AdapterSpec, Transport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioError, SAMPLE_RATE};
use crate::fsutil::sha256_file;
use crate::media::{MockContainer, MockStream, StreamKind};

/// Speech length of the mock TTS per input character, at speed 1.0.
pub const MOCK_SECONDS_PER_CHAR: f64 = 0.060;
const MOCK_TONE_HZ: f64 = 220.0;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter timed out after {after_s} s")]
    Timeout { after_s: f64 },
    #[error("adapter exited with {code:?}: {stderr}")]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("cannot start adapter: {0}")]
    Spawn(String),
    #[error("adapter answered HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("adapter unreachable: {0}")]
    Unreachable(String),
    #[error("adapter reported success but {0} does not exist")]
    NoOutput(PathBuf),
    #[error("output checksum {actual} does not match the adapter's {expected}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("mock adapter configured to fail for {0}")]
    MockFailure(String),
    #[error("adapter kind {got:?} used where {expected:?} is required")]
    WrongKind { expected: AdapterKind, got: AdapterKind },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AdapterError {
    /// Stable snake_case code recorded in manifests.
    pub fn code(&self) -> &'static str {
        match self {
            AdapterError::Timeout { .. } => "adapter_timeout",
            AdapterError::NonZeroExit { .. } => "adapter_non_zero_exit",
            AdapterError::Spawn(_) => "adapter_spawn_failed",
            AdapterError::HttpStatus { .. } => "adapter_http_status",
            AdapterError::Unreachable(_) => "adapter_unreachable",
            AdapterError::NoOutput(_) => "adapter_no_output",
            AdapterError::ChecksumMismatch { .. } => "checksum_mismatch",
            AdapterError::MockFailure(_) => "adapter_non_zero_exit",
            AdapterError::WrongKind { .. } => "adapter_misconfigured",
            AdapterError::Audio(_) => "bad_audio",
            AdapterError::Io(_) => "io_error",
        }
    }
}

pub struct TtsRequest<'a> {
    pub label_id: &'a str,
    pub text: &'a str,
    pub out: &'a Path,
}

pub struct LipSyncRequest<'a> {
    pub label_id: &'a str,
    pub video: &'a Path,
    pub audio: &'a Path,
    pub out: &'a Path,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipSyncOutput {
    pub path: PathBuf,
    /// Checksum claimed by the adapter, verified against the file.
    pub sha256: Option<String>,
}

#[derive(Serialize)]
struct TtsBody<'a> {
    text: &'a str,
    voice: &'a str,
    speed: f64,
    out: String,
}

#[derive(Serialize)]
struct LipSyncBody {
    video: String,
    audio: String,
    out: String,
}

#[derive(Deserialize)]
struct HttpReply {
    output_path: PathBuf,
    #[serde(default)]
    sha256: Option<String>,
}

fn agent(timeout_s: f64) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs_f64(timeout_s))).http_status_as_error(false).build().into()
}

/// Checks that the adapter can be reached before any job is scheduled.
pub fn health_check(spec: &AdapterSpec) -> Result<(), AdapterError> {
    match &spec.transport {
        Transport::Mock { .. } => Ok(()),
        Transport::Subprocess { command } => {
            let program = command.split_whitespace().next().unwrap_or_default();
            if find_program(program).is_some() {
                Ok(())
            } else {
                Err(AdapterError::Unreachable(format!("{program} not found")))
            }
        }
        Transport::Http { endpoint } => {
            let url = format!("{}/health", endpoint.trim_end_matches('/'));
            let resp = agent(spec.timeout_s.min(10.0)).get(&url).call().map_err(|e| AdapterError::Unreachable(format!("{url}: {e}")))?;
            if resp.status().as_u16() == 200 {
                Ok(())
            } else {
                Err(AdapterError::Unreachable(format!("{url}: HTTP {}", resp.status().as_u16())))
            }
        }
    }
}

fn find_program(program: &str) -> Option<PathBuf> {
    let p = Path::new(program);
    if p.components().count() > 1 {
        return p.is_file().then(|| p.to_path_buf());
    }
    std::env::var_os("PATH").and_then(|paths| std::env::split_paths(&paths).map(|d| d.join(program)).find(|c| c.is_file()))
}

fn check_kind(spec: &AdapterSpec, expected: AdapterKind) -> Result<(), AdapterError> {
    if spec.kind != expected {
        return Err(AdapterError::WrongKind { expected, got: spec.kind });
    }
    Ok(())
}

fn mock_fails(spec: &AdapterSpec, label: &str) -> bool {
    matches!(&spec.transport, Transport::Mock { fail_labels } if fail_labels.iter().any(|l| l == label))
}

/// Renders `req.text` into a 16 kHz mono WAV at `req.out`.
pub fn run_tts(spec: &AdapterSpec, req: &TtsRequest<'_>) -> Result<(), AdapterError> {
    check_kind(spec, AdapterKind::Tts)?;
    let speed = spec.speed.to_string();
    let out = req.out.display().to_string();
    match &spec.transport {
        Transport::Mock { .. } => {
            if mock_fails(spec, req.label_id) {
                return Err(AdapterError::MockFailure(req.label_id.to_string()));
            }
            let seconds = req.text.chars().count() as f64 * MOCK_SECONDS_PER_CHAR / spec.speed;
            audio::write_wav(req.out, &audio::sine_tone(seconds, SAMPLE_RATE, MOCK_TONE_HZ), SAMPLE_RATE)?;
        }
        Transport::Subprocess { command } => {
            let argv = render_command(command, &[("text", req.text), ("voice", &spec.voice), ("speed", &speed), ("out", &out)]);
            run_command(&argv, spec.timeout_s)?;
        }
        Transport::Http { endpoint } => {
            let body = TtsBody { text: req.text, voice: &spec.voice, speed: spec.speed, out: out.clone() };
            let reply = post(endpoint, &body, spec.timeout_s)?;
            if reply.output_path != req.out {
                std::fs::copy(&reply.output_path, req.out)?;
            }
        }
    }
    if !req.out.is_file() {
        return Err(AdapterError::NoOutput(req.out.to_path_buf()));
    }
    audio::read_speech(req.out)?;
    Ok(())
}

/// Drives `req.video` with `req.audio`.
pub fn run_lipsync(spec: &AdapterSpec, req: &LipSyncRequest<'_>) -> Result<LipSyncOutput, AdapterError> {
    check_kind(spec, AdapterKind::LipSync)?;
    let (video, audio_path, out) = (req.video.display().to_string(), req.audio.display().to_string(), req.out.display().to_string());
    let output = match &spec.transport {
        Transport::Mock { .. } => {
            if mock_fails(spec, req.label_id) {
                return Err(AdapterError::MockFailure(req.label_id.to_string()));
            }
            mock_lipsync(req)?;
            LipSyncOutput { path: req.out.to_path_buf(), sha256: None }
        }
        Transport::Subprocess { command } => {
            let argv = render_command(command, &[("video", &video), ("audio", &audio_path), ("out", &out), ("voice", &spec.voice)]);
            run_command(&argv, spec.timeout_s)?;
            LipSyncOutput { path: req.out.to_path_buf(), sha256: None }
        }
        Transport::Http { endpoint } => {
            let reply = post(endpoint, &LipSyncBody { video, audio: audio_path, out }, spec.timeout_s)?;
            LipSyncOutput { path: reply.output_path, sha256: reply.sha256 }
        }
    };
    if !output.path.is_file() {
        return Err(AdapterError::NoOutput(output.path));
    }
    if let Some(expected) = &output.sha256 {
        let actual = sha256_file(&output.path)?;
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(AdapterError::ChecksumMismatch { expected: expected.clone(), actual });
        }
    }
    Ok(output)
}

/// Copy-through: keeps the driving video's streams and adds the audio.
fn mock_lipsync(req: &LipSyncRequest<'_>) -> Result<(), AdapterError> {
    let samples = audio::read_speech(req.audio)?;
    let audio_stream = MockStream {
        kind: StreamKind::Audio,
        codec: "pcm_s16le".into(),
        duration_s: samples.len() as f64 / SAMPLE_RATE as f64,
        sha256: sha256_file(req.audio)?,
    };
    match MockContainer::read(req.video) {
        Ok(mut c) => {
            c.streams.retain(|s| s.kind == StreamKind::Video);
            c.streams.push(audio_stream);
            c.write(req.out)?;
        }
        Err(_) => {
            std::fs::copy(req.video, req.out)?;
        }
    }
    Ok(())
}

fn post<B: Serialize>(endpoint: &str, body: &B, timeout_s: f64) -> Result<HttpReply, AdapterError> {
    let mut resp = agent(timeout_s).post(endpoint).send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => AdapterError::Timeout { after_s: timeout_s },
        other => AdapterError::Unreachable(format!("{endpoint}: {other}")),
    })?;
    let status = resp.status().as_u16();
    if status != 200 {
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        return Err(AdapterError::HttpStatus { status, body });
    }
    resp.body_mut().read_json::<HttpReply>().map_err(|e| match e {
        ureq::Error::Timeout(_) => AdapterError::Timeout { after_s: timeout_s },
        other => AdapterError::HttpStatus { status, body: format!("unreadable reply: {other}") },
    })
}

fn run_command(argv: &[String], timeout_s: f64) -> Result<(), AdapterError> {
    let (program, args) = argv.split_first().ok_or_else(|| AdapterError::Spawn("empty command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| AdapterError::Spawn(format!("{program}: {e}")))?;
    let mut stderr = child.stderr.take().expect("stderr is piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + Duration::from_secs_f64(timeout_s);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(AdapterError::Timeout { after_s: timeout_s });
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let err = reader.join().unwrap_or_default();
    if !status.success() {
        let tail: String = err.chars().rev().take(2000).collect::<Vec<_>>().into_iter().rev().collect();
        return Err(AdapterError::NonZeroExit { code: status.code(), stderr: tail.trim().to_string() });
    }
    Ok(())
}
