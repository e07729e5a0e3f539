//! HTTP adapters against a small in-process service.

use std::path::PathBuf;

use axum::extract::Path as UrlPath;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use lipread::adapters::{health_check, run_lipsync, run_tts, AdapterError, LipSyncRequest, TtsRequest};
use lipread::audio::{read_speech, sine_tone, write_wav, SAMPLE_RATE};
use lipread::fsutil::sha256_file;
use lipread_core::synth::{AdapterKind, AdapterSpec, Transport};
use serde_json::{json, Value};

async fn tts(Json(body): Json<Value>) -> Json<Value> {
    let out = PathBuf::from(body["out"].as_str().unwrap());
    let seconds = body["text"].as_str().unwrap().len() as f64 * 0.05 / body["speed"].as_f64().unwrap();
    write_wav(&out, &sine_tone(seconds, SAMPLE_RATE, 300.0), SAMPLE_RATE).unwrap();
    Json(json!({ "output_path": out }))
}

/// `mode` is "ok", "lie" (wrong checksum) or "down" (HTTP 500).
async fn sync(UrlPath(mode): UrlPath<String>, Json(body): Json<Value>) -> Result<Json<Value>, (StatusCode, String)> {
    if mode == "down" {
        return Err((StatusCode::INTERNAL_SERVER_ERROR, "model crashed".into()));
    }
    let out = PathBuf::from(body["out"].as_str().unwrap());
    std::fs::copy(body["video"].as_str().unwrap(), &out).unwrap();
    let sha = if mode == "lie" { "0".repeat(64) } else { sha256_file(&out).unwrap() };
    Ok(Json(json!({ "output_path": out, "sha256": sha })))
}

fn start_service() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/tts", post(tts))
                .route("/tts/health", get(|| async { "ok" }))
                .route("/sync/{mode}", post(sync))
                .route("/sync/{mode}/health", get(|| async { "ok" }));
            axum::serve(tokio::net::TcpListener::from_std(listener).unwrap(), app).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn spec(kind: AdapterKind, endpoint: String) -> AdapterSpec {
    AdapterSpec { transport: Transport::Http { endpoint }, speed: 2.0, timeout_s: 10.0, ..AdapterSpec::mock(kind) }
}

#[test]
fn http_tts_and_lipsync() {
    let base = start_service();
    let dir = tempfile::tempdir().unwrap();

    let tts_spec = spec(AdapterKind::Tts, format!("{base}/tts"));
    health_check(&tts_spec).unwrap();
    let speech = dir.path().join("speech.wav");
    run_tts(&tts_spec, &TtsRequest { label_id: "l", text: "twenty characters!!!", out: &speech }).unwrap();
    assert_eq!(read_speech(&speech).unwrap().len(), SAMPLE_RATE as usize / 2);

    let video = dir.path().join("drv.bin");
    std::fs::write(&video, b"frames").unwrap();
    let out = dir.path().join("synced.bin");
    let req = LipSyncRequest { label_id: "l", video: &video, audio: &speech, out: &out };

    let ok = spec(AdapterKind::LipSync, format!("{base}/sync/ok"));
    health_check(&ok).unwrap();
    let got = run_lipsync(&ok, &req).unwrap();
    assert_eq!(got.path, out);
    assert_eq!(got.sha256.unwrap(), sha256_file(&video).unwrap());

    let lie = spec(AdapterKind::LipSync, format!("{base}/sync/lie"));
    let err = run_lipsync(&lie, &req).unwrap_err();
    assert!(matches!(err, AdapterError::ChecksumMismatch { .. }));
    assert_eq!(err.code(), "checksum_mismatch");

    let down = spec(AdapterKind::LipSync, format!("{base}/sync/down"));
    match run_lipsync(&down, &req).unwrap_err() {
        AdapterError::HttpStatus { status, body } => assert_eq!((status, body.as_str()), (500, "model crashed")),
        other => panic!("{other:?}"),
    }

    let missing = spec(AdapterKind::Tts, format!("{base}/nothing"));
    assert!(matches!(health_check(&missing), Err(AdapterError::Unreachable(_))));
}
