//! Placing a speech utterance over the mouth-movement region of a driving video.
//!
//! Lip-sync generators leave the original lip motion untouched wherever the
//! driving audio is silent, so speech has to be laid over the region where the
//! driving face is actually talking and padded with digital silence elsewhere.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmark::{Face, LandmarkTrack};

/// Inter-ocular distance, in pixels, that motion values are rescaled to.
pub const REFERENCE_IOD_PX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignmentError {
    #[error("track contains no frames")]
    EmptyTrack,
    #[error("signal has {len} frames, fewer than the required {min}")]
    SignalTooShort { len: usize, min: usize },
    #[error("no mouth activity above threshold")]
    NoMouthActivity,
    #[error("speech ({speech_s} s) is longer than the video ({video_s} s)")]
    SpeechLongerThanVideo { speech_s: f64, video_s: f64 },
    #[error("durations must be positive and finite")]
    InvalidDuration,
    #[error("speech is {actual_s} s but the plan expects {expected_s} s")]
    DurationMismatch { expected_s: f64, actual_s: f64 },
}

/// Per-frame mouth motion in pixels/frame at [`REFERENCE_IOD_PX`] face size.
///
/// Each value is the mean displacement of the 20 mouth points from the
/// previous face-bearing frame, after removing the motion of the rigid part of
/// the face (so head movement alone reads as zero). Frames without a face,
/// and the first face frame, are zero.
pub fn mouth_motion_signal(track: &LandmarkTrack) -> Result<Vec<f64>, AlignmentError> {
    if track.frames.is_empty() {
        return Err(AlignmentError::EmptyTrack);
    }
    let mut signal = vec![0.0; track.frames.len()];
    let mut prev: Option<&Face> = None;
    for (value, frame) in signal.iter_mut().zip(&track.frames) {
        let Some(face) = frame.face.as_ref() else { continue };
        if let Some(p) = prev {
            *value = mouth_displacement(p, face);
        }
        prev = Some(face);
    }
    Ok(signal)
}

fn mouth_displacement(prev: &Face, cur: &Face) -> f64 {
    let shift = cur.rigid_centroid().sub(prev.rigid_centroid());
    let iod = 0.5 * (prev.inter_ocular_distance() + cur.inter_ocular_distance());
    if iod <= 0.0 {
        return 0.0;
    }
    let total: f64 = prev.mouth().iter().zip(cur.mouth()).map(|(a, b)| libm::hypot(b.x - a.x - shift.x, b.y - a.y - shift.y)).sum();
    total / prev.mouth().len() as f64 / iod * REFERENCE_IOD_PX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityConfig {
    pub window_frames: usize,
    /// Minimum window mean, in signal units (pixels/frame at reference face size).
    pub threshold: f64,
    /// Active runs separated by fewer than this many quiet frames are merged.
    pub merge_gap_frames: usize,
    pub min_frames: usize,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        Self { window_frames: 5, threshold: 0.02 * REFERENCE_IOD_PX, merge_gap_frames: 10, min_frames: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MouthActivitySegment {
    pub start_frame: usize,
    /// Inclusive.
    pub end_frame: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub peak_motion: f64,
    /// Set when other, disjoint active regions were dropped in favour of this one.
    pub multiple_regions: bool,
}

impl MouthActivitySegment {
    pub fn midpoint_s(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }
}

/// Finds the region of sustained mouth motion.
///
/// A window of `window_frames` frames is active when its mean is at least the
/// threshold; active windows are unioned into runs (so boundaries land on
/// window edges), runs closer than `merge_gap_frames` are merged, and the
/// longest run wins.
pub fn detect_mouth_activity(signal: &[f64], fps: f64, cfg: &ActivityConfig) -> Result<MouthActivitySegment, AlignmentError> {
    let min = cfg.min_frames.max(cfg.window_frames).max(1);
    if signal.len() < min {
        return Err(AlignmentError::SignalTooShort { len: signal.len(), min });
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(AlignmentError::InvalidDuration);
    }
    let w = cfg.window_frames.max(1);

    // Runs of covered frames, as inclusive (start, end).
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut sum = 0.0;
    for start in 0..=signal.len() - w {
        // Recompute periodically so the running sum cannot drift.
        if start % 256 == 0 {
            sum = signal[start..start + w].iter().sum();
        } else {
            sum += signal[start + w - 1] - signal[start - 1];
        }
        if sum / w as f64 >= cfg.threshold {
            let end = start + w - 1;
            match runs.last_mut() {
                Some(last) if start <= last.1 + 1 => last.1 = end,
                _ => runs.push((start, end)),
            }
        }
    }
    if runs.is_empty() {
        return Err(AlignmentError::NoMouthActivity);
    }

    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for run in runs {
        match merged.last_mut() {
            Some(last) if run.0 - last.1 - 1 < cfg.merge_gap_frames => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    let peak = |(s, e): (usize, usize)| signal[s..=e].iter().copied().fold(0.0, f64::max);
    let mut best = merged[0];
    for &run in &merged[1..] {
        let (len, best_len) = (run.1 - run.0, best.1 - best.0);
        if len > best_len || (len == best_len && peak(run) > peak(best)) {
            best = run;
        }
    }
    Ok(MouthActivitySegment {
        start_frame: best.0,
        end_frame: best.1,
        start_s: best.0 as f64 / fps,
        end_s: best.1 as f64 / fps,
        peak_motion: peak(best),
        multiple_regions: merged.len() > 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPlan {
    pub video_id: String,
    pub speech_duration_s: f64,
    pub speech_start_s: f64,
    pub lead_silence_s: f64,
    pub trail_silence_s: f64,
}

impl AlignmentPlan {
    pub fn video_duration_s(&self) -> f64 {
        self.lead_silence_s + self.speech_duration_s + self.trail_silence_s
    }

    pub fn speech_end_s(&self) -> f64 {
        self.speech_start_s + self.speech_duration_s
    }
}

/// Centres the speech on the segment midpoint, then clamps it into the video.
pub fn build_alignment_plan(
    video_id: &str,
    segment: &MouthActivitySegment,
    speech_duration_s: f64,
    video_duration_s: f64,
) -> Result<AlignmentPlan, AlignmentError> {
    let ok = |d: f64| d.is_finite() && d > 0.0;
    if !ok(speech_duration_s) || !ok(video_duration_s) {
        return Err(AlignmentError::InvalidDuration);
    }
    if speech_duration_s > video_duration_s {
        return Err(AlignmentError::SpeechLongerThanVideo { speech_s: speech_duration_s, video_s: video_duration_s });
    }
    let centred = segment.midpoint_s() - 0.5 * speech_duration_s;
    let start = centred.clamp(0.0, video_duration_s - speech_duration_s);
    Ok(AlignmentPlan {
        video_id: video_id.into(),
        speech_duration_s,
        speech_start_s: start,
        lead_silence_s: start,
        trail_silence_s: (video_duration_s - start - speech_duration_s).max(0.0),
    })
}

/// Lays `speech` into a zero-filled buffer spanning the whole video.
///
/// The speech must last `plan.speech_duration_s` to within a millisecond.
pub fn render_padded_audio(plan: &AlignmentPlan, speech: &[i16], sample_rate: u32) -> Result<Vec<i16>, AlignmentError> {
    if sample_rate == 0 {
        return Err(AlignmentError::InvalidDuration);
    }
    let sr = sample_rate as f64;
    let actual_s = speech.len() as f64 / sr;
    if libm::fabs(actual_s - plan.speech_duration_s) > 1e-3 {
        return Err(AlignmentError::DurationMismatch { expected_s: plan.speech_duration_s, actual_s });
    }
    let total = libm::round(plan.video_duration_s() * sr) as usize;
    let lead = (libm::round(plan.lead_silence_s * sr) as usize).min(total);
    let mut out = vec![0i16; total];
    let n = speech.len().min(total - lead);
    out[lead..lead + n].copy_from_slice(&speech[..n]);
    Ok(out)
}
