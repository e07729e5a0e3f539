//! 16-bit mono PCM WAV files.

use std::path::Path;

use thiserror::Error;

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("{path}: expected 16-bit mono PCM at {expected} Hz, found {channels} channel(s), {bits}-bit, {rate} Hz")]
    Format { path: String, expected: u32, channels: u16, bits: u16, rate: u32 },
}

fn spec(sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int }
}

/// Reads a mono 16-bit integer WAV and returns its samples and rate.
pub fn read_wav(path: &Path) -> Result<(Vec<i16>, u32), AudioError> {
    let reader = hound::WavReader::open(path)?;
    let s = reader.spec();
    if s.channels != 1 || s.bits_per_sample != 16 || s.sample_format != hound::SampleFormat::Int {
        return Err(AudioError::Format {
            path: path.display().to_string(),
            expected: SAMPLE_RATE,
            channels: s.channels,
            bits: s.bits_per_sample,
            rate: s.sample_rate,
        });
    }
    let samples = reader.into_samples::<i16>().collect::<Result<Vec<_>, _>>()?;
    Ok((samples, s.sample_rate))
}

/// Like [`read_wav`] but also insists on the 16 kHz adapter rate.
pub fn read_speech(path: &Path) -> Result<Vec<i16>, AudioError> {
    let (samples, rate) = read_wav(path)?;
    if rate != SAMPLE_RATE {
        return Err(AudioError::Format { path: path.display().to_string(), expected: SAMPLE_RATE, channels: 1, bits: 16, rate });
    }
    Ok(samples)
}

pub fn write_wav(path: &Path, samples: &[i16], sample_rate: u32) -> Result<(), AudioError> {
    let mut w = hound::WavWriter::create(path, spec(sample_rate))?;
    for &s in samples {
        w.write_sample(s)?;
    }
    w.finalize()?;
    Ok(())
}

/// A pure tone with 5 ms fades so it starts and ends on zero.
pub fn sine_tone(duration_s: f64, sample_rate: u32, freq_hz: f64) -> Vec<i16> {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let fade = (0.005 * sample_rate as f64) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let edge = i.min(n - 1 - i);
            let gain = if fade == 0 { 1.0 } else { (edge as f64 / fade as f64).min(1.0) };
            (0.3 * i16::MAX as f64 * gain * (2.0 * std::f64::consts::PI * freq_hz * t).sin()).round() as i16
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let tone = sine_tone(0.25, SAMPLE_RATE, 220.0);
        assert_eq!(tone.len(), 4000);
        assert_eq!(tone[0], 0);
        write_wav(&p, &tone, SAMPLE_RATE).unwrap();
        assert_eq!(read_speech(&p).unwrap(), tone);
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.wav");
        write_wav(&p, &[0, 1, 2], 8000).unwrap();
        assert_eq!(read_wav(&p).unwrap().1, 8000);
        assert!(matches!(read_speech(&p), Err(AudioError::Format { rate: 8000, .. })));
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        let spec = hound::WavSpec { channels: 2, ..spec(SAMPLE_RATE) };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(AudioError::Format { channels: 2, .. })));
    }
}
