//! WAV ingestion and export: PCM 16-bit and IEEE float-32, little-endian.
//!
//! Reading converts PCM samples to floats in `[-1, 1)` by dividing by 32768
//! and mixes multichannel material down to mono by averaging. Writing emits
//! mono IEEE float-32 by default (lossless for our pipeline) or PCM 16-bit
//! on request.

use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Read a WAV file into a mono [`AudioBuffer`].
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::format("WAV reports zero channels"));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(format!("bad PCM sample: {e}")))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(format!("bad float sample: {e}")))?,
        (fmt, bits) => {
            return Err(Error::format(format!(
                "unsupported WAV encoding {fmt:?}/{bits}-bit (need PCM-16 or float-32)"
            )))
        }
    };

    let frames = interleaved.len() / channels;
    let mono: Vec<f64> = (0..frames)
        .map(|f| {
            interleaved[f * channels..(f + 1) * channels]
                .iter()
                .sum::<f64>()
                / channels as f64
        })
        .collect();
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Write a mono float-32 WAV.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)
        .map_err(|e| Error::format(e.to_string()))?;
    for &s in &audio.samples {
        writer
            .write_sample(s as f32)
            .map_err(|e| Error::format(e.to_string()))?;
    }
    writer.finalize().map_err(|e| Error::format(e.to_string()))
}

/// Write a mono PCM 16-bit WAV (values clamped to the i16 range).
pub fn write_wav_pcm16(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)
        .map_err(|e| Error::format(e.to_string()))?;
    for &s in &audio.samples {
        let v = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::format(e.to_string()))?;
    }
    writer.finalize().map_err(|e| Error::format(e.to_string()))
}
