//! 16-bit PCM RIFF wave reading/writing and sample-rate conversion.

use std::path::Path;

use ndarray::Array2;

use super::Waveform;
use crate::error::{CoreError, Result};

/// Read a 16-bit PCM wave file (mono or stereo) at its native rate.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(CoreError::Data(format!(
            "{}: expected 16-bit integer PCM, got {:?} {} bit",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(CoreError::Data(format!(
            "{}: expected 1 or 2 channels, got {channels}",
            path.display()
        )));
    }
    let interleaved: Vec<i16> = reader
        .samples::<i16>()
        .collect::<std::result::Result<_, _>>()?;
    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(CoreError::Data(format!("{}: empty wave file", path.display())));
    }
    let mut samples = Array2::zeros((channels, frames));
    for (i, &v) in interleaved.iter().enumerate() {
        samples[[i % channels, i / channels]] = v as f64 / 32768.0;
    }
    Waveform::new(samples, spec.sample_rate)
}

/// Write a waveform as 16-bit PCM, clamping to [-1, 1).
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: w.channels() as u16,
        sample_rate: w.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for t in 0..w.frames() {
        for c in 0..w.channels() {
            let v = (w.samples()[[c, t]] * 32768.0).round().clamp(-32768.0, 32767.0);
            writer.write_sample(v as i16)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Linear-interpolation resampler.
pub fn resample_linear(w: &Waveform, target_rate: u32) -> Waveform {
    if w.sample_rate() == target_rate {
        return w.clone();
    }
    let ratio = target_rate as f64 / w.sample_rate() as f64;
    let out_frames = ((w.frames() as f64) * ratio).round().max(1.0) as usize;
    let mut out = Array2::zeros((w.channels(), out_frames));
    let n = w.frames();
    for c in 0..w.channels() {
        for t in 0..out_frames {
            let pos = t as f64 / ratio;
            let i0 = pos.floor() as usize;
            let frac = pos - i0 as f64;
            let a = w.samples()[[c, i0.min(n - 1)]];
            let b = w.samples()[[c, (i0 + 1).min(n - 1)]];
            out[[c, t]] = a + (b - a) * frac;
        }
    }
    Waveform::new(out, target_rate).expect("resampled waveform is valid")
}

/// Load a clip and resample it to `target_rate`.
pub fn load_clip(path: &Path, target_rate: u32) -> Result<Waveform> {
    let w = read_wav(path)?;
    Ok(resample_linear(&w, target_rate))
}
