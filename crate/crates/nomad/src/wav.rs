//! 16-bit PCM mono WAV reading and writing.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use nomad_core::signal::to_pcm16;
use nomad_core::Waveform;

use crate::{Error, Result};

pub fn load_wav(path: &Path) -> Result<Waveform> {
    let reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let unsupported = |reason: String| Error::UnsupportedFormat { path: path.to_path_buf(), reason };
    if spec.channels != 1 {
        return Err(unsupported(format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(unsupported(format!("{:?} {}-bit, expected 16-bit PCM", spec.sample_format, spec.bits_per_sample)));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| map_hound(path, e))?;
    if samples.is_empty() {
        return Err(Error::CorruptHeader { path: path.to_path_buf(), reason: "no samples".into() });
    }
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let spec = WavSpec { channels: 1, sample_rate: w.sample_rate(), bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &x in w.samples() {
        writer.write_sample(to_pcm16(x)).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io)
            if io.kind() == std::io::ErrorKind::UnexpectedEof || io.to_string().contains("read enough bytes") =>
        {
            Error::CorruptHeader { path: path.to_path_buf(), reason: "unexpected end of file".into() }
        }
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::FormatError(reason) => Error::CorruptHeader { path: path.to_path_buf(), reason: reason.into() },
        hound::Error::Unsupported => {
            Error::UnsupportedFormat { path: path.to_path_buf(), reason: "unsupported WAV encoding".into() }
        }
        other => Error::UnsupportedFormat { path: path.to_path_buf(), reason: other.to_string() },
    }
}
