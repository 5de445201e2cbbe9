//! Mono WAV reading and writing.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

fn parse_error(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => Error::Io(io),
        hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV encoding".into()),
        other => Error::Parse(other.to_string()),
    }
}

pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<Waveform<T>> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(parse_error)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "expected mono audio, found {} channels",
            spec.channels
        )));
    }
    let samples: Vec<T> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedFormat(format!(
                    "{}-bit float samples",
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(|v| T::of(v as f64)))
                .collect::<std::result::Result<_, _>>()
                .map_err(parse_error)?
        }
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| T::of(v as f64 / scale)))
                .collect::<std::result::Result<_, _>>()
                .map_err(parse_error)?
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

pub fn write_wav<T: Real>(path: impl AsRef<Path>, wave: &Waveform<T>, format: WavFormat) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(parse_error)?;
    for &s in wave.samples() {
        match format {
            WavFormat::Pcm16 => {
                let q = (s.as_f64() * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q)
            }
            WavFormat::Float32 => writer.write_sample(s.as_f64() as f32),
        }
        .map_err(parse_error)?;
    }
    writer.finalize().map_err(parse_error)
}
