use std::path::Path;

use hound::{SampleFormat, WavSpec};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::waveform::MultiChannelWaveform;

/// PCM16 full scale. Symmetric scaling keeps the round-trip error under 2^-15.
const PCM16_SCALE: f64 = 32767.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WavWriteOptions {
    pub encoding: WavEncoding,
    /// Scale so the peak magnitude is exactly 1 (only when it exceeds 1).
    pub normalize_peak: bool,
    /// Clamp out-of-range samples instead of rejecting them.
    pub clip: bool,
}

impl WavWriteOptions {
    pub fn new(encoding: WavEncoding) -> Self {
        Self {
            encoding,
            ..Self::default()
        }
    }
}

fn format_error(detail: impl ToString) -> Error {
    Error::Format {
        kind: "WAV",
        detail: detail.to_string(),
    }
}

/// Maps decoder errors; I/O failures while parsing mean the file is cut short.
fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::Unsupported {
            kind: "WAV encoding",
            detail: format!("{}", path.display()),
        },
        other => format_error(format!("{}: {other}", path.display())),
    }
}

fn write_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        other => map_hound(path, other),
    }
}

pub fn read_wav(path: &Path) -> Result<MultiChannelWaveform> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader =
        hound::WavReader::new(std::io::BufReader::new(file)).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(format_error("zero channels"));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| (v as f64 / PCM16_SCALE).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (fmt, bits) => {
            return Err(Error::Unsupported {
                kind: "WAV encoding",
                detail: format!("{bits}-bit {fmt:?}"),
            })
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(format_error("sample count not a multiple of channel count"));
    }
    let len = interleaved.len() / channels;
    if len == 0 {
        return Err(format_error("no audio frames"));
    }
    let samples = Array2::from_shape_fn((channels, len), |(c, n)| interleaved[n * channels + c]);
    MultiChannelWaveform::new(samples, spec.sample_rate)
}

pub fn write_wav(path: &Path, wave: &MultiChannelWaveform, opts: WavWriteOptions) -> Result<()> {
    let peak = wave.peak();
    let gain = if opts.normalize_peak && peak > 1.0 {
        1.0 / peak
    } else {
        1.0
    };
    if !opts.clip && peak * gain > 1.0 {
        return Err(Error::validation(format!(
            "sample magnitude {peak} exceeds 1 and clipping is disabled"
        )));
    }
    let spec = WavSpec {
        channels: wave.channels() as u16,
        sample_rate: wave.sample_rate(),
        bits_per_sample: match opts.encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match opts.encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = hound::WavWriter::new(std::io::BufWriter::new(file), spec)
        .map_err(|e| write_error(path, e))?;
    let data = wave.samples();
    for n in 0..wave.len() {
        for c in 0..wave.channels() {
            let v = (data[[c, n]] * gain).clamp(-1.0, 1.0);
            match opts.encoding {
                WavEncoding::Pcm16 => writer.write_sample((v * PCM16_SCALE).round() as i16),
                WavEncoding::Float32 => writer.write_sample(v as f32),
            }
            .map_err(|e| write_error(path, e))?;
        }
    }
    writer.finalize().map_err(|e| write_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(samples: Vec<f64>, channels: usize) -> MultiChannelWaveform {
        let len = samples.len() / channels;
        MultiChannelWaveform::new(Array2::from_shape_vec((channels, len), samples).unwrap(), 16000)
            .unwrap()
    }

    #[test]
    fn silent_second_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zeros.wav");
        let w = MultiChannelWaveform::zeros(1, 16000, 16000).unwrap();
        write_wav(&path, &w, WavWriteOptions::new(WavEncoding::Pcm16)).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), 16000);
        assert_eq!(back.sample_rate(), 16000);
        assert!(back.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_range_without_clipping_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loud.wav");
        let w = wave(vec![0.0, 1.5, -0.2], 1);
        let err = write_wav(&path, &w, WavWriteOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));

        let clipped = WavWriteOptions {
            clip: true,
            ..WavWriteOptions::default()
        };
        write_wav(&path, &w, clipped).unwrap();
        assert_eq!(read_wav(&path).unwrap().channel(0)[1], 1.0);
    }

    #[test]
    fn peak_normalization_brings_samples_in_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm.wav");
        let w = wave(vec![0.0, 2.0, -1.0], 1);
        let opts = WavWriteOptions {
            normalize_peak: true,
            ..WavWriteOptions::default()
        };
        write_wav(&path, &w, opts).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.channel(0).to_vec(), vec![0.0, 1.0, -0.5]);
    }

    #[test]
    fn nine_channel_file_keeps_channel_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nine.wav");
        let w = MultiChannelWaveform::new(
            Array2::from_shape_fn((9, 400), |(c, n)| ((c * 400 + n) as f64 * 0.01).sin() * 0.5),
            16000,
        )
        .unwrap();
        write_wav(&path, &w, WavWriteOptions::default()).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.channels(), 9);
        assert_eq!(back.len(), 400);
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.wav");
        let w = wave((0..3200).map(|i| (i as f64 * 0.01).sin() * 0.3).collect(), 2);
        write_wav(&path, &w, WavWriteOptions::new(WavEncoding::Pcm16)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..30]).unwrap();
        assert!(matches!(read_wav(&path), Err(Error::Format { .. })));
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(read_wav(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn unsupported_bit_depth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pcm8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..10i8 {
            w.write_sample(i).unwrap();
        }
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn nan_rejected_at_construction() {
        let arr = Array2::from_shape_vec((1, 2), vec![0.0, f64::NAN]).unwrap();
        assert!(MultiChannelWaveform::new(arr, 16000).is_err());
    }
}
