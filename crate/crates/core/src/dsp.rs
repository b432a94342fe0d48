//! Windowing and short-time Fourier analysis/synthesis.
//!
//! Frames start at sample 0 with no centre padding: frame `t` covers
//! `[t * hop, t * hop + N)`. With a periodic sqrt-Hann window at 50% overlap
//! the squared analysis/synthesis window sums to one, so overlap-add
//! reconstructs the input exactly everywhere two frames overlap.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::MultiChannelWaveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    SqrtHann,
}

pub fn make_window(kind: WindowKind, len: usize) -> Result<Vec<f64>> {
    if len < 2 || !len.is_multiple_of(2) {
        return Err(Error::validation(format!(
            "window length must be even and >= 2, got {len}"
        )));
    }
    Ok(match kind {
        WindowKind::SqrtHann => (0..len)
            .map(|n| (0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos())).sqrt())
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    /// 32 ms sqrt-Hann window with 16 ms hop at 16 kHz.
    fn default() -> Self {
        Self {
            window_length: 512,
            hop: 256,
            fft_size: 512,
            window: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 || !self.window_length.is_multiple_of(2) {
            return Err(Error::validation("window length must be even and >= 2"));
        }
        if self.hop == 0 || self.hop > self.window_length {
            return Err(Error::validation("hop must be in 1..=window_length"));
        }
        if self.fft_size < self.window_length {
            return Err(Error::validation("fft size must be >= window length"));
        }
        Ok(())
    }

    pub fn freq_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frame_count(&self, len: usize) -> Option<usize> {
        (len >= self.window_length).then(|| (len - self.window_length) / self.hop + 1)
    }

    /// Length of the signal produced by synthesising `frames` frames.
    pub fn synthesis_len(&self, frames: usize) -> usize {
        (frames.max(1) - 1) * self.hop + self.window_length
    }

    pub fn bin_hz(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * sample_rate as f64 / self.fft_size as f64
    }
}

/// Complex T-F representation, `[channels, frames, freqs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    bins: Array3<Complex64>,
    config: StftConfig,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn new(bins: Array3<Complex64>, config: StftConfig, sample_rate: u32) -> Result<Self> {
        config.validate()?;
        let (u, t, f) = bins.dim();
        if u == 0 || t == 0 {
            return Err(Error::validation("spectrogram needs >= 1 channel and frame"));
        }
        if f != config.freq_bins() {
            return Err(Error::validation(format!(
                "spectrogram has {f} bins, config implies {}",
                config.freq_bins()
            )));
        }
        if bins.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::validation("spectrogram contains non-finite values"));
        }
        Ok(Self {
            bins,
            config,
            sample_rate,
        })
    }

    pub fn bins(&self) -> &Array3<Complex64> {
        &self.bins
    }

    pub fn channel(&self, u: usize) -> ArrayView2<'_, Complex64> {
        self.bins.index_axis(Axis(0), u)
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.bins.dim().0
    }

    pub fn frames(&self) -> usize {
        self.bins.dim().1
    }

    pub fn freqs(&self) -> usize {
        self.bins.dim().2
    }

    /// Single-channel spectrogram from one `[frames, freqs]` plane.
    pub fn from_plane(plane: Array2<Complex64>, config: StftConfig, sample_rate: u32) -> Result<Self> {
        Self::new(plane.insert_axis(Axis(0)), config, sample_rate)
    }
}

fn plan(size: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(size)
    } else {
        planner.plan_fft_forward(size)
    }
}

pub fn stft(wave: &MultiChannelWaveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    let frames = cfg.frame_count(wave.len()).ok_or(Error::TooShort {
        len: wave.len(),
        needed: cfg.window_length,
    })?;
    let window = make_window(cfg.window, cfg.window_length)?;
    let fft = plan(cfg.fft_size, false);
    let n_freq = cfg.freq_bins();
    let channels = wave.channels();

    let planes: Vec<Vec<Complex64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let signal = wave.channel(c);
            let mut out = Vec::with_capacity(frames * n_freq);
            let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for t in 0..frames {
                let start = t * cfg.hop;
                buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
                for (n, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
                    *b = Complex64::new(signal[start + n] * w, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                out.extend_from_slice(&buf[..n_freq]);
            }
            out
        })
        .collect();

    let flat: Vec<Complex64> = planes.into_iter().flatten().collect();
    let bins = Array3::from_shape_vec((channels, frames, n_freq), flat)
        .map_err(|e| Error::validation(e.to_string()))?;
    ComplexSpectrogram::new(bins, *cfg, wave.sample_rate())
}

/// Weighted overlap-add synthesis with the analysis window.
///
/// Output length is `(T - 1) * hop + N`. Only the region covered by two
/// frames, `[N - hop, len - N + hop)`, reconstructs the analysed signal.
pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig) -> Result<MultiChannelWaveform> {
    cfg.validate()?;
    if spec.config() != cfg {
        return Err(Error::validation("synthesis config differs from analysis config"));
    }
    if spec.freqs() != cfg.freq_bins() {
        return Err(Error::validation("spectrogram bin count does not match config"));
    }
    if cfg.hop * 2 != cfg.window_length {
        return Err(Error::validation(
            "overlap-add synthesis requires 50% overlap (hop = N/2)",
        ));
    }
    let window = make_window(cfg.window, cfg.window_length)?;
    let ifft = plan(cfg.fft_size, true);
    let frames = spec.frames();
    let len = cfg.synthesis_len(frames);
    let n_freq = cfg.freq_bins();
    let norm = 1.0 / cfg.fft_size as f64;

    let rows: Vec<Vec<f64>> = (0..spec.channels())
        .into_par_iter()
        .map(|c| {
            let plane = spec.channel(c);
            let mut out = vec![0.0; len];
            let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
            let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
            for t in 0..frames {
                for f in 0..n_freq {
                    buf[f] = plane[[t, f]];
                }
                for f in n_freq..cfg.fft_size {
                    buf[f] = plane[[t, cfg.fft_size - f]].conj();
                }
                ifft.process_with_scratch(&mut buf, &mut scratch);
                let start = t * cfg.hop;
                for (n, w) in window.iter().enumerate() {
                    out[start + n] += buf[n].re * norm * w;
                }
            }
            out
        })
        .collect();

    let samples = Array2::from_shape_vec((rows.len(), len), rows.into_iter().flatten().collect())
        .map_err(|e| Error::validation(e.to_string()))?;
    MultiChannelWaveform::new(samples, spec.sample_rate())
}
