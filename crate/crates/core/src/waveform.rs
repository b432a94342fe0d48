use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Multi-channel time-domain audio, stored as `[channels, samples]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelWaveform {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl MultiChannelWaveform {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::validation("waveform needs at least one channel"));
        }
        if samples.ncols() == 0 {
            return Err(Error::validation("waveform needs at least one sample"));
        }
        if sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("waveform contains non-finite samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let len = samples.len();
        let arr = Array2::from_shape_vec((1, len), samples)
            .map_err(|e| Error::validation(e.to_string()))?;
        Self::new(arr, sample_rate)
    }

    pub fn zeros(channels: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(Array2::zeros((channels, len)), sample_rate)
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    /// Always false: a waveform holds at least one sample.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn channel(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.samples.index_axis(Axis(0), idx)
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Mean power of one channel over its full length.
    pub fn channel_power(&self, idx: usize) -> f64 {
        let ch = self.channel(idx);
        ch.iter().map(|v| v * v).sum::<f64>() / ch.len() as f64
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: &self.samples * gain,
            sample_rate: self.sample_rate,
        }
    }

    /// Keeps only the given channel as a 1-channel waveform.
    pub fn select_channel(&self, idx: usize) -> Result<Self> {
        if idx >= self.channels() {
            return Err(Error::validation(format!(
                "channel {idx} out of range for {}-channel waveform",
                self.channels()
            )));
        }
        let row = self.channel(idx).to_owned().insert_axis(Axis(0));
        Ok(Self {
            samples: row,
            sample_rate: self.sample_rate,
        })
    }

    /// Truncates or zero-pads every channel to `len` samples.
    pub fn with_len(&self, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::validation("target length must be positive"));
        }
        let mut out = Array2::zeros((self.channels(), len));
        let keep = len.min(self.len());
        out.slice_mut(ndarray::s![.., ..keep])
            .assign(&self.samples.slice(ndarray::s![.., ..keep]));
        Ok(Self {
            samples: out,
            sample_rate: self.sample_rate,
        })
    }
}
