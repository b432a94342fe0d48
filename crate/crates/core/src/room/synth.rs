//! Seeded synthetic speech-like utterances and background noise, used to
//! exercise the simulator without an external corpus.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{write_wav, SimulationManifest, WavEncoding, WavWriteOptions};
use crate::waveform::MultiChannelWaveform;

/// Formant resonance gain with unit peak.
fn resonance(freq: f64, center: f64, bandwidth: f64) -> f64 {
    let x = (freq - center) / bandwidth;
    1.0 / (1.0 + x * x)
}

/// Voiced "syllables" of a harmonic source with moving formants, separated
/// by short pauses and padded with leading and trailing silence.
pub fn synthetic_utterance(rng: &mut impl Rng, sample_rate: u32, seconds: f64) -> Vec<f64> {
    let fs = sample_rate as f64;
    let len = (seconds * fs).round().max(1.0) as usize;
    let mut out = vec![0.0; len];
    let base_f0 = rng.random_range(90.0..240.0);
    let lead = (rng.random_range(0.05..0.25) * fs) as usize;
    let tail = (rng.random_range(0.05..0.25) * fs) as usize;
    let mut pos = lead;
    while pos + tail < len {
        let syl = (rng.random_range(0.12..0.32) * fs) as usize;
        let end = (pos + syl).min(len - tail);
        if end <= pos + 16 {
            break;
        }
        let formants = [
            (rng.random_range(300.0..900.0), 90.0),
            (rng.random_range(900.0..2500.0), 120.0),
            (rng.random_range(2500.0..3600.0), 180.0),
        ];
        let f0_start = base_f0 * rng.random_range(0.85..1.15);
        let f0_end = base_f0 * rng.random_range(0.85..1.15);
        let fricative = rng.random_bool(0.25);
        let mut phase = rng.random_range(0.0..2.0 * PI);
        let n = end - pos;
        for i in 0..n {
            let frac = i as f64 / n as f64;
            let env = (PI * frac).sin().powf(0.6);
            let f0 = f0_start + (f0_end - f0_start) * frac;
            phase += 2.0 * PI * f0 / fs;
            let mut v = 0.0;
            let mut k = 1;
            while (k as f64) * f0 < 0.45 * fs.min(9000.0) {
                let h = k as f64 * f0;
                let gain = formants
                    .iter()
                    .map(|&(c, b)| resonance(h, c, b))
                    .sum::<f64>()
                    / (k as f64).sqrt();
                v += gain * (k as f64 * phase).sin();
                k += 1;
            }
            if fricative {
                let noise: f64 = StandardNormal.sample(rng);
                v += 0.15 * noise * (1.0 - frac);
            }
            out[pos + i] = env * v;
        }
        pos = end + (rng.random_range(0.03..0.15) * fs) as usize;
    }
    normalize_peak(&mut out, 0.5);
    out
}

/// Low-passed Gaussian noise with a weak mains hum.
pub fn synthetic_noise(rng: &mut impl Rng, sample_rate: u32, seconds: f64) -> Vec<f64> {
    let fs = sample_rate as f64;
    let len = (seconds * fs).round().max(1.0) as usize;
    let pole = rng.random_range(0.6..0.97);
    let hum_freq = if rng.random_bool(0.5) { 50.0 } else { 60.0 };
    let hum = rng.random_range(0.0..0.2);
    let mut state = 0.0;
    let mut out: Vec<f64> = (0..len)
        .map(|n| {
            let w: f64 = StandardNormal.sample(rng);
            state = pole * state + (1.0 - pole) * w;
            state + hum * (2.0 * PI * hum_freq * n as f64 / fs).sin() * 0.05
        })
        .collect();
    normalize_peak(&mut out, 0.5);
    out
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

/// Options for [`write_synthetic_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub seed: u64,
    pub sources: usize,
    pub noises: usize,
    pub sample_rate: u32,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub noise_seconds: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            sources: 12,
            noises: 3,
            sample_rate: 16_000,
            min_seconds: 2.0,
            max_seconds: 4.0,
            noise_seconds: 6.0,
        }
    }
}

/// Writes `sources/*.wav` and `noise/*.wav` under `dir` and returns a
/// default-range manifest listing them with paths relative to `dir`.
pub fn write_synthetic_corpus(dir: &Path, spec: &CorpusSpec, count: usize) -> Result<SimulationManifest> {
    if spec.sources == 0 || !(spec.min_seconds > 0.0) || spec.max_seconds < spec.min_seconds {
        return Err(Error::validation("corpus needs sources and a valid duration range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let opts = WavWriteOptions::new(WavEncoding::Float32);
    let mut sources = Vec::new();
    let mut noises = Vec::new();
    for (sub, n, list) in [("sources", spec.sources, &mut sources), ("noise", spec.noises, &mut noises)] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        for i in 0..n {
            let samples = if sub == "sources" {
                let secs = if spec.max_seconds > spec.min_seconds {
                    rng.random_range(spec.min_seconds..spec.max_seconds)
                } else {
                    spec.min_seconds
                };
                synthetic_utterance(&mut rng, spec.sample_rate, secs)
            } else {
                synthetic_noise(&mut rng, spec.sample_rate, spec.noise_seconds)
            };
            let rel = PathBuf::from(sub).join(format!("{sub}_{i:03}.wav"));
            let wave = MultiChannelWaveform::mono(samples, spec.sample_rate)?;
            write_wav(&dir.join(&rel), &wave, opts)?;
            list.push(rel);
        }
    }
    let mut manifest = SimulationManifest::with_defaults(spec.seed, count, sources, noises);
    manifest.sample_rate = spec.sample_rate;
    if spec.noises == 0 {
        manifest.snr_db = None;
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utterance_has_silent_edges_and_bounded_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = synthetic_utterance(&mut rng, 16000, 2.0);
        assert_eq!(x.len(), 32000);
        let peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
        assert!(x[..400].iter().all(|&v| v == 0.0));
        assert!(x[x.len() - 400..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generation_is_seeded() {
        let a = synthetic_noise(&mut ChaCha8Rng::seed_from_u64(1), 16000, 0.5);
        let b = synthetic_noise(&mut ChaCha8Rng::seed_from_u64(1), 16000, 0.5);
        assert_eq!(a, b);
    }
}
