//! Spatialised noisy reverberant mixture synthesis.
//!
//! One call to [`simulate_mixture`] runs the full recipe for a single
//! example: speaker count, utterances, SIRs, room, T60, array and speaker
//! placement, noise, RIRs, convolution, scaling and summation. All random
//! draws come from a ChaCha stream keyed by `(base_seed, index)`, so
//! examples are reproducible and independent of generation order.

use std::f64::consts::PI;
use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rir::{
    apply_rir, auto_max_order, rir_length, room_response, t60_to_reflectivity, RoomSpec,
    ShoeboxRoom,
};
use crate::error::{Error, Result};
use crate::io::{read_wav, Range, SimulationManifest};
use crate::spatial::{self, norm, sub, ArrayGeometry, Vec3};
use crate::waveform::MultiChannelWaveform;

const MAX_ROOM_DRAWS: usize = 1000;
const MAX_PLACEMENT_DRAWS: usize = 1000;
/// Peak level that keeps every written component inside [-1, 1].
const PEAK_CEILING: f64 = 0.99;

fn power_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Scales `interferer` so that the reference-channel power ratio
/// `P_target / P_interferer` equals `sir_db`.
pub fn scale_to_sir(
    target: &MultiChannelWaveform,
    interferer: &MultiChannelWaveform,
    sir_db: f64,
) -> Result<MultiChannelWaveform> {
    let pt = target.channel_power(0);
    let pi = interferer.channel_power(0);
    if !(pt > 0.0) {
        return Err(Error::ZeroPower("target"));
    }
    if !(pi > 0.0) {
        return Err(Error::ZeroPower("interferer"));
    }
    let gain = (pt / (pi * 10f64.powf(sir_db / 10.0))).sqrt();
    Ok(interferer.scaled(gain))
}

/// Noise scaled to `snr_db` against the reference channel of `speech`,
/// replicated to every channel and cut to the speech length. Noise shorter
/// than the speech is looped when `allow_loop` is set.
pub fn scale_noise_to_snr(
    speech: &MultiChannelWaveform,
    noise: &[f64],
    snr_db: f64,
    allow_loop: bool,
) -> Result<MultiChannelWaveform> {
    let len = speech.len();
    if noise.is_empty() || (noise.len() < len && !allow_loop) {
        return Err(Error::NoiseLength {
            noise: noise.len(),
            needed: len,
        });
    }
    let segment: Vec<f64> = (0..len).map(|n| noise[n % noise.len()]).collect();
    let pn = segment.iter().map(|v| v * v).sum::<f64>() / len as f64;
    if !(pn > 0.0) {
        return Err(Error::ZeroPower("noise"));
    }
    let ps = speech.channel_power(0);
    if !(ps > 0.0) {
        return Err(Error::ZeroPower("speech"));
    }
    let gain = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let samples = Array2::from_shape_fn((speech.channels(), len), |(_, n)| segment[n] * gain);
    MultiChannelWaveform::new(samples, speech.sample_rate())
}

/// Adds noise at the requested SNR; `snr_db = +inf` returns `mix` unchanged.
pub fn add_noise_at_snr(
    mix: &MultiChannelWaveform,
    noise: &[f64],
    snr_db: f64,
    allow_loop: bool,
) -> Result<MultiChannelWaveform> {
    if snr_db == f64::INFINITY {
        return Ok(mix.clone());
    }
    let scaled = scale_noise_to_snr(mix, noise, snr_db, allow_loop)?;
    MultiChannelWaveform::new(mix.samples() + scaled.samples(), mix.sample_rate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub mic_positions: Vec<Vec3>,
    pub source_positions: Vec<Vec3>,
    pub array_axis: Vec3,
}

impl Placement {
    pub fn geometry(&self, sample_rate: u32, sound_speed: f64) -> Result<ArrayGeometry> {
        let pairs = if self.mic_positions.len() == 9 {
            ArrayGeometry::DEFAULT_PAIRS.to_vec()
        } else {
            Vec::new()
        };
        ArrayGeometry::new(
            self.mic_positions.clone(),
            pairs,
            self.array_axis,
            sound_speed,
            sample_rate,
        )
    }
}

/// Everything about an example except the audio itself; serialised as the
/// per-example `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMetadata {
    pub id: String,
    pub index: u64,
    pub base_seed: u64,
    pub sample_rate: u32,
    pub length: usize,
    pub speaker_count: usize,
    pub target_index: usize,
    pub directions_deg: Vec<f64>,
    /// Target-to-interferer ratio for each interferer, in order.
    pub sir_db: Vec<f64>,
    /// `None` when no noise was added.
    pub snr_db: Option<f64>,
    pub angle_difference_deg: Option<f64>,
    pub room: RoomSpec,
    pub reflectivity: f64,
    pub max_image_order: usize,
    pub rir_length: usize,
    pub placement: Placement,
    pub source_files: Vec<PathBuf>,
    pub noise_file: Option<PathBuf>,
    pub noise_offset: usize,
    /// Common gain applied to all components to keep the peak below 1.
    pub output_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureExample {
    pub mixture: MultiChannelWaveform,
    /// Scaled reverberant images of each source; index 0 is the target.
    pub reverberant_sources: Vec<MultiChannelWaveform>,
    /// Scaled noise as added to the mixture.
    pub noise: Option<MultiChannelWaveform>,
    pub meta: MixtureMetadata,
}

impl MixtureExample {
    /// Sum of sources and noise in the order the mixture was built.
    pub fn recompose(&self) -> Array2<f64> {
        let mut acc = self.reverberant_sources[0].samples().clone();
        for s in &self.reverberant_sources[1..] {
            acc += s.samples();
        }
        if let Some(n) = &self.noise {
            acc += n.samples();
        }
        acc
    }
}

pub fn example_id(index: u64) -> String {
    format!("ex_{index:06}")
}

fn uniform(rng: &mut ChaCha8Rng, r: &Range) -> f64 {
    if r.hi > r.lo {
        rng.random_range(r.lo..=r.hi)
    } else {
        r.lo
    }
}

fn sample_speaker_count(rng: &mut ChaCha8Rng, weights: &[f64; 3]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i + 1;
        }
    }
    // rounding slack: fall back to the last count with non-zero weight
    (0..3).rev().find(|&i| weights[i] > 0.0).map_or(1, |i| i + 1)
}

fn sample_room(rng: &mut ChaCha8Rng, m: &SimulationManifest) -> Result<(RoomSpec, f64)> {
    for attempt in 0..MAX_ROOM_DRAWS {
        let room = RoomSpec {
            size: [uniform(rng, &m.room_x), uniform(rng, &m.room_y), uniform(rng, &m.room_z)],
            t60: uniform(rng, &m.t60),
            sound_speed: m.sound_speed,
        };
        match t60_to_reflectivity(&room) {
            Ok(beta) => return Ok((room, beta)),
            Err(Error::InfeasibleT60 { t60, alpha, .. }) => {
                log::debug!("draw {attempt}: T60 {t60:.3} s infeasible (alpha {alpha:.2}), redrawing room");
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Placement {
        what: "a room with feasible T60",
        attempts: MAX_ROOM_DRAWS,
    })
}

fn sample_array(rng: &mut ChaCha8Rng, room: &RoomSpec, margin: f64, fs: u32) -> Result<ArrayGeometry> {
    let azimuth = rng.random_range(0.0..2.0 * PI);
    let axis = [azimuth.cos(), azimuth.sin(), 0.0];
    let half = ArrayGeometry::DEFAULT_GAPS.iter().sum::<f64>() / 2.0;
    let mut center = [0.0; 3];
    for i in 0..3 {
        let reach = half * axis[i].abs();
        let (lo, hi) = (margin + reach, room.size[i] - margin - reach);
        if lo > hi {
            return Err(Error::Placement {
                what: "microphone array",
                attempts: 1,
            });
        }
        center[i] = rng.random_range(lo..=hi);
    }
    let mut geom = ArrayGeometry::linear_at(center, axis, fs);
    geom.sound_speed = room.sound_speed;
    Ok(geom)
}

fn sample_source(
    rng: &mut ChaCha8Rng,
    room: &RoomSpec,
    margin: f64,
    center: Vec3,
    distance: &Range,
) -> Result<Vec3> {
    for _ in 0..MAX_PLACEMENT_DRAWS {
        let p = [
            rng.random_range(margin..=room.size[0] - margin),
            rng.random_range(margin..=room.size[1] - margin),
            rng.random_range(margin..=room.size[2] - margin),
        ];
        if distance.contains(norm(sub(p, center))) {
            return Ok(p);
        }
    }
    Err(Error::Placement {
        what: "speaker",
        attempts: MAX_PLACEMENT_DRAWS,
    })
}

fn load_mono(path: &std::path::Path, fs: u32) -> Result<Vec<f64>> {
    let wave = read_wav(path)?;
    if wave.sample_rate() != fs {
        return Err(Error::validation(format!(
            "{} is sampled at {} Hz, manifest expects {fs} Hz",
            path.display(),
            wave.sample_rate()
        )));
    }
    Ok(wave.channel(0).to_vec())
}

fn example_rng(manifest: &SimulationManifest, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.base_seed);
    rng.set_stream(index);
    rng
}

/// Speaker count example `index` will have, without simulating it.
pub fn planned_speaker_count(manifest: &SimulationManifest, index: u64) -> usize {
    sample_speaker_count(&mut example_rng(manifest, index), &manifest.speaker_count_weights)
}

/// Runs the simulation recipe for example `index` of `manifest`.
pub fn simulate_mixture(manifest: &SimulationManifest, index: u64) -> Result<MixtureExample> {
    manifest.validate()?;
    let fs = manifest.sample_rate;
    let mut rng = example_rng(manifest, index);

    // speakers, utterances and interference levels
    let speakers = sample_speaker_count(&mut rng, &manifest.speaker_count_weights);
    let chosen: Vec<usize> = sample_indices(&mut rng, manifest.sources.len(), speakers).into_vec();
    let sir_db: Vec<f64> = (1..speakers).map(|_| uniform(&mut rng, &manifest.sir_db)).collect();

    // room and placement
    let (room, beta) = sample_room(&mut rng, manifest)?;
    let geom = sample_array(&mut rng, &room, manifest.wall_margin, fs)?;
    let center = geom.center();
    let source_positions = (0..speakers)
        .map(|_| sample_source(&mut rng, &room, manifest.wall_margin, center, &manifest.source_distance))
        .collect::<Result<Vec<_>>>()?;

    // noise draw
    let noise_choice = match &manifest.snr_db {
        Some(snr) => {
            let file = rng.random_range(0..manifest.noises.len());
            let offset_seed: u64 = rng.random();
            Some((file, offset_seed, uniform(&mut rng, snr)))
        }
        None => None,
    };

    let dry: Vec<Vec<f64>> = chosen
        .iter()
        .map(|&i| load_mono(&manifest.sources[i], fs))
        .collect::<Result<_>>()?;
    let length = dry.iter().map(Vec::len).max().unwrap();

    let shoebox = ShoeboxRoom {
        size: room.size,
        reflectivity: beta,
        sound_speed: room.sound_speed,
    };
    let rir_len = rir_length(room.t60, fs);
    let nearest = source_positions
        .iter()
        .map(|s| norm(sub(*s, center)))
        .fold(f64::INFINITY, f64::min);
    let max_order = auto_max_order(&shoebox, nearest, manifest.max_image_order);

    let mut reverberant = Vec::with_capacity(speakers);
    for (src_pos, samples) in source_positions.iter().zip(&dry) {
        let rirs: Vec<Vec<f64>> = geom
            .positions
            .par_iter()
            .map(|mic| room_response(&shoebox, *src_pos, *mic, fs, max_order, rir_len))
            .collect::<Result<_>>()?;
        let mono = MultiChannelWaveform::mono(samples.clone(), fs)?;
        reverberant.push(apply_rir(&mono, &rirs)?.with_len(length)?);
    }

    for (i, sir) in sir_db.iter().enumerate() {
        reverberant[i + 1] = scale_to_sir(&reverberant[0], &reverberant[i + 1], *sir)?;
    }

    let mut speech = reverberant[0].samples().clone();
    for s in &reverberant[1..] {
        speech += s.samples();
    }
    let speech = MultiChannelWaveform::new(speech, fs)?;

    let (mut noise, noise_file, noise_offset, snr_db) = match noise_choice {
        Some((file, offset_seed, snr)) => {
            let path = &manifest.noises[file];
            let full = load_mono(path, fs)?;
            let offset = if full.len() > length {
                (offset_seed % (full.len() - length + 1) as u64) as usize
            } else {
                0
            };
            let scaled = scale_noise_to_snr(&speech, &full[offset..], snr, manifest.loop_noise)?;
            (Some(scaled), Some(path.clone()), offset, Some(snr))
        }
        None => (None, None, 0, None),
    };

    // common gain so that no component or the mixture clips
    let mut peak = reverberant.iter().map(|w| w.peak()).fold(0.0, f64::max);
    if let Some(n) = &noise {
        peak = peak.max(n.peak());
    }
    let mut mixture = reverberant[0].samples().clone();
    for s in &reverberant[1..] {
        mixture += s.samples();
    }
    if let Some(n) = &noise {
        mixture += n.samples();
    }
    peak = peak.max(mixture.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let gain = if peak > PEAK_CEILING { PEAK_CEILING / peak } else { 1.0 };
    if gain != 1.0 {
        reverberant = reverberant.iter().map(|w| w.scaled(gain)).collect();
        noise = noise.map(|n| n.scaled(gain));
    }

    let directions = source_positions
        .iter()
        .map(|p| spatial::source_angle(&geom, *p))
        .collect::<Result<Vec<_>>>()?;
    let angle_difference = spatial::angle_difference(directions[0], &directions[1..]);

    let mut example = MixtureExample {
        mixture: speech,
        reverberant_sources: reverberant,
        noise,
        meta: MixtureMetadata {
            id: example_id(index),
            index,
            base_seed: manifest.base_seed,
            sample_rate: fs,
            length,
            speaker_count: speakers,
            target_index: 0,
            directions_deg: directions,
            sir_db,
            snr_db,
            angle_difference_deg: angle_difference,
            room,
            reflectivity: beta,
            max_image_order: max_order,
            rir_length: rir_len,
            placement: Placement {
                mic_positions: geom.positions.clone(),
                source_positions,
                array_axis: geom.axis,
            },
            source_files: chosen.iter().map(|&i| manifest.sources[i].clone()).collect(),
            noise_file,
            noise_offset,
            output_gain: gain,
        },
    };
    example.mixture = MultiChannelWaveform::new(example.recompose(), fs)?;
    Ok(example)
}

/// Reference-channel SIR of each interferer and SNR, re-measured from the
/// stored components.
pub fn measure_levels(example: &MixtureExample) -> (Vec<f64>, Option<f64>) {
    let target = example.reverberant_sources[0].channel_power(0);
    let sirs = example.reverberant_sources[1..]
        .iter()
        .map(|s| power_db(target / s.channel_power(0)))
        .collect();
    let snr = example.noise.as_ref().map(|n| {
        let mut speech = example.reverberant_sources[0].samples().clone();
        for s in &example.reverberant_sources[1..] {
            speech += s.samples();
        }
        let ps = speech.row(0).iter().map(|v| v * v).sum::<f64>();
        let pn = n.channel(0).iter().map(|v| v * v).sum::<f64>();
        power_db(ps / pn)
    });
    (sirs, snr)
}
