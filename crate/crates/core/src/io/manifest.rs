use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn check(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::validation(format!(
                "range {name} = [{}, {}] is empty or non-finite",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn within(&self, bounds: &Range) -> bool {
        self.lo >= bounds.lo && self.hi <= bounds.hi
    }
}

/// Default sampling ranges of the mixture simulation recipe.
pub mod defaults {
    use super::Range;

    pub const SAMPLE_RATE: u32 = 16_000;
    pub const SPEAKER_COUNT_WEIGHTS: [f64; 3] = [0.49, 0.29, 0.22];
    pub const ROOM_X: Range = Range::new(4.0, 10.0);
    pub const ROOM_Y: Range = Range::new(4.0, 8.0);
    pub const ROOM_Z: Range = Range::new(2.5, 6.0);
    pub const T60: Range = Range::new(0.05, 0.7);
    pub const SIR_DB: Range = Range::new(-6.0, 6.0);
    pub const SNR_DB: Range = Range::new(18.0, 30.0);
    pub const SOURCE_DISTANCE: Range = Range::new(1.0, 5.0);
    pub const WALL_MARGIN: f64 = 0.3;
    pub const SOUND_SPEED: f64 = 343.0;
    pub const MAX_IMAGE_ORDER: usize = 12;
}

fn default_sample_rate() -> u32 {
    defaults::SAMPLE_RATE
}
fn default_weights() -> [f64; 3] {
    defaults::SPEAKER_COUNT_WEIGHTS
}
fn default_room_x() -> Range {
    defaults::ROOM_X
}
fn default_room_y() -> Range {
    defaults::ROOM_Y
}
fn default_room_z() -> Range {
    defaults::ROOM_Z
}
fn default_t60() -> Range {
    defaults::T60
}
fn default_sir() -> Range {
    defaults::SIR_DB
}
fn default_snr() -> Option<Range> {
    Some(defaults::SNR_DB)
}
fn default_distance() -> Range {
    defaults::SOURCE_DISTANCE
}
fn default_margin() -> f64 {
    defaults::WALL_MARGIN
}
fn default_sound_speed() -> f64 {
    defaults::SOUND_SPEED
}
fn default_max_order() -> usize {
    defaults::MAX_IMAGE_ORDER
}
fn default_true() -> bool {
    true
}

/// Declarative description of a simulated dataset. Every sampled quantity
/// has an explicit range; omitted fields take the recipe defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub base_seed: u64,
    pub count: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    /// Probabilities for 1, 2 and 3 speakers.
    #[serde(default = "default_weights")]
    pub speaker_count_weights: [f64; 3],
    #[serde(default = "default_room_x")]
    pub room_x: Range,
    #[serde(default = "default_room_y")]
    pub room_y: Range,
    #[serde(default = "default_room_z")]
    pub room_z: Range,
    #[serde(default = "default_t60")]
    pub t60: Range,
    #[serde(default = "default_sir")]
    pub sir_db: Range,
    /// `null` disables additive noise.
    #[serde(default = "default_snr")]
    pub snr_db: Option<Range>,
    #[serde(default = "default_distance")]
    pub source_distance: Range,
    #[serde(default = "default_margin")]
    pub wall_margin: f64,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
    #[serde(default = "default_max_order")]
    pub max_image_order: usize,
    /// Loop noise recordings shorter than the mixture.
    #[serde(default = "default_true")]
    pub loop_noise: bool,
    pub sources: Vec<PathBuf>,
    #[serde(default)]
    pub noises: Vec<PathBuf>,
}

impl SimulationManifest {
    /// Manifest with recipe defaults and the given audio listings.
    pub fn with_defaults(base_seed: u64, count: usize, sources: Vec<PathBuf>, noises: Vec<PathBuf>) -> Self {
        Self {
            base_seed,
            count,
            sample_rate: defaults::SAMPLE_RATE,
            speaker_count_weights: defaults::SPEAKER_COUNT_WEIGHTS,
            room_x: defaults::ROOM_X,
            room_y: defaults::ROOM_Y,
            room_z: defaults::ROOM_Z,
            t60: defaults::T60,
            sir_db: defaults::SIR_DB,
            snr_db: Some(defaults::SNR_DB),
            source_distance: defaults::SOURCE_DISTANCE,
            wall_margin: defaults::WALL_MARGIN,
            sound_speed: defaults::SOUND_SPEED,
            max_image_order: defaults::MAX_IMAGE_ORDER,
            loop_noise: true,
            sources,
            noises,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut manifest: Self = super::read_json(path)?;
        if let Some(base) = path.parent() {
            manifest.resolve_paths(base);
        }
        manifest.validate()?;
        Ok(manifest)
    }

    /// Makes relative audio paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.sources.iter_mut().chain(self.noises.iter_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.speaker_count_weights;
        if w.iter().any(|p| !p.is_finite() || *p < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "speaker count weights {w:?} must be non-negative and sum to 1"
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        for (name, r) in [
            ("room_x", &self.room_x),
            ("room_y", &self.room_y),
            ("room_z", &self.room_z),
            ("t60", &self.t60),
            ("sir_db", &self.sir_db),
            ("source_distance", &self.source_distance),
        ] {
            r.check(name)?;
        }
        if let Some(snr) = &self.snr_db {
            snr.check("snr_db")?;
        }
        if self.t60.lo <= 0.0 {
            return Err(Error::validation("t60 range must be positive"));
        }
        if self.source_distance.lo <= 0.0 {
            return Err(Error::validation("source distance must be positive"));
        }
        if !(self.wall_margin >= 0.0) || !(self.sound_speed > 0.0) {
            return Err(Error::validation("wall margin and sound speed must be positive"));
        }
        let min_dim = self.room_x.lo.min(self.room_y.lo).min(self.room_z.lo);
        if min_dim <= 2.0 * self.wall_margin {
            return Err(Error::validation("smallest room leaves no space inside the wall margin"));
        }
        if self.sources.is_empty() {
            return Err(Error::validation("source listing is empty"));
        }
        let max_speakers = (0..3).rev().find(|&i| w[i] > 0.0).map_or(1, |i| i + 1);
        if self.sources.len() < max_speakers {
            return Err(Error::validation(format!(
                "{} source utterances cannot fill a {max_speakers}-speaker mixture",
                self.sources.len()
            )));
        }
        if self.snr_db.is_some() && self.noises.is_empty() {
            return Err(Error::validation("noise listing is empty but an SNR range is set"));
        }
        for (name, r, bounds) in [
            ("room_x", &self.room_x, defaults::ROOM_X),
            ("room_y", &self.room_y, defaults::ROOM_Y),
            ("room_z", &self.room_z, defaults::ROOM_Z),
            ("t60", &self.t60, defaults::T60),
            ("sir_db", &self.sir_db, defaults::SIR_DB),
            ("source_distance", &self.source_distance, defaults::SOURCE_DISTANCE),
        ] {
            if !r.within(&bounds) {
                log::warn!("{name} range [{}, {}] overrides the recipe bounds", r.lo, r.hi);
            }
        }
        Ok(())
    }
}
