//! SI-SDR, a plain SDR, bucketed score reports and real-time factor.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores are clamped to `[-SCORE_CAP_DB, SCORE_CAP_DB]` so that perfect and
/// silent estimates aggregate without infinities.
pub const SCORE_CAP_DB: f64 = 60.0;

/// Neumaier-compensated sum; the result does not depend on how the
/// rounding errors of earlier terms fell.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = compensated_sum(x.iter().copied()) / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn check_pair(est: &[f64], reference: &[f64]) -> Result<()> {
    if est.len() != reference.len() {
        return Err(Error::validation(format!(
            "estimate has {} samples, reference has {}",
            est.len(),
            reference.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::validation("signals are empty"));
    }
    if est.iter().chain(reference).any(|v| !v.is_finite()) {
        return Err(Error::validation("signals must be finite"));
    }
    Ok(())
}

fn capped_ratio_db(signal: f64, error: f64) -> f64 {
    if !(signal > 0.0) {
        return -SCORE_CAP_DB;
    }
    if !(error > 0.0) {
        return SCORE_CAP_DB;
    }
    (10.0 * (signal / error).log10()).clamp(-SCORE_CAP_DB, SCORE_CAP_DB)
}

/// Scale-invariant SDR in dB between zero-meaned signals.
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    let x = zero_mean(reference);
    let y = zero_mean(est);
    let ref_energy = dot(&x, &x);
    if !(ref_energy > 0.0) {
        return Err(Error::ZeroPower("reference"));
    }
    let alpha = dot(&y, &x) / ref_energy;
    let target: Vec<f64> = x.iter().map(|v| alpha * v).collect();
    let noise: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
    Ok(capped_ratio_db(dot(&target, &target), dot(&noise, &noise)))
}

/// `10 log10(|x|^2 / |x_hat - x|^2)` after zero-meaning; scale errors count.
pub fn sdr_simple(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    let x = zero_mean(reference);
    let y = zero_mean(est);
    let ref_energy = dot(&x, &x);
    if !(ref_energy > 0.0) {
        return Err(Error::ZeroPower("reference"));
    }
    let err: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
    Ok(capped_ratio_db(ref_energy, dot(&err, &err)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub si_sdr_db: f64,
    pub sdr_db: f64,
    pub speaker_count: usize,
    pub angle_difference_deg: Option<f64>,
    #[serde(default)]
    pub rtf: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleBucket {
    Below15,
    From15To45,
    From45To90,
    Above90,
}

impl AngleBucket {
    pub const ALL: [AngleBucket; 4] = [Self::Below15, Self::From15To45, Self::From45To90, Self::Above90];

    pub fn of(ad_deg: f64) -> Self {
        if ad_deg < 15.0 {
            Self::Below15
        } else if ad_deg < 45.0 {
            Self::From15To45
        } else if ad_deg < 90.0 {
            Self::From45To90
        } else {
            Self::Above90
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Below15 => "<15",
            Self::From15To45 => "15-45",
            Self::From45To90 => "45-90",
            Self::Above90 => ">=90",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub label: String,
    pub count: usize,
    pub mean_si_sdr_db: f64,
    pub mean_sdr_db: f64,
    /// Mean over records that carry an RTF.
    pub mean_rtf: Option<f64>,
}

impl BucketStats {
    fn from_records(label: impl Into<String>, records: &[&ScoreRecord]) -> Option<Self> {
        if records.is_empty() {
            return None;
        }
        let n = records.len() as f64;
        let rtfs: Vec<f64> = records.iter().filter_map(|r| r.rtf).collect();
        Some(Self {
            label: label.into(),
            count: records.len(),
            mean_si_sdr_db: compensated_sum(records.iter().map(|r| r.si_sdr_db)) / n,
            mean_sdr_db: compensated_sum(records.iter().map(|r| r.sdr_db)) / n,
            mean_rtf: (!rtfs.is_empty()).then(|| compensated_sum(rtfs.iter().copied()) / rtfs.len() as f64),
        })
    }
}

/// Per speaker count, per angle difference and overall means. Empty
/// buckets are left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub overall: BucketStats,
    pub speakers: Vec<BucketStats>,
    pub angles: Vec<BucketStats>,
}

pub fn bucket_report(records: &[ScoreRecord]) -> Result<BucketReport> {
    let all: Vec<&ScoreRecord> = records.iter().collect();
    let overall = BucketStats::from_records("average", &all).ok_or_else(|| Error::validation("no score records"))?;
    let mut counts: Vec<usize> = records.iter().map(|r| r.speaker_count).collect();
    counts.sort_unstable();
    counts.dedup();
    let speakers = counts
        .into_iter()
        .filter_map(|c| {
            let rs: Vec<_> = records.iter().filter(|r| r.speaker_count == c).collect();
            BucketStats::from_records(format!("{c}spk"), &rs)
        })
        .collect();
    let angles = AngleBucket::ALL
        .into_iter()
        .filter_map(|b| {
            let rs: Vec<_> = records
                .iter()
                .filter(|r| r.speaker_count > 1)
                .filter(|r| r.angle_difference_deg.map(AngleBucket::of) == Some(b))
                .collect();
            BucketStats::from_records(b.label(), &rs)
        })
        .collect();
    Ok(BucketReport {
        overall,
        speakers,
        angles,
    })
}

impl BucketReport {
    /// Aligned text table: one column per bucket, rows for SI-SDR, SDR and
    /// the record count.
    pub fn to_table(&self) -> String {
        let cols: Vec<&BucketStats> = self.speakers.iter().chain(&self.angles).chain([&self.overall]).collect();
        let width = cols.iter().map(|c| c.label.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "");
        for c in &cols {
            let _ = write!(out, " {:>width$}", c.label);
        }
        out.push('\n');
        type Cell = fn(&BucketStats) -> String;
        let rows: [(&str, Cell); 3] = [
            ("SI-SDR", |c| format!("{:.2}", c.mean_si_sdr_db)),
            ("SDR", |c| format!("{:.2}", c.mean_sdr_db)),
            ("count", |c| c.count.to_string()),
        ];
        for (name, cell) in rows {
            let _ = write!(out, "{name:<8}");
            for c in &cols {
                let _ = write!(out, " {:>width$}", cell(c));
            }
            out.push('\n');
        }
        if let Some(rtf) = self.overall.mean_rtf {
            let _ = writeln!(out, "RTF {rtf:.4}");
        }
        out
    }
}

/// Processing seconds per second of audio.
pub fn rtf(processing_secs: f64, audio_secs: f64) -> Result<f64> {
    if !(audio_secs > 0.0) {
        return Err(Error::validation("audio duration must be positive"));
    }
    Ok(processing_secs / audio_secs)
}

/// Runs `process` once and returns its output with the wall-clock RTF.
pub fn measure_rtf<T, F: FnOnce() -> T>(process: F, audio_secs: f64) -> Result<(T, f64)> {
    if !(audio_secs > 0.0) {
        return Err(Error::validation("audio duration must be positive"));
    }
    let start = Instant::now();
    let out = process();
    let secs = start.elapsed().as_secs_f64();
    Ok((out, secs / audio_secs))
}
