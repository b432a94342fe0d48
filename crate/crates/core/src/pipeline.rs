//! File-based processing stages.
//!
//! Stages talk only through files so each one can be rerun or cached on
//! its own:
//!
//! ```text
//! simulate        manifest -> <out>/index.json, <out>/<id>/{mixture,source_k,noise}.wav, meta.json
//! featurize       dataset  -> <out>/<id>/{lps,ipd,df,stacked}.mmts, features.json
//! oracle-separate dataset  -> <out>/<id>.wav, scores.json, mixture_scores.json
//! evaluate        estimates + dataset -> report.json
//! ```
//!
//! Every stage is deterministic for fixed inputs regardless of the worker
//! count. Per-item failures are collected and reported rather than aborting
//! the whole run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{istft, stft, ComplexSpectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::fusion::{apply_feature_gate, apply_mask, oracle_irm, rule_attention_weight, RuleAttentionParams};
use crate::io::{read_json, read_wav, write_json, write_tensor, write_wav, Range, SimulationManifest, TensorBlob, WavWriteOptions};
use crate::metrics::{bucket_report, measure_rtf, sdr_simple, si_sdr, BucketReport, ScoreRecord};
use crate::room::{simulate_mixture, MixtureExample, MixtureMetadata};
use crate::spatial::AcousticFeatures;
use crate::waveform::MultiChannelWaveform;

pub const INDEX_FILE: &str = "index.json";
pub const META_FILE: &str = "meta.json";
pub const MIXTURE_FILE: &str = "mixture.wav";
pub const NOISE_FILE: &str = "noise.wav";
pub const FEATURES_FILE: &str = "features.json";
pub const SCORES_FILE: &str = "scores.json";
pub const MIXTURE_SCORES_FILE: &str = "mixture_scores.json";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

/// Reference microphone for masking and scoring.
pub const REFERENCE_CHANNEL: usize = 0;

pub fn source_file(k: usize) -> String {
    format!("source_{k}.wav")
}

/// Runs `f` on a pool of `threads` workers (0 means one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub id: String,
    pub error: String,
}

/// Outcome of a stage; the process should exit non-zero when `failures`
/// is not empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageSummary {
    pub processed: Vec<String>,
    pub skipped: Vec<String>,
    pub failures: Vec<ItemFailure>,
}

impl StageSummary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn collect(results: Vec<(String, Result<bool>)>) -> Self {
        let mut summary = Self::default();
        for (id, r) in results {
            match r {
                Ok(true) => summary.processed.push(id),
                Ok(false) => summary.skipped.push(id),
                Err(e) => {
                    log::error!("{id}: {e}");
                    summary.failures.push(ItemFailure {
                        id,
                        error: e.to_string(),
                    });
                }
            }
        }
        summary
    }
}

// ---------------------------------------------------------------- simulate

/// Sampling ranges echoed at the top of the dataset index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub base_seed: u64,
    pub count: usize,
    pub sample_rate: u32,
    pub speaker_count_weights: [f64; 3],
    pub room_x: Range,
    pub room_y: Range,
    pub room_z: Range,
    pub t60: Range,
    pub sir_db: Range,
    pub snr_db: Option<Range>,
    pub source_distance: Range,
    pub wall_margin: f64,
    pub max_image_order: usize,
}

impl From<&SimulationManifest> for IndexHeader {
    fn from(m: &SimulationManifest) -> Self {
        Self {
            base_seed: m.base_seed,
            count: m.count,
            sample_rate: m.sample_rate,
            speaker_count_weights: m.speaker_count_weights,
            room_x: m.room_x,
            room_y: m.room_y,
            room_z: m.room_z,
            t60: m.t60,
            sir_db: m.sir_db,
            snr_db: m.snr_db,
            source_distance: m.source_distance,
            wall_margin: m.wall_margin,
            max_image_order: m.max_image_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub index: u64,
    pub speaker_count: usize,
    pub angle_difference_deg: Option<f64>,
    /// Relative to the dataset directory.
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub header: IndexHeader,
    pub examples: Vec<IndexEntry>,
}

impl DatasetIndex {
    pub fn load(dataset: &Path) -> Result<Self> {
        read_json(&dataset.join(INDEX_FILE))
    }
}

/// Writes one example directory; `meta.json` goes last and marks it done.
pub fn write_example(dir: &Path, ex: &MixtureExample) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let opts = WavWriteOptions::default();
    write_wav(&dir.join(MIXTURE_FILE), &ex.mixture, opts)?;
    for (k, src) in ex.reverberant_sources.iter().enumerate() {
        write_wav(&dir.join(source_file(k)), src, opts)?;
    }
    if let Some(n) = &ex.noise {
        write_wav(&dir.join(NOISE_FILE), n, opts)?;
    }
    let tmp = dir.join("meta.json.tmp");
    write_json(&tmp, &ex.meta)?;
    fs::rename(&tmp, dir.join(META_FILE)).map_err(|e| Error::io(dir, e))
}

fn example_complete(dir: &Path) -> bool {
    let Ok(meta) = read_json::<MixtureMetadata>(&dir.join(META_FILE)) else {
        return false;
    };
    let mut files = vec![dir.join(MIXTURE_FILE)];
    files.extend((0..meta.speaker_count).map(|k| dir.join(source_file(k))));
    if meta.snr_db.is_some() {
        files.push(dir.join(NOISE_FILE));
    }
    files.iter().all(|f| f.is_file())
}

/// Generates every example of `manifest` under `out`, skipping examples
/// whose directory is already complete, then writes the index.
pub fn simulate_dataset(manifest: &SimulationManifest, out: &Path) -> Result<(DatasetIndex, StageSummary)> {
    manifest.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let results: Vec<(String, Result<bool>)> = (0..manifest.count as u64)
        .into_par_iter()
        .map(|index| {
            let id = crate::room::mixture::example_id(index);
            let dir = out.join(&id);
            let r = if example_complete(&dir) {
                log::debug!("{id}: already complete");
                Ok(false)
            } else {
                simulate_mixture(manifest, index).and_then(|ex| write_example(&dir, &ex)).map(|_| true)
            };
            (id, r)
        })
        .collect();
    let summary = StageSummary::collect(results);

    let mut examples = Vec::new();
    for index in 0..manifest.count as u64 {
        let id = crate::room::mixture::example_id(index);
        let Ok(meta) = read_json::<MixtureMetadata>(&out.join(&id).join(META_FILE)) else {
            continue;
        };
        examples.push(IndexEntry {
            id: id.clone(),
            index,
            speaker_count: meta.speaker_count,
            angle_difference_deg: meta.angle_difference_deg,
            dir: id,
        });
    }
    let index = DatasetIndex {
        header: IndexHeader::from(manifest),
        examples,
    };
    write_json(&out.join(INDEX_FILE), &index)?;
    Ok((index, summary))
}

/// Loaded example: metadata plus the stored waveforms.
pub struct StoredExample {
    pub meta: MixtureMetadata,
    pub mixture: MultiChannelWaveform,
    pub sources: Vec<MultiChannelWaveform>,
    pub noise: Option<MultiChannelWaveform>,
}

pub fn load_example(dataset: &Path, entry: &IndexEntry) -> Result<StoredExample> {
    let dir = dataset.join(&entry.dir);
    let meta: MixtureMetadata = read_json(&dir.join(META_FILE))?;
    let mixture = read_wav(&dir.join(MIXTURE_FILE))?;
    let sources = (0..meta.speaker_count)
        .map(|k| read_wav(&dir.join(source_file(k))))
        .collect::<Result<Vec<_>>>()?;
    let noise = if meta.snr_db.is_some() {
        Some(read_wav(&dir.join(NOISE_FILE))?)
    } else {
        None
    };
    Ok(StoredExample {
        meta,
        mixture,
        sources,
        noise,
    })
}

// --------------------------------------------------------------- featurize

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub premask: bool,
    /// Rule-gate parameters; `None` leaves spatial features ungated.
    pub gate: Option<RuleAttentionParams>,
    /// Write per-example real-time factors to `timing.json`.
    pub timing: bool,
}

/// Sidecar describing the tensors of one featurized example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub id: String,
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub frames: usize,
    pub freqs: usize,
    pub pairs: usize,
    pub target_theta_deg: f64,
    pub premask: bool,
    pub gate_weight: Option<f64>,
    /// Row blocks of `stacked.mmts` in order.
    pub stacked_layout: Vec<(String, usize)>,
}

/// Features of one mixture with the target direction taken from `meta`.
pub fn featurize_example(
    mixture: &MultiChannelWaveform,
    meta: &MixtureMetadata,
    opts: &FeatureOptions,
) -> Result<(AcousticFeatures, Option<f64>, ComplexSpectrogram)> {
    let cfg = StftConfig::default();
    let theta = *meta
        .directions_deg
        .get(meta.target_index)
        .ok_or_else(|| Error::validation(format!("{}: metadata lacks the target direction", meta.id)))?;
    let geom = meta.placement.geometry(meta.sample_rate, meta.room.sound_speed)?;
    let spec = stft(mixture, &cfg)?;
    let mut feats = AcousticFeatures::compute(&spec, &geom, theta, opts.premask)?;
    let weight = opts.gate.map(|p| rule_attention_weight(meta.angle_difference_deg, p));
    if let Some(w) = weight {
        feats = apply_feature_gate(&feats, w)?;
    }
    Ok((feats, weight, spec))
}

fn featurize_one(dataset: &Path, entry: &IndexEntry, out: &Path, opts: &FeatureOptions) -> Result<f64> {
    let dir = dataset.join(&entry.dir);
    let meta: MixtureMetadata = read_json(&dir.join(META_FILE))?;
    let mixture = read_wav(&dir.join(MIXTURE_FILE))?;
    let (result, rtf) = measure_rtf(|| featurize_example(&mixture, &meta, opts), mixture.duration_secs())?;
    let (feats, weight, spec) = result?;
    let dst = out.join(&entry.id);
    fs::create_dir_all(&dst).map_err(|e| Error::io(&dst, e))?;
    write_tensor(&dst.join("lps.mmts"), &TensorBlob::from_array2_f32(&feats.lps))?;
    write_tensor(&dst.join("ipd.mmts"), &TensorBlob::from_array3_f32(&feats.ipd))?;
    write_tensor(&dst.join("df.mmts"), &TensorBlob::from_array2_f32(&feats.df))?;
    write_tensor(&dst.join("stacked.mmts"), &TensorBlob::from_array2_f32(&feats.stacked()))?;
    let f = feats.freqs();
    let pairs = feats.ipd.dim().0;
    let mut layout = vec![("lps".to_string(), f)];
    layout.extend((0..pairs).map(|m| (format!("ipd_{m}"), f)));
    layout.push(("df".to_string(), f));
    let sidecar = FeatureSidecar {
        id: entry.id.clone(),
        sample_rate: spec.sample_rate(),
        stft: *spec.config(),
        frames: feats.frames(),
        freqs: f,
        pairs,
        target_theta_deg: meta.directions_deg[meta.target_index],
        premask: opts.premask,
        gate_weight: weight,
        stacked_layout: layout,
    };
    write_json(&dst.join(FEATURES_FILE), &sidecar)?;
    Ok(rtf)
}

pub fn featurize_dataset(dataset: &Path, out: &Path, opts: &FeatureOptions) -> Result<StageSummary> {
    let index = DatasetIndex::load(dataset)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let results: Vec<(String, Result<f64>)> = index
        .examples
        .par_iter()
        .map(|e| (e.id.clone(), featurize_one(dataset, e, out, opts)))
        .collect();
    let timing: BTreeMap<String, f64> = results
        .iter()
        .filter_map(|(id, r)| r.as_ref().ok().map(|t| (id.clone(), *t)))
        .collect();
    if opts.timing {
        write_json(&out.join(TIMING_FILE), &timing)?;
    }
    Ok(StageSummary::collect(
        results.into_iter().map(|(id, r)| (id, r.map(|_| true))).collect(),
    ))
}

// ---------------------------------------------------------- oracle masking

/// Zeros in front so the first sample sits under a full window overlap,
/// and behind so the tail is covered likewise.
fn padded(x: &[f64], cfg: &StftConfig) -> (Vec<f64>, usize) {
    let front = cfg.window_length - cfg.hop;
    let frames = x.len().div_ceil(cfg.hop);
    let total = cfg.window_length + cfg.hop * frames;
    let mut v = vec![0.0; total];
    v[front..front + x.len()].copy_from_slice(x);
    (v, front)
}

fn reference_spec(x: &[f64], fs: u32, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let (v, _) = padded(x, cfg);
    stft(&MultiChannelWaveform::mono(v, fs)?, cfg)
}

/// Oracle ratio-mask estimate of the target on the reference channel.
///
/// `others` are the interfering components (other speakers, noise) on the
/// same channel. Output has the mixture's length.
pub fn oracle_separate_signal(mixture: &[f64], target: &[f64], others: &[&[f64]], fs: u32) -> Result<Vec<f64>> {
    let cfg = StftConfig::default();
    if target.len() != mixture.len() || others.iter().any(|o| o.len() != mixture.len()) {
        return Err(Error::validation("mixture and components must share one length"));
    }
    let mix = reference_spec(mixture, fs, &cfg)?;
    let tgt = reference_spec(target, fs, &cfg)?;
    let oth = others
        .iter()
        .map(|o| reference_spec(o, fs, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let oth_views: Vec<_> = oth.iter().map(|s| s.channel(0)).collect();
    let mask = oracle_irm(tgt.channel(0), &oth_views)?;
    let est = apply_mask(mix.channel(0), mask.view())?;
    let wave = istft(&ComplexSpectrogram::from_plane(est, cfg, fs)?, &cfg)?;
    let front = cfg.window_length - cfg.hop;
    Ok(wave.channel(0).slice(s![front..front + mixture.len()]).to_vec())
}

fn score(id: &str, est: &[f64], reference: &[f64], meta: &MixtureMetadata, rtf: Option<f64>) -> Result<ScoreRecord> {
    Ok(ScoreRecord {
        id: id.to_string(),
        si_sdr_db: si_sdr(est, reference)?,
        sdr_db: sdr_simple(est, reference)?,
        speaker_count: meta.speaker_count,
        angle_difference_deg: meta.angle_difference_deg,
        rtf,
    })
}

/// Oracle estimate plus scores of the estimate and of the unprocessed
/// mixture, both against the reverberant target on the reference channel.
pub fn oracle_separate_example(ex: &StoredExample) -> Result<(Vec<f64>, ScoreRecord, ScoreRecord, f64)> {
    let ch = REFERENCE_CHANNEL;
    let mix = ex.mixture.channel(ch).to_vec();
    let target = ex.sources[ex.meta.target_index].channel(ch).to_vec();
    let mut others: Vec<Vec<f64>> = ex
        .sources
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != ex.meta.target_index)
        .map(|(_, s)| s.channel(ch).to_vec())
        .collect();
    if let Some(n) = &ex.noise {
        others.push(n.channel(ch).to_vec());
    }
    let refs: Vec<&[f64]> = others.iter().map(Vec::as_slice).collect();
    let (est, rtf) = measure_rtf(
        || oracle_separate_signal(&mix, &target, &refs, ex.meta.sample_rate),
        ex.mixture.duration_secs(),
    )?;
    let est = est?;
    let id = &ex.meta.id;
    let est_score = score(id, &est, &target, &ex.meta, None)?;
    let mix_score = score(id, &mix, &target, &ex.meta, None)?;
    Ok((est, est_score, mix_score, rtf))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeparationOutcome {
    pub summary: StageSummary,
    pub scores: Vec<ScoreRecord>,
    pub mixture_scores: Vec<ScoreRecord>,
}

pub fn oracle_separate_dataset(dataset: &Path, out: &Path, timing: bool) -> Result<SeparationOutcome> {
    let index = DatasetIndex::load(dataset)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let results: Vec<_> = index
        .examples
        .par_iter()
        .map(|entry| {
            let r = load_example(dataset, entry).and_then(|ex| {
                let (est, s, m, rtf) = oracle_separate_example(&ex)?;
                let wave = MultiChannelWaveform::mono(est, ex.meta.sample_rate)?;
                let opts = WavWriteOptions {
                    clip: true,
                    ..WavWriteOptions::default()
                };
                write_wav(&out.join(format!("{}.wav", entry.id)), &wave, opts)?;
                Ok((s, m, rtf))
            });
            (entry.id.clone(), r)
        })
        .collect();
    let mut outcome = SeparationOutcome::default();
    let mut timings = BTreeMap::new();
    let mut flags = Vec::new();
    for (id, r) in results {
        match r {
            Ok((s, m, rtf)) => {
                outcome.scores.push(s);
                outcome.mixture_scores.push(m);
                timings.insert(id.clone(), rtf);
                flags.push((id, Ok(true)));
            }
            Err(e) => flags.push((id, Err(e))),
        }
    }
    outcome.summary = StageSummary::collect(flags);
    write_json(&out.join(SCORES_FILE), &outcome.scores)?;
    write_json(&out.join(MIXTURE_SCORES_FILE), &outcome.mixture_scores)?;
    if timing {
        write_json(&out.join(TIMING_FILE), &timings)?;
    }
    Ok(outcome)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutcome {
    pub report: BucketReport,
    pub records: Vec<ScoreRecord>,
    /// Estimates without a reference.
    pub unmatched_estimates: Vec<String>,
    /// References without an estimate.
    pub missing_estimates: Vec<String>,
    pub failures: Vec<ItemFailure>,
}

impl EvaluationOutcome {
    pub fn ok(&self) -> bool {
        self.unmatched_estimates.is_empty() && self.missing_estimates.is_empty() && self.failures.is_empty()
    }
}

fn wav_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "wav") && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Scores `<estimates>/<id>.wav` (channel 0) against the reverberant
/// target of the same id in `dataset`, and buckets the results.
pub fn evaluate(estimates: &Path, dataset: &Path) -> Result<EvaluationOutcome> {
    let index = DatasetIndex::load(dataset)?;
    let stems = wav_stems(estimates)?;
    let known: BTreeMap<&str, &IndexEntry> = index.examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let unmatched: Vec<String> = stems.iter().filter(|s| !known.contains_key(s.as_str())).cloned().collect();
    let missing: Vec<String> = index
        .examples
        .iter()
        .filter(|e| stems.binary_search(&e.id).is_err())
        .map(|e| e.id.clone())
        .collect();
    for id in &unmatched {
        log::warn!("{id}: estimate has no reference, excluded");
    }
    for id in &missing {
        log::warn!("{id}: reference has no estimate, excluded");
    }
    let matched: Vec<&IndexEntry> = stems.iter().filter_map(|s| known.get(s.as_str()).copied()).collect();
    if matched.is_empty() {
        return Err(Error::validation("no estimate matches a dataset example"));
    }
    let timing: BTreeMap<String, f64> = read_json(&estimates.join(TIMING_FILE)).unwrap_or_default();
    let results: Vec<(String, Result<ScoreRecord>)> = matched
        .par_iter()
        .map(|entry| {
            let r = (|| {
                let dir = dataset.join(&entry.dir);
                let meta: MixtureMetadata = read_json(&dir.join(META_FILE))?;
                let reference = read_wav(&dir.join(source_file(meta.target_index)))?;
                let est = read_wav(&estimates.join(format!("{}.wav", entry.id)))?;
                let r = reference.channel(REFERENCE_CHANNEL).to_vec();
                let e = est.channel(0).to_vec();
                score(&entry.id, &e, &r, &meta, timing.get(&entry.id).copied())
            })();
            (entry.id.clone(), r)
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(ItemFailure {
                id,
                error: e.to_string(),
            }),
        }
    }
    let report = bucket_report(&records)?;
    Ok(EvaluationOutcome {
        report,
        records,
        unmatched_estimates: unmatched,
        missing_estimates: missing,
        failures,
    })
}

/// Reads the three-row-block layout of a stacked feature matrix back into
/// `(lps, ipd rows, df)` views; a convenience for downstream readers.
pub fn split_stacked(stacked: &Array2<f64>, freqs: usize) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let rows = stacked.nrows();
    if freqs == 0 || !rows.is_multiple_of(freqs) || rows < 3 * freqs {
        return Err(Error::validation(format!("{rows} rows do not split into {freqs}-row blocks")));
    }
    Ok((
        stacked.slice(s![..freqs, ..]).to_owned(),
        stacked.slice(s![freqs..rows - freqs, ..]).to_owned(),
        stacked.slice(s![rows - freqs.., ..]).to_owned(),
    ))
}

pub fn path_list(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::synth::{write_synthetic_corpus, CorpusSpec};

    #[test]
    fn padding_covers_signal() {
        let cfg = StftConfig::default();
        for len in [1usize, 255, 256, 257, 1000, 16000] {
            let (v, front) = padded(&vec![1.0; len], &cfg);
            assert_eq!(front, 256);
            assert_eq!((v.len() - cfg.window_length) % cfg.hop, 0);
            assert!(v.len() - front - len >= cfg.window_length - cfg.hop);
        }
    }

    #[test]
    fn oracle_single_source_is_transparent() {
        let x: Vec<f64> = (0..8000).map(|n| ((n as f64) * 0.05).sin() * 0.3 + ((n as f64) * 0.31).cos() * 0.1).collect();
        let est = oracle_separate_signal(&x, &x, &[], 16000).unwrap();
        assert!(si_sdr(&est, &x).unwrap() > 40.0);
    }

    #[test]
    fn small_dataset_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let corpus = tmp.path().join("corpus");
        let spec = CorpusSpec {
            sources: 4,
            noises: 1,
            min_seconds: 1.0,
            max_seconds: 1.5,
            noise_seconds: 2.0,
            ..CorpusSpec::default()
        };
        let mut m = write_synthetic_corpus(&corpus, &spec, 2).unwrap();
        m.resolve_paths(&corpus);
        m.t60 = Range { lo: 0.2, hi: 0.3 };
        let data = tmp.path().join("data");
        let (index, summary) = simulate_dataset(&m, &data).unwrap();
        assert!(summary.ok());
        assert_eq!(index.examples.len(), 2);
        let (_, again) = simulate_dataset(&m, &data).unwrap();
        assert_eq!(again.skipped.len(), 2);

        let feats = tmp.path().join("feats");
        assert!(featurize_dataset(&data, &feats, &FeatureOptions::default()).unwrap().ok());
        let sidecar: FeatureSidecar = read_json(&feats.join("ex_000000").join(FEATURES_FILE)).unwrap();
        assert_eq!(sidecar.freqs * (sidecar.pairs + 2), 1799);

        let est = tmp.path().join("est");
        let outcome = oracle_separate_dataset(&data, &est, false).unwrap();
        assert!(outcome.summary.ok());
        let eval = evaluate(&est, &data).unwrap();
        assert!(eval.ok());
        assert_eq!(eval.records.len(), 2);
    }
}
