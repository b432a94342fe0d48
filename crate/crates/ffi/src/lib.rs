//! C ABI over the `mmtss` crate.
//!
//! Objects cross the boundary as opaque handles created by `*_new`,
//! `*_read_*` or computing functions and released with the matching
//! `*_free`. Every fallible call returns an [`MmtssStatus`]; on failure
//! the message is kept per thread and read with
//! [`mmtss_last_error_message`]. Panics are caught and reported as
//! `MMTSS_STATUS_PANIC`; they never unwind into C.
//!
//! Sample buffers are planar: channel 0 first, `len` samples per channel.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ndarray::{ArrayView2, ShapeBuilder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmtss::dsp::{istft, stft, ComplexSpectrogram, StftConfig};
use mmtss::fusion::{
    factorized_attention_forward, load_attention_params, rule_attention_weight, save_attention_params,
    FactorizedAttentionParams, RuleAttentionParams,
};
use mmtss::io::{read_wav, write_wav, SimulationManifest, WavWriteOptions};
use mmtss::metrics::si_sdr;
use mmtss::room::simulate_mixture;
use mmtss::spatial::{AcousticFeatures, ArrayGeometry};
use mmtss::{Error, MultiChannelWaveform};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmtssStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

pub struct MmtssWaveform {
    inner: MultiChannelWaveform,
}

pub struct MmtssSpectrogram {
    inner: ComplexSpectrogram,
}

pub struct MmtssAttention {
    inner: FactorizedAttentionParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MmtssStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => MmtssStatus::Io,
            Error::Format { .. } | Error::Unsupported { .. } | Error::Corruption(_) | Error::Json { .. } => {
                MmtssStatus::Format
            }
            _ => MmtssStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: MmtssStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MmtssStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MmtssStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            MmtssStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(MmtssStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(MmtssStatus::NullPointer, "path is null"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MmtssStatus::InvalidArgument, "path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(MmtssStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(fail(MmtssStatus::NullPointer, format!("{what} is null")));
    }
    if len < needed {
        return Err(fail(
            MmtssStatus::BufferTooSmall,
            format!("{what} holds {len} values, need {needed}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(MmtssStatus::NullPointer, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the buffer size needed for the
/// whole message, or 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mmtss_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = (bytes.len() - 1).min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mmtss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------- waveform

/// Builds a waveform from `channels * len` planar samples.
///
/// # Safety
/// `data` must point to `channels * len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_new(
    data: *const f64,
    channels: usize,
    len: usize,
    sample_rate: u32,
    out: *mut *mut MmtssWaveform,
) -> MmtssStatus {
    guard(|| {
        let total = channels
            .checked_mul(len)
            .ok_or_else(|| fail(MmtssStatus::InvalidArgument, "size overflow"))?;
        let samples = slice_arg(data, total, "data")?;
        let view = ArrayView2::from_shape((channels, len), samples)
            .map_err(|e| fail(MmtssStatus::InvalidArgument, e.to_string()))?;
        let inner = MultiChannelWaveform::new(view.to_owned(), sample_rate)?;
        store(out, MmtssWaveform { inner })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_read_wav(path: *const c_char, out: *mut *mut MmtssWaveform) -> MmtssStatus {
    guard(|| {
        let inner = read_wav(&path_arg(path)?)?;
        store(out, MmtssWaveform { inner })
    })
}

/// Writes 32-bit float WAV. Without `clip`, a peak above 1 is an error.
///
/// # Safety
/// `wave` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_write_wav(
    wave: *const MmtssWaveform,
    path: *const c_char,
    clip: bool,
) -> MmtssStatus {
    guard(|| {
        let w = deref(wave, "wave")?;
        let opts = WavWriteOptions {
            clip,
            ..WavWriteOptions::default()
        };
        write_wav(&path_arg(path)?, &w.inner, opts)?;
        Ok(())
    })
}

/// 0 for a null handle.
///
/// # Safety
/// `wave` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_channels(wave: *const MmtssWaveform) -> usize {
    wave.as_ref().map_or(0, |w| w.inner.channels())
}

/// Samples per channel; 0 for a null handle.
///
/// # Safety
/// `wave` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_len(wave: *const MmtssWaveform) -> usize {
    wave.as_ref().map_or(0, |w| w.inner.len())
}

/// # Safety
/// `wave` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_sample_rate(wave: *const MmtssWaveform) -> u32 {
    wave.as_ref().map_or(0, |w| w.inner.sample_rate())
}

/// Copies the planar samples into `dst`, which must hold `channels * len`.
///
/// # Safety
/// `wave` must be a live handle; `dst` must point to `dst_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_copy(wave: *const MmtssWaveform, dst: *mut f64, dst_len: usize) -> MmtssStatus {
    guard(|| {
        let w = deref(wave, "wave")?;
        let samples = w.inner.samples();
        let dst = out_slice(dst, dst_len, samples.len(), "dst")?;
        for (d, s) in dst.iter_mut().zip(samples.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// # Safety
/// `wave` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmtss_waveform_free(wave: *mut MmtssWaveform) {
    if !wave.is_null() {
        drop(Box::from_raw(wave));
    }
}

// ------------------------------------------------------------- spectrogram

/// STFT with the default 512-point sqrt-Hann window and hop 256.
///
/// # Safety
/// `wave` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_stft(wave: *const MmtssWaveform, out: *mut *mut MmtssSpectrogram) -> MmtssStatus {
    guard(|| {
        let w = deref(wave, "wave")?;
        let inner = stft(&w.inner, &StftConfig::default())?;
        store(out, MmtssSpectrogram { inner })
    })
}

/// Overlap-add inverse of [`mmtss_stft`].
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_istft(spec: *const MmtssSpectrogram, out: *mut *mut MmtssWaveform) -> MmtssStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        let inner = istft(&s.inner, s.inner.config())?;
        store(out, MmtssWaveform { inner })
    })
}

/// Writes channel, frame and bin counts; any pointer may be null.
///
/// # Safety
/// `spec` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_spectrogram_dims(
    spec: *const MmtssSpectrogram,
    channels: *mut usize,
    frames: *mut usize,
    freqs: *mut usize,
) -> MmtssStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        for (p, v) in [
            (channels, s.inner.channels()),
            (frames, s.inner.frames()),
            (freqs, s.inner.freqs()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies real and imaginary parts, `[channels, frames, freqs]` row-major.
///
/// # Safety
/// `spec` must be a live handle; `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mmtss_spectrogram_copy(
    spec: *const MmtssSpectrogram,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> MmtssStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        let bins = s.inner.bins();
        let re = out_slice(re, len, bins.len(), "re")?;
        let im = out_slice(im, len, bins.len(), "im")?;
        for ((r, i), c) in re.iter_mut().zip(im.iter_mut()).zip(bins.iter()) {
            *r = c.re;
            *i = c.im;
        }
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmtss_spectrogram_free(spec: *mut MmtssSpectrogram) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

// ---------------------------------------------------------------- features

/// Stacked LPS, IPD and DF matrix of a waveform recorded by the default
/// 9-microphone linear array, `[rows, frames]` row-major.
///
/// With `dst` null only `rows` and `cols` are written, so callers can size
/// the buffer first.
///
/// # Safety
/// `wave` must be a live handle; `rows` and `cols` writable; `dst` null or
/// holding `dst_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mmtss_features_stacked(
    wave: *const MmtssWaveform,
    target_theta_deg: f64,
    premask: bool,
    dst: *mut f64,
    dst_len: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> MmtssStatus {
    guard(|| {
        let w = deref(wave, "wave")?;
        if rows.is_null() || cols.is_null() {
            return Err(fail(MmtssStatus::NullPointer, "rows/cols is null"));
        }
        let geom = ArrayGeometry::default_linear(w.inner.sample_rate());
        let spec = stft(&w.inner, &StftConfig::default())?;
        let feats = AcousticFeatures::compute(&spec, &geom, target_theta_deg, premask)?;
        let stacked = feats.stacked();
        *rows = stacked.nrows();
        *cols = stacked.ncols();
        if dst.is_null() {
            return Ok(());
        }
        let out = out_slice(dst, dst_len, stacked.len(), "dst")?;
        for (d, s) in out.iter_mut().zip(stacked.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

// ----------------------------------------------------------------- metrics

/// SI-SDR in dB of `estimate` against `reference`, both `len` samples.
///
/// # Safety
/// Both inputs must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_si_sdr(
    estimate: *const f64,
    reference: *const f64,
    len: usize,
    out: *mut f64,
) -> MmtssStatus {
    guard(|| {
        let e = slice_arg(estimate, len, "estimate")?;
        let r = slice_arg(reference, len, "reference")?;
        if out.is_null() {
            return Err(fail(MmtssStatus::NullPointer, "out is null"));
        }
        *out = si_sdr(e, r)?;
        Ok(())
    })
}

/// Rule-gate weight for an inter-speaker angle in degrees. NaN stands for
/// a single-speaker mixture and yields 1.
#[no_mangle]
pub extern "C" fn mmtss_rule_attention_weight(angle_deg: f64, w: f64, b: f64) -> f64 {
    let ad = if angle_deg.is_nan() { None } else { Some(angle_deg) };
    rule_attention_weight(ad, RuleAttentionParams { w, b })
}

// --------------------------------------------------------------- attention

/// Gaussian-initialised factorized attention: `heads` subspaces of
/// `[input_dim x out_dim]` and a `[modality_dim x heads]` projection.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_attention_random(
    seed: u64,
    input_dim: usize,
    modality_dim: usize,
    heads: usize,
    out_dim: usize,
    out: *mut *mut MmtssAttention,
) -> MmtssStatus {
    guard(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = FactorizedAttentionParams::random(&mut rng, input_dim, modality_dim, heads, out_dim)?;
        store(out, MmtssAttention { inner })
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_attention_load(dir: *const c_char, out: *mut *mut MmtssAttention) -> MmtssStatus {
    guard(|| {
        let inner = load_attention_params(&path_arg(dir)?)?;
        store(out, MmtssAttention { inner })
    })
}

/// # Safety
/// `params` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmtss_attention_save(params: *const MmtssAttention, dir: *const c_char) -> MmtssStatus {
    guard(|| {
        let p = deref(params, "params")?;
        save_attention_params(&path_arg(dir)?, &p.inner)?;
        Ok(())
    })
}

/// Fused `[frames x out_dim]` output, row-major. `weights` (`[frames x
/// heads]`) may be null.
///
/// # Safety
/// `acoustic` holds `frames * input_dim` doubles, `modality` holds
/// `frames * modality_dim`; output buffers hold their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mmtss_attention_forward(
    params: *const MmtssAttention,
    acoustic: *const f64,
    modality: *const f64,
    frames: usize,
    fused: *mut f64,
    fused_len: usize,
    weights: *mut f64,
    weights_len: usize,
) -> MmtssStatus {
    guard(|| {
        let p = &deref(params, "params")?.inner;
        let (e, d) = (p.input_dim(), p.modality_dim());
        let a = slice_arg(acoustic, frames * e, "acoustic")?;
        let m = slice_arg(modality, frames * d, "modality")?;
        let shape = |cols: usize| (frames, cols).strides((cols, 1));
        let a = ArrayView2::from_shape(shape(e), a).map_err(|x| fail(MmtssStatus::InvalidArgument, x.to_string()))?;
        let m = ArrayView2::from_shape(shape(d), m).map_err(|x| fail(MmtssStatus::InvalidArgument, x.to_string()))?;
        let out = factorized_attention_forward(a, m, p)?;
        let dst = out_slice(fused, fused_len, out.fused.len(), "fused")?;
        for (x, v) in dst.iter_mut().zip(out.fused.iter()) {
            *x = *v;
        }
        if !weights.is_null() {
            let dst = out_slice(weights, weights_len, out.weights.len(), "weights")?;
            for (x, v) in dst.iter_mut().zip(out.weights.iter()) {
                *x = *v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmtss_attention_free(params: *mut MmtssAttention) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

// -------------------------------------------------------------- simulation

/// Simulates mixture `index` of the manifest at `manifest_path` and
/// returns the multi-channel mixture. Relative audio paths in the manifest
/// resolve against its directory.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmtss_simulate_mixture(
    manifest_path: *const c_char,
    index: u64,
    out: *mut *mut MmtssWaveform,
) -> MmtssStatus {
    guard(|| {
        let manifest = SimulationManifest::load(&path_arg(manifest_path)?)?;
        let ex = simulate_mixture(&manifest, index)?;
        store(out, MmtssWaveform { inner: ex.mixture })
    })
}
