use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mmtss_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { mmtss_last_error_message(buf.as_mut_ptr(), buf.len()) };
    if n == 0 {
        return String::new();
    }
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn waveform(data: &[f64], channels: usize, fs: u32) -> *mut MmtssWaveform {
    let mut w = ptr::null_mut();
    let st = unsafe { mmtss_waveform_new(data.as_ptr(), channels, data.len() / channels, fs, &mut w) };
    assert_eq!(st, MmtssStatus::Ok, "{}", last_error());
    w
}

fn signal(channels: usize, len: usize) -> Vec<f64> {
    (0..channels * len).map(|i| ((i as f64) * 0.013).sin() * 0.4 + ((i as f64) * 0.17).cos() * 0.1).collect()
}

#[test]
fn stft_round_trip_through_handles() {
    let x = signal(3, 5000);
    let w = waveform(&x, 3, 16000);
    let mut s = ptr::null_mut();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(mmtss_stft(w, &mut s), MmtssStatus::Ok);
        let (mut c, mut t, mut f) = (0, 0, 0);
        assert_eq!(mmtss_spectrogram_dims(s, &mut c, &mut t, &mut f), MmtssStatus::Ok);
        assert_eq!((c, t, f), (3, (5000 - 512) / 256 + 1, 257));
        let mut re = vec![0.0; c * t * f];
        let mut im = vec![0.0; c * t * f];
        assert_eq!(mmtss_spectrogram_copy(s, re.as_mut_ptr(), im.as_mut_ptr(), re.len()), MmtssStatus::Ok);
        assert_eq!(mmtss_istft(s, &mut r), MmtssStatus::Ok);
        let len = mmtss_waveform_len(r);
        let mut y = vec![0.0; 3 * len];
        assert_eq!(mmtss_waveform_copy(r, y.as_mut_ptr(), y.len()), MmtssStatus::Ok);
        for ch in 0..3 {
            for n in 512..len - 512 {
                assert!((y[ch * len + n] - x[ch * 5000 + n]).abs() < 1e-9);
            }
        }
        mmtss_waveform_free(r);
        mmtss_spectrogram_free(s);
        mmtss_waveform_free(w);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut w = ptr::null_mut();
    unsafe {
        assert_eq!(mmtss_waveform_new(ptr::null(), 1, 10, 16000, &mut w), MmtssStatus::NullPointer);
        assert!(last_error().contains("null"));
        let nan = [f64::NAN; 4];
        assert_eq!(mmtss_waveform_new(nan.as_ptr(), 1, 4, 16000, &mut w), MmtssStatus::InvalidArgument);
        assert!(w.is_null());
        let missing = CString::new("/nonexistent/x.wav").unwrap();
        assert_eq!(mmtss_waveform_read_wav(missing.as_ptr(), &mut w), MmtssStatus::Io);

        let x = signal(1, 100);
        let ok = waveform(&x, 1, 16000);
        let mut small = [0.0; 10];
        assert_eq!(mmtss_waveform_copy(ok, small.as_mut_ptr(), small.len()), MmtssStatus::BufferTooSmall);
        assert_eq!(mmtss_waveform_channels(ok), 1);
        assert_eq!(mmtss_waveform_channels(ptr::null()), 0);
        mmtss_waveform_free(ok);
        mmtss_waveform_free(ptr::null_mut());
    }
    // success clears the message
    let x = signal(1, 100);
    let ok = waveform(&x, 1, 16000);
    assert_eq!(last_error(), "");
    unsafe { mmtss_waveform_free(ok) };
}

#[test]
fn truncated_error_buffer() {
    let mut w = ptr::null_mut();
    unsafe { mmtss_waveform_new(ptr::null(), 1, 10, 16000, &mut w) };
    let mut buf = [0x7f as c_char; 5];
    let needed = unsafe { mmtss_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(needed > 5);
    assert_eq!(buf[4], 0);
}

#[test]
fn stacked_features_query_then_fill() {
    let x = signal(9, 8000);
    let w = waveform(&x, 9, 16000);
    let (mut rows, mut cols) = (0, 0);
    unsafe {
        let st = mmtss_features_stacked(w, 60.0, false, ptr::null_mut(), 0, &mut rows, &mut cols);
        assert_eq!(st, MmtssStatus::Ok);
        assert_eq!(rows, 1799);
        let mut buf = vec![f64::NAN; rows * cols];
        let st = mmtss_features_stacked(w, 60.0, true, buf.as_mut_ptr(), buf.len(), &mut rows, &mut cols);
        assert_eq!(st, MmtssStatus::Ok);
        assert!(buf.iter().all(|v| v.is_finite()));
        mmtss_waveform_free(w);
    }
}

#[test]
fn metrics_and_gate() {
    let r: Vec<f64> = (0..1000).map(|n| (n as f64 * 0.1).sin()).collect();
    let e: Vec<f64> = r.iter().map(|v| v * 3.0).collect();
    let mut out = 0.0;
    assert_eq!(unsafe { mmtss_si_sdr(e.as_ptr(), r.as_ptr(), r.len(), &mut out) }, MmtssStatus::Ok);
    assert_eq!(out, 60.0);
    let z = vec![0.0; 1000];
    assert_eq!(
        unsafe { mmtss_si_sdr(e.as_ptr(), z.as_ptr(), z.len(), &mut out) },
        MmtssStatus::InvalidArgument
    );
    assert!((mmtss_rule_attention_weight(0.0, -0.5, 10.0) - 0.986614).abs() < 1e-6);
    assert_eq!(mmtss_rule_attention_weight(20.0, -0.5, 10.0), 0.0);
    assert_eq!(mmtss_rule_attention_weight(f64::NAN, -0.5, 10.0), 1.0);
}

#[test]
fn attention_forward_and_persistence() {
    let dir = tempfile_dir();
    let (t, e, d, h, p) = (5, 4, 3, 2, 6);
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(mmtss_attention_random(7, e, d, h, p, &mut a), MmtssStatus::Ok);
        let cdir = CString::new(dir.to_str().unwrap()).unwrap();
        assert_eq!(mmtss_attention_save(a, cdir.as_ptr()), MmtssStatus::Ok);
        assert_eq!(mmtss_attention_load(cdir.as_ptr(), &mut b), MmtssStatus::Ok);
        let ac: Vec<f64> = (0..t * e).map(|i| (i as f64 * 0.7).sin()).collect();
        let md: Vec<f64> = (0..t * d).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut f1 = vec![0.0; t * p];
        let mut f2 = vec![0.0; t * p];
        let mut wts = vec![0.0; t * h];
        let st = mmtss_attention_forward(a, ac.as_ptr(), md.as_ptr(), t, f1.as_mut_ptr(), f1.len(), wts.as_mut_ptr(), wts.len());
        assert_eq!(st, MmtssStatus::Ok);
        let st = mmtss_attention_forward(b, ac.as_ptr(), md.as_ptr(), t, f2.as_mut_ptr(), f2.len(), ptr::null_mut(), 0);
        assert_eq!(st, MmtssStatus::Ok);
        assert_eq!(f1, f2);
        for row in wts.chunks(h) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        mmtss_attention_free(a);
        mmtss_attention_free(b);
    }
    std::fs::remove_dir_all(dir).ok();
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("mmtss-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn target_dir() -> PathBuf {
    // tests/<name> binaries live in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let lib = target_dir().join("libmmtss_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.is_file() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile_dir().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "C smoke exited with {:?}", run.status);
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
