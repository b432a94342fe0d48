//! Shoebox image-source room impulse responses.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{norm, sub, Vec3};
use crate::waveform::MultiChannelWaveform;

/// Half width of the windowed-sinc fractional delay; 81 taps in total.
const SINC_HALF_TAPS: i64 = 40;
/// Extra RIR length beyond the nominal T60, in samples.
pub const RIR_TAIL: usize = 4096;
/// Image shells quieter than this (relative to the direct path) are skipped.
const SHELL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub size: Vec3,
    pub t60: f64,
    pub sound_speed: f64,
}

impl RoomSpec {
    pub fn volume(&self) -> f64 {
        self.size.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.size;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] > 0.0 && p[i] < self.size[i])
    }

    pub fn wall_distance(&self, p: Vec3) -> f64 {
        (0..3)
            .map(|i| p[i].min(self.size[i] - p[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Uniform wall reflection coefficient from Sabine's formula.
///
/// `alpha = 0.161 V / (S T60)`, `beta = sqrt(1 - alpha)`.
pub fn t60_to_reflectivity(room: &RoomSpec) -> Result<f64> {
    if !(room.t60 > 0.0) || room.size.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::validation("room size and T60 must be positive"));
    }
    let alpha = 0.161 * room.volume() / (room.surface() * room.t60);
    if alpha >= 1.0 {
        return Err(Error::InfeasibleT60 {
            t60: room.t60,
            volume: room.volume(),
            alpha,
        });
    }
    Ok((1.0 - alpha).sqrt())
}

/// Geometry plus wall reflectivity: everything the image model needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShoeboxRoom {
    pub size: Vec3,
    pub reflectivity: f64,
    pub sound_speed: f64,
}

impl ShoeboxRoom {
    pub fn from_spec(spec: &RoomSpec) -> Result<Self> {
        Ok(Self {
            size: spec.size,
            reflectivity: t60_to_reflectivity(spec)?,
            sound_speed: spec.sound_speed,
        })
    }

    fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] > 0.0 && p[i] < self.size[i])
    }
}

/// RIR length used by the mixture simulator: `t60 * fs + 4096`.
pub fn rir_length(t60: f64, sample_rate: u32) -> usize {
    (t60 * sample_rate as f64).ceil() as usize + RIR_TAIL
}

/// Smallest image order whose loudest image falls below -60 dB of the
/// direct path, capped at `cap`.
pub fn auto_max_order(room: &ShoeboxRoom, direct_distance: f64, cap: usize) -> usize {
    let beta = room.reflectivity;
    let shortest = room.size.iter().copied().fold(f64::INFINITY, f64::min);
    for order in 1..=cap {
        // the first excluded images have >= order + 1 reflections and lie
        // >= order * L_min away
        let distance = (order as f64 * shortest).max(direct_distance);
        let level = beta.powi(order as i32 + 1) * direct_distance / distance;
        if level < SHELL_FLOOR {
            return order;
        }
    }
    cap
}

/// Adds a Hann-windowed sinc pulse of `amplitude` centred at fractional
/// sample `delay`.
fn add_fractional_impulse(out: &mut [f64], delay: f64, amplitude: f64) {
    let center = delay.round() as i64;
    let width = (SINC_HALF_TAPS + 1) as f64;
    // sin(pi (n - d)) alternates sign with n, so one sine serves all taps
    let base = center - SINC_HALF_TAPS;
    let s0 = (PI * (base as f64 - delay)).sin();
    // cos(pi x / width) advanced by a fixed angle per tap
    let step = PI / width;
    let (sin_step, cos_step) = step.sin_cos();
    let x0 = base as f64 - delay;
    let (mut sw, mut cw) = (PI * x0 / width).sin_cos();
    for k in 0..=(2 * SINC_HALF_TAPS) {
        let n = base + k;
        let x = x0 + k as f64;
        if n >= 0 && (n as usize) < out.len() {
            let sinc = if x.abs() < 1e-12 {
                1.0
            } else {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * s0 / (PI * x)
            };
            let window = 0.5 * (1.0 + cw);
            out[n as usize] += amplitude * window * sinc;
        }
        let c = cw * cos_step - sw * sin_step;
        sw = sw * cos_step + cw * sin_step;
        cw = c;
    }
}

/// Image-source RIR from `src` to `mic`.
///
/// Sums `beta^reflections / (4 pi dist)` at delay `dist / c * fs` over image
/// indices with every `|index| <= max_order`, then truncates to `length`.
pub fn simulate_rir(
    room: &ShoeboxRoom,
    src: Vec3,
    mic: Vec3,
    sample_rate: u32,
    max_order: usize,
    length: usize,
) -> Result<Vec<f64>> {
    if !room.contains(src) {
        return Err(Error::validation(format!("source {src:?} is outside the room")));
    }
    if !room.contains(mic) {
        return Err(Error::validation(format!("microphone {mic:?} is outside the room")));
    }
    if !(0.0..=1.0).contains(&room.reflectivity) {
        return Err(Error::validation("reflectivity must be in [0, 1]"));
    }
    let fs = sample_rate as f64;
    let c = room.sound_speed;
    let beta = room.reflectivity;
    let order = max_order as i64;
    let max_delay = (length as i64 + SINC_HALF_TAPS) as f64;
    let mut out = vec![0.0; length];

    // per axis: image p sits at p L + s (p even) or (p + 1) L - s (p odd)
    // after |p| wall reflections
    let axis_images = |axis: usize| -> Vec<(f64, i32)> {
        let l_dim = room.size[axis];
        (-order..=order)
            .map(|p| {
                let coord = if p % 2 == 0 {
                    p as f64 * l_dim + src[axis]
                } else {
                    (p + 1) as f64 * l_dim - src[axis]
                };
                (coord - mic[axis], p.abs() as i32)
            })
            .collect()
    };
    let (xs, ys, zs) = (axis_images(0), axis_images(1), axis_images(2));
    for &(dx, rx) in &xs {
        for &(dy, ry) in &ys {
            let dxy = dx * dx + dy * dy;
            for &(dz, rz) in &zs {
                let dist = (dxy + dz * dz).sqrt();
                let delay = dist / c * fs;
                if delay >= max_delay {
                    continue;
                }
                let refl = rx + ry + rz;
                let gain = if refl == 0 { 1.0 } else { beta.powi(refl) };
                if gain == 0.0 {
                    continue;
                }
                add_fractional_impulse(&mut out, delay, gain / (4.0 * PI * dist));
            }
        }
    }
    Ok(out)
}

/// Allen-Berkley 100 Hz high-pass, in place.
///
/// Every image adds a positive pulse, so the raw sum carries a slowly
/// growing low-frequency offset that lengthens the apparent decay.
pub fn highpass_rir(rir: &mut [f64], sample_rate: u32) {
    let w = 2.0 * PI * 100.0 / sample_rate as f64;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in rir.iter_mut() {
        let y0 = b1 * y1 + b2 * y2 + *v;
        *v = y0 + a1 * y1 + r1 * y2;
        y2 = y1;
        y1 = y0;
    }
}

/// [`simulate_rir`] followed by [`highpass_rir`]; the response used for
/// mixture synthesis.
pub fn room_response(
    room: &ShoeboxRoom,
    src: Vec3,
    mic: Vec3,
    sample_rate: u32,
    max_order: usize,
    length: usize,
) -> Result<Vec<f64>> {
    let mut h = simulate_rir(room, src, mic, sample_rate, max_order, length)?;
    highpass_rir(&mut h, sample_rate);
    Ok(h)
}

/// Linear convolution through a single zero-padded FFT.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v = vec![Complex64::new(0.0, 0.0); size];
        for (d, s) in v.iter_mut().zip(x) {
            d.re = *s;
        }
        v
    };
    let (mut fa, mut fb) = (pad(a), pad(b));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Convolves a mono source with one RIR per output channel.
///
/// Output length is `source length + RIR length - 1` (longest RIR).
pub fn apply_rir(wave: &MultiChannelWaveform, rirs: &[Vec<f64>]) -> Result<MultiChannelWaveform> {
    if rirs.is_empty() || rirs.iter().any(|r| r.is_empty()) {
        return Err(Error::validation("every channel needs a non-empty RIR"));
    }
    if wave.channels() != 1 {
        return Err(Error::validation("apply_rir expects a single-channel source"));
    }
    let src: Vec<f64> = wave.channel(0).to_vec();
    let len = src.len() + rirs.iter().map(Vec::len).max().unwrap() - 1;
    let rows: Vec<Vec<f64>> = rirs.par_iter().map(|r| fft_convolve(&src, r)).collect();
    let samples = Array2::from_shape_fn((rows.len(), len), |(c, n)| rows[c].get(n).copied().unwrap_or(0.0));
    MultiChannelWaveform::new(samples, wave.sample_rate())
}

/// Reverberation time from Schroeder backward integration, extrapolating
/// the -5 dB to -25 dB decay to 60 dB. `None` when the decay never
/// reaches -25 dB.
pub fn schroeder_t60(rir: &[f64], sample_rate: u32) -> Option<f64> {
    let mut edc = vec![0.0; rir.len()];
    let mut acc = 0.0;
    for (i, v) in rir.iter().enumerate().rev() {
        acc += v * v;
        edc[i] = acc;
    }
    let total = *edc.first()?;
    if !(total > 0.0) {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / total).max(1e-300).log10()).collect();
    let start = db.iter().position(|&d| d <= -5.0)?;
    let end = db.iter().position(|&d| d <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    // least-squares line through the decay segment
    let n = (end - start + 1) as f64;
    let fs = sample_rate as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in db.iter().enumerate().take(end + 1).skip(start) {
        let x = i as f64 / fs;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope < 0.0).then(|| -60.0 / slope)
}

/// Fractional sample index of the strongest peak within `radius` samples of
/// `expected`, refined by parabolic interpolation.
pub fn peak_near(rir: &[f64], expected: f64, radius: usize) -> Option<f64> {
    let lo = (expected - radius as f64).floor().max(0.0) as usize;
    let hi = ((expected + radius as f64).ceil() as usize).min(rir.len().checked_sub(1)?);
    let (idx, _) = (lo..=hi)
        .map(|i| (i, rir[i].abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if idx == 0 || idx + 1 >= rir.len() {
        return Some(idx as f64);
    }
    let (a, b, c) = (rir[idx - 1].abs(), rir[idx].abs(), rir[idx + 1].abs());
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-300 { 0.5 * (a - c) / denom } else { 0.0 };
    Some(idx as f64 + shift.clamp(-0.5, 0.5))
}

#[allow(dead_code)]
pub(crate) fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn room(beta: f64) -> ShoeboxRoom {
        ShoeboxRoom {
            size: [5.0, 4.0, 3.0],
            reflectivity: beta,
            sound_speed: 343.0,
        }
    }

    #[test]
    fn sabine_reference_room() {
        let spec = RoomSpec {
            size: [5.0, 4.0, 3.0],
            t60: 0.3,
            sound_speed: 343.0,
        };
        assert_eq!(spec.volume(), 60.0);
        assert_eq!(spec.surface(), 94.0);
        let beta = t60_to_reflectivity(&spec).unwrap();
        let alpha = 0.161 * 60.0 / (94.0 * 0.3);
        assert_abs_diff_eq!(alpha, 0.34255, epsilon = 1e-5);
        assert_abs_diff_eq!(beta, 0.81083, epsilon = 1e-5);
    }

    #[test]
    fn long_t60_approaches_full_reflection() {
        let spec = RoomSpec {
            size: [5.0, 4.0, 3.0],
            t60: 1e9,
            sound_speed: 343.0,
        };
        assert!(t60_to_reflectivity(&spec).unwrap() > 0.999_999);
    }

    #[test]
    fn short_t60_is_infeasible() {
        let spec = RoomSpec {
            size: [4.0, 4.0, 2.5],
            t60: 0.05,
            sound_speed: 343.0,
        };
        match t60_to_reflectivity(&spec) {
            Err(Error::InfeasibleT60 { alpha, .. }) => assert_abs_diff_eq!(alpha, 6.44 / 3.6, epsilon = 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn direct_path_only() {
        let r = room(0.8);
        let src = [1.0, 2.0, 1.5];
        let mic = [2.715, 2.0, 1.5];
        let h = simulate_rir(&r, src, mic, 16000, 0, 400).unwrap();
        let peak = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert_eq!(peak.0, 80);
        assert_abs_diff_eq!(*peak.1, 1.0 / (4.0 * PI * 1.715), epsilon = 1e-12);
        // integer delay: every other tap is an exact sinc zero
        let nonzero = h.iter().filter(|v| v.abs() > 1e-12).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn absorbing_walls_match_direct_path() {
        let src = [1.2, 0.7, 1.1];
        let mic = [3.3, 2.9, 1.6];
        let anechoic = simulate_rir(&room(0.0), src, mic, 16000, 5, 2000).unwrap();
        let direct = simulate_rir(&room(0.9), src, mic, 16000, 0, 2000).unwrap();
        assert_eq!(anechoic, direct);
    }

    #[test]
    fn fractional_delay_peak() {
        let src = [1.0, 2.0, 1.5];
        let mic = [2.5337, 2.1, 1.4];
        let d = distance(src, mic) / 343.0 * 16000.0;
        let h = simulate_rir(&room(0.7), src, mic, 16000, 3, 4000).unwrap();
        let p = peak_near(&h, d, 3).unwrap();
        assert!((p - d).abs() <= 0.5, "{p} vs {d}");
    }

    #[test]
    fn highpass_blocks_dc() {
        let mut h = vec![1.0; 16000];
        highpass_rir(&mut h, 16000);
        assert!(h[15999].abs() < 1e-6);
        let mut imp = vec![0.0; 8];
        imp[0] = 0.25;
        highpass_rir(&mut imp, 16000);
        assert_eq!(imp[0], 0.25);
    }

    #[test]
    fn outside_room_rejected() {
        assert!(simulate_rir(&room(0.5), [6.0, 1.0, 1.0], [1.0, 1.0, 1.0], 16000, 1, 100).is_err());
        assert!(simulate_rir(&room(0.5), [1.0, 1.0, 1.0], [1.0, -1.0, 1.0], 16000, 1, 100).is_err());
    }

    #[test]
    fn identity_and_shift_kernels() {
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.3).sin()).collect();
        let w = MultiChannelWaveform::mono(x.clone(), 16000).unwrap();
        let mut shifted = vec![0.0; 8];
        shifted[5] = 1.0;
        let y = apply_rir(&w, &[vec![1.0], shifted]).unwrap();
        assert_eq!(y.channels(), 2);
        assert_eq!(y.len(), 300 + 8 - 1);
        for (n, v) in x.iter().enumerate() {
            assert_abs_diff_eq!(y.samples()[[0, n]], v, epsilon = 1e-12);
            assert_abs_diff_eq!(y.samples()[[1, n + 5]], v, epsilon = 1e-12);
        }
        for n in 0..5 {
            assert_abs_diff_eq!(y.samples()[[1, n]], 0.0, epsilon = 1e-12);
        }
        assert!(apply_rir(&w, &[vec![]]).is_err());
        assert!(apply_rir(&w, &[]).is_err());
    }

    #[test]
    fn order_search_is_capped() {
        let r = room(0.99);
        assert_eq!(auto_max_order(&r, 2.0, 12), 12);
        let r = room(0.3);
        assert!(auto_max_order(&r, 2.0, 12) < 5);
    }

    #[test]
    fn schroeder_on_synthetic_exponential() {
        let fs = 16000;
        let t60 = 0.5;
        // amplitude decays 60 dB over t60
        let h: Vec<f64> = (0..fs)
            .map(|n| {
                let t = n as f64 / fs as f64;
                let sign = if (n * 7919) % 13 < 6 { 1.0 } else { -1.0 };
                sign * 10f64.powf(-3.0 * t / t60)
            })
            .collect();
        let est = schroeder_t60(&h, fs as u32).unwrap();
        assert!((est - t60).abs() < 0.02, "{est}");
    }
}
