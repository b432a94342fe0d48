//! Spectral, spatial and directional features of a multi-channel
//! spectrogram, plus array-geometry angle helpers.
//!
//! Angles follow the line-array convention: `theta` is measured from the
//! positive array axis, so 0 deg is endfire and 90 deg is broadside.

use std::f64::consts::PI;

use ndarray::{concatenate, s, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};

pub const LPS_FLOOR: f64 = 1e-8;

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Zero-based microphone pair `(first, second)`; IPD is `angle(first) - angle(second)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicPair(pub usize, pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub positions: Vec<Vec3>,
    pub pairs: Vec<MicPair>,
    /// Unit vector of the line array.
    pub axis: Vec3,
    pub sound_speed: f64,
    pub sample_rate: u32,
}

impl ArrayGeometry {
    /// Gaps between neighbouring microphones of the default 9-element array, metres.
    pub const DEFAULT_GAPS: [f64; 8] = [0.04, 0.03, 0.02, 0.01, 0.01, 0.02, 0.03, 0.04];
    /// Pairs (1,9), (1,5), (2,5), (5,7), (5,6) in zero-based form.
    pub const DEFAULT_PAIRS: [MicPair; 5] = [
        MicPair(0, 8),
        MicPair(0, 4),
        MicPair(1, 4),
        MicPair(4, 6),
        MicPair(4, 5),
    ];

    pub fn new(
        positions: Vec<Vec3>,
        pairs: Vec<MicPair>,
        axis: Vec3,
        sound_speed: f64,
        sample_rate: u32,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::validation("array needs at least one microphone"));
        }
        let len = norm(axis);
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::validation("array axis must be a non-zero vector"));
        }
        let axis = [axis[0] / len, axis[1] / len, axis[2] / len];
        if !(sound_speed > 0.0) || sample_rate == 0 {
            return Err(Error::validation("sound speed and sample rate must be positive"));
        }
        for &MicPair(a, b) in &pairs {
            if a >= positions.len() || b >= positions.len() {
                return Err(Error::validation(format!(
                    "pair ({a}, {b}) out of range for {} microphones",
                    positions.len()
                )));
            }
            if a == b {
                return Err(Error::validation(format!("pair ({a}, {b}) repeats a microphone")));
            }
        }
        Ok(Self {
            positions,
            pairs,
            axis,
            sound_speed,
            sample_rate,
        })
    }

    /// The 9-element non-uniform line array centred at the origin along +x.
    ///
    /// Microphone 1 sits at +0.10 m and microphone 9 at -0.10 m, so every
    /// default pair `(m1, m2)` has `m1` further along the axis than `m2`.
    pub fn default_linear(sample_rate: u32) -> Self {
        Self::linear_at([0.0; 3], [1.0, 0.0, 0.0], sample_rate)
    }

    /// Default layout centred on `center`, oriented along `axis`.
    pub fn linear_at(center: Vec3, axis: Vec3, sample_rate: u32) -> Self {
        let len = norm(axis);
        let axis = [axis[0] / len, axis[1] / len, axis[2] / len];
        let total: f64 = Self::DEFAULT_GAPS.iter().sum();
        let mut offset = total / 2.0;
        let mut positions = Vec::with_capacity(9);
        positions.push(offset);
        for g in Self::DEFAULT_GAPS {
            offset -= g;
            positions.push(offset);
        }
        let positions = positions
            .into_iter()
            .map(|o| {
                [
                    center[0] + o * axis[0],
                    center[1] + o * axis[1],
                    center[2] + o * axis[2],
                ]
            })
            .collect();
        Self::new(
            positions,
            Self::DEFAULT_PAIRS.to_vec(),
            axis,
            crate::io::manifest::defaults::SOUND_SPEED,
            sample_rate,
        )
        .expect("default geometry is valid")
    }

    pub fn mic_count(&self) -> usize {
        self.positions.len()
    }

    pub fn center(&self) -> Vec3 {
        let n = self.positions.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for i in 0..3 {
                c[i] += p[i] / n;
            }
        }
        c
    }

    /// Euclidean distance between the microphones of each pair.
    pub fn spacings(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&MicPair(a, b)| norm(sub(self.positions[a], self.positions[b])))
            .collect()
    }

    /// Signed pair baseline along the axis, `(p_m1 - p_m2) . axis`.
    pub fn axial_offsets(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&MicPair(a, b)| dot(sub(self.positions[a], self.positions[b]), self.axis))
            .collect()
    }
}

/// Feature arrays. 2-D maps are `[frames, freqs]`; IPD is `[pairs, frames, freqs]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Lps(Array2<f64>),
    Ipd(Array3<f64>),
    Df(Array2<f64>),
}

impl FeatureMap {
    pub fn kind(&self) -> &'static str {
        match self {
            FeatureMap::Lps(_) => "lps",
            FeatureMap::Ipd(_) => "ipd",
            FeatureMap::Df(_) => "df",
        }
    }

    pub fn as_2d(&self) -> Option<&Array2<f64>> {
        match self {
            FeatureMap::Lps(a) | FeatureMap::Df(a) => Some(a),
            FeatureMap::Ipd(_) => None,
        }
    }

    pub fn as_ipd(&self) -> Option<&Array3<f64>> {
        match self {
            FeatureMap::Ipd(a) => Some(a),
            _ => None,
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Log power spectrum of the reference (first) channel.
pub fn compute_lps(spec: &ComplexSpectrogram) -> FeatureMap {
    FeatureMap::Lps(spec.channel(0).mapv(|c| (c.norm_sqr() + LPS_FLOOR).ln()))
}

pub fn compute_ipd(spec: &ComplexSpectrogram, geom: &ArrayGeometry) -> Result<FeatureMap> {
    let channels = spec.channels();
    if let Some(&MicPair(a, b)) = geom.pairs.iter().find(|p| p.0 >= channels || p.1 >= channels) {
        return Err(Error::validation(format!(
            "pair ({a}, {b}) needs more than {channels} channels"
        )));
    }
    let (t, f) = (spec.frames(), spec.freqs());
    let mut out = Array3::zeros((geom.pairs.len(), t, f));
    for (m, &MicPair(a, b)) in geom.pairs.iter().enumerate() {
        let (ya, yb) = (spec.channel(a), spec.channel(b));
        let mut plane = out.index_axis_mut(Axis(0), m);
        ndarray::Zip::from(&mut plane)
            .and(&ya)
            .and(&yb)
            .for_each(|o, p, q| *o = wrap_phase(p.arg() - q.arg()));
    }
    Ok(FeatureMap::Ipd(out))
}

/// Plane-wave phase delay per pair and bin, `[pairs, freqs]`.
///
/// `TPD_f = 2 pi f_hz d_m cos(theta) / c` with `f_hz = f fs / fft_size` and
/// `d_m` the signed axial baseline of pair `m`.
pub fn compute_tpd(geom: &ArrayGeometry, theta_deg: f64, freqs: usize) -> Result<Array2<f64>> {
    if !(0.0..=180.0).contains(&theta_deg) {
        return Err(Error::validation(format!("theta {theta_deg} outside [0, 180]")));
    }
    if freqs < 2 {
        return Err(Error::validation("need at least two frequency bins"));
    }
    let fft_size = 2 * (freqs - 1);
    let cos = theta_deg.to_radians().cos();
    let offsets = geom.axial_offsets();
    Ok(Array2::from_shape_fn((offsets.len(), freqs), |(m, f)| {
        let hz = f as f64 * geom.sample_rate as f64 / fft_size as f64;
        2.0 * PI * hz * offsets[m] * cos / geom.sound_speed
    }))
}

/// Directional feature: summed cosine similarity of observed IPD and TPD.
pub fn compute_df(ipd: &FeatureMap, tpd: &Array2<f64>) -> Result<FeatureMap> {
    let ipd = ipd
        .as_ipd()
        .ok_or_else(|| Error::validation("compute_df needs an IPD feature map"))?;
    let (m, t, f) = ipd.dim();
    if tpd.dim() != (m, f) {
        return Err(Error::validation(format!(
            "TPD shape {:?} does not match IPD pairs/bins ({m}, {f})",
            tpd.dim()
        )));
    }
    let mut df = Array2::zeros((t, f));
    for pair in 0..m {
        let plane = ipd.index_axis(Axis(0), pair);
        let row = tpd.row(pair);
        for ((ti, fi), v) in df.indexed_iter_mut() {
            *v += (row[fi] - plane[[ti, fi]]).cos();
        }
    }
    Ok(FeatureMap::Df(df))
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Zeroes DF values strictly below the utterance median.
pub fn premask_df(df: &FeatureMap) -> Result<FeatureMap> {
    let FeatureMap::Df(values) = df else {
        return Err(Error::validation("pre-masking applies to DF maps only"));
    };
    if values.is_empty() {
        return Ok(df.clone());
    }
    let flat: Vec<f64> = values.iter().copied().collect();
    let floor = median(&flat);
    Ok(FeatureMap::Df(values.mapv(|v| if v < floor { 0.0 } else { v })))
}

pub fn source_angle(geom: &ArrayGeometry, source: Vec3) -> Result<f64> {
    let dir = sub(source, geom.center());
    let len = norm(dir);
    if !(len > 1e-12) {
        return Err(Error::validation("source coincides with the array centre"));
    }
    let cos = (dot(dir, geom.axis) / len).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Smallest absolute angle between the target and any interferer; `None`
/// for a single-speaker mixture.
pub fn angle_difference(target_deg: f64, interferers_deg: &[f64]) -> Option<f64> {
    interferers_deg
        .iter()
        .map(|i| (target_deg - i).abs())
        .min_by(|a, b| a.total_cmp(b))
}

/// All acoustic features of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFeatures {
    pub lps: Array2<f64>,
    pub ipd: Array3<f64>,
    pub df: Array2<f64>,
}

impl AcousticFeatures {
    pub fn compute(
        spec: &ComplexSpectrogram,
        geom: &ArrayGeometry,
        target_theta_deg: f64,
        premask: bool,
    ) -> Result<Self> {
        let lps = compute_lps(spec);
        let ipd = compute_ipd(spec, geom)?;
        let tpd = compute_tpd(geom, target_theta_deg, spec.freqs())?;
        let mut df = compute_df(&ipd, &tpd)?;
        if premask {
            df = premask_df(&df)?;
        }
        let (FeatureMap::Lps(lps), FeatureMap::Ipd(ipd), FeatureMap::Df(df)) = (lps, ipd, df) else {
            unreachable!()
        };
        Ok(Self { lps, ipd, df })
    }

    pub fn freqs(&self) -> usize {
        self.lps.ncols()
    }

    pub fn frames(&self) -> usize {
        self.lps.nrows()
    }

    /// Stacked `[(2 + pairs) * F, T]` matrix: LPS, IPD pairs in order, DF.
    pub fn stacked(&self) -> Array2<f64> {
        let mut blocks = vec![self.lps.t()];
        for m in 0..self.ipd.dim().0 {
            blocks.push(self.ipd.index_axis(Axis(0), m).reversed_axes());
        }
        blocks.push(self.df.t());
        concatenate(Axis(0), &blocks).expect("feature blocks share the frame axis")
    }

    /// Row range of the spatial (IPD and DF) part of [`Self::stacked`].
    pub fn spatial_rows(&self) -> std::ops::Range<usize> {
        let f = self.freqs();
        f..f * (self.ipd.dim().0 + 2)
    }
}

/// Scales the spatial rows of a stacked feature matrix, leaving LPS untouched.
pub fn gate_stacked(stacked: &mut Array2<f64>, freqs: usize, weight: f64) {
    stacked.slice_mut(s![freqs.., ..]).mapv_inplace(|v| v * weight);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftConfig;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn spec_from(planes: Vec<Array2<Complex64>>) -> ComplexSpectrogram {
        let views: Vec<_> = planes.iter().map(|p| p.view().insert_axis(Axis(0))).collect();
        let bins = concatenate(Axis(0), &views).unwrap();
        ComplexSpectrogram::new(bins, StftConfig::default(), 16000).unwrap()
    }

    #[test]
    fn default_geometry_spacings() {
        let g = ArrayGeometry::default_linear(16000);
        assert_eq!(g.mic_count(), 9);
        let expect = [0.20, 0.10, 0.06, 0.03, 0.01];
        for (s, e) in g.spacings().iter().zip(expect) {
            assert_abs_diff_eq!(*s, e, epsilon = 1e-9);
        }
        for (s, o) in g.spacings().iter().zip(g.axial_offsets()) {
            assert_abs_diff_eq!(*s, o, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(norm(g.center()), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bad_pairs_rejected() {
        let pos = vec![[0.0; 3], [0.1, 0.0, 0.0]];
        assert!(ArrayGeometry::new(pos.clone(), vec![MicPair(0, 2)], [1.0, 0.0, 0.0], 343.0, 16000).is_err());
        assert!(ArrayGeometry::new(pos, vec![MicPair(1, 1)], [1.0, 0.0, 0.0], 343.0, 16000).is_err());
    }

    #[test]
    fn lps_unit_and_zero() {
        let ones = Array2::from_elem((3, 257), Complex64::new(0.6, 0.8));
        let FeatureMap::Lps(l) = compute_lps(&spec_from(vec![ones])) else { panic!() };
        assert!(l.iter().all(|v| (v - (1.0 + LPS_FLOOR).ln()).abs() < 1e-15));
        let zeros = Array2::from_elem((3, 257), Complex64::new(0.0, 0.0));
        let FeatureMap::Lps(l) = compute_lps(&spec_from(vec![zeros])) else { panic!() };
        assert!(l.iter().all(|v| (v - (-18.420680743952367)).abs() < 1e-12));
    }

    #[test]
    fn lps_doubling_adds_ln4() {
        let a = Array2::from_shape_fn((4, 257), |(t, f)| Complex64::new(1.0 + t as f64, f as f64 * 0.1));
        let FeatureMap::Lps(l1) = compute_lps(&spec_from(vec![a.clone()])) else { panic!() };
        let FeatureMap::Lps(l2) = compute_lps(&spec_from(vec![a.mapv(|c| c * 2.0)])) else { panic!() };
        for (x, y) in l1.iter().zip(l2.iter()) {
            assert_abs_diff_eq!(y - x, 4f64.ln(), epsilon = 1e-7);
        }
    }

    #[test]
    fn identical_channels_zero_ipd() {
        let a = Array2::from_shape_fn((4, 257), |(t, f)| Complex64::from_polar(1.0, (t * f) as f64));
        let spec = spec_from(vec![a; 9]);
        let g = ArrayGeometry::default_linear(16000);
        let FeatureMap::Ipd(ipd) = compute_ipd(&spec, &g).unwrap() else { panic!() };
        assert_eq!(ipd.dim(), (5, 4, 257));
        assert!(ipd.iter().all(|&v| v == 0.0));
        let tpd = compute_tpd(&g, 90.0, 257).unwrap();
        let FeatureMap::Df(df) = compute_df(&FeatureMap::Ipd(ipd), &tpd).unwrap() else { panic!() };
        assert!(df.iter().all(|&v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn ipd_out_of_range_pair() {
        let a = Array2::from_elem((2, 257), Complex64::new(1.0, 0.0));
        let spec = spec_from(vec![a; 3]);
        assert!(compute_ipd(&spec, &ArrayGeometry::default_linear(16000)).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_abs_diff_eq!(wrap_phase(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(-7.0), -7.0 + 2.0 * PI, epsilon = 1e-15);
    }

    #[test]
    fn tpd_values() {
        let g = ArrayGeometry::default_linear(16000);
        let tpd = compute_tpd(&g, 90.0, 257).unwrap();
        assert!(tpd.iter().all(|v| v.abs() < 1e-12));
        let tpd = compute_tpd(&g, 0.0, 257).unwrap();
        // pair (1,5) has a 0.10 m baseline; bin 32 is 1 kHz
        assert_abs_diff_eq!(tpd[[1, 32]], 2.0 * PI * 1000.0 * 0.10 / 343.0, epsilon = 1e-9);
        assert_abs_diff_eq!(tpd[[1, 32]], 1.8319, epsilon = 1e-4);
        for f in 0..257 {
            assert_abs_diff_eq!(tpd[[0, f]], f as f64 * tpd[[0, 1]], epsilon = 1e-9);
        }
        assert!(compute_tpd(&g, 181.0, 257).is_err());
    }

    #[test]
    fn df_shape_mismatch() {
        let ipd = FeatureMap::Ipd(Array3::zeros((5, 2, 257)));
        assert!(compute_df(&ipd, &Array2::zeros((4, 257))).is_err());
        assert!(compute_df(&FeatureMap::Df(Array2::zeros((2, 257))), &Array2::zeros((5, 257))).is_err());
    }

    #[test]
    fn premask_cases() {
        let df = FeatureMap::Df(Array2::from_shape_vec((1, 4), vec![5.0, 5.0, -5.0, -5.0]).unwrap());
        let FeatureMap::Df(out) = premask_df(&df).unwrap() else { panic!() };
        assert_eq!(out.as_slice().unwrap(), &[5.0, 5.0, 0.0, 0.0]);

        let flat = FeatureMap::Df(Array2::from_elem((2, 3), -1.5));
        assert_eq!(premask_df(&flat).unwrap(), flat);

        let neg = FeatureMap::Df(Array2::from_shape_vec((1, 3), vec![-3.0, -1.0, -2.0]).unwrap());
        let FeatureMap::Df(out) = premask_df(&neg).unwrap() else { panic!() };
        assert_eq!(out.as_slice().unwrap(), &[0.0, -1.0, -2.0]);

        assert!(premask_df(&FeatureMap::Lps(Array2::zeros((1, 1)))).is_err());
    }

    #[test]
    fn angles() {
        let g = ArrayGeometry::default_linear(16000);
        assert_abs_diff_eq!(source_angle(&g, [2.0, 0.0, 0.0]).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(source_angle(&g, [0.0, 2.0, 0.0]).unwrap(), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(source_angle(&g, [1.0, 1.0, 0.0]).unwrap(), 45.0, epsilon = 1e-9);
        assert_abs_diff_eq!(source_angle(&g, [-3.0, 0.0, 0.0]).unwrap(), 180.0, epsilon = 1e-9);
        assert!(source_angle(&g, [0.0; 3]).is_err());
    }

    #[test]
    fn angle_difference_rule() {
        assert_eq!(angle_difference(30.0, &[70.0]), Some(40.0));
        assert_eq!(angle_difference(100.0, &[20.0, 110.0]), Some(10.0));
        assert_eq!(angle_difference(100.0, &[]), None);
    }

    #[test]
    fn stacked_layout_has_1799_rows() {
        let a = Array2::from_shape_fn((6, 257), |(t, f)| Complex64::from_polar(1.0 + t as f64, 0.01 * (f * (t + 1)) as f64));
        let planes: Vec<_> = (0..9).map(|u| a.mapv(|c| c * Complex64::from_polar(1.0, 0.1 * u as f64))).collect();
        let spec = spec_from(planes);
        let g = ArrayGeometry::default_linear(16000);
        let feats = AcousticFeatures::compute(&spec, &g, 60.0, false).unwrap();
        let st = feats.stacked();
        assert_eq!(st.dim(), (1799, 6));
        assert_eq!(st[[3, 2]], feats.lps[[2, 3]]);
        assert_eq!(st[[257 + 257 * 2 + 5, 4]], feats.ipd[[2, 4, 5]]);
        assert_eq!(st[[1798, 1]], feats.df[[1, 256]]);
        assert_eq!(feats.spatial_rows(), 257..1799);

        let mut gated = st.clone();
        gate_stacked(&mut gated, 257, 0.0);
        assert_eq!(gated.slice(s![..257, ..]), st.slice(s![..257, ..]));
        assert!(gated.slice(s![257.., ..]).iter().all(|&v| v == 0.0));
    }
}
