//! Dilated depthwise-separable temporal blocks and the three trimodal
//! fusion orders built from them.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::attention::{factorized_attention_forward, FactorizedAttentionParams};
use crate::error::{Error, Result};

/// Depthwise kernel length.
pub const KERNEL: usize = 3;
/// Normalisation floor inside blocks.
pub const NORM_EPS: f64 = 1e-5;

/// One residual block on `C` channels with `H` hidden channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    /// `[C x H]`
    pub pointwise_in: Array2<f64>,
    pub prelu_in: f64,
    /// `[H x KERNEL]`; tap `k` reads frame `t + (k - 1) * dilation`.
    pub depthwise: Array2<f64>,
    pub prelu_mid: f64,
    /// `[H x C]`
    pub pointwise_out: Array2<f64>,
}

impl BlockParams {
    pub fn zeros(channels: usize, hidden: usize) -> Self {
        Self {
            pointwise_in: Array2::zeros((channels, hidden)),
            prelu_in: 0.0,
            depthwise: Array2::zeros((hidden, KERNEL)),
            prelu_mid: 0.0,
            pointwise_out: Array2::zeros((hidden, channels)),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, channels: usize, hidden: usize) -> Self {
        let mut draw = |rows: usize, cols: usize, fan_in: usize| {
            let dist = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
            Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
        };
        Self {
            pointwise_in: draw(channels, hidden, channels),
            prelu_in: 0.25,
            depthwise: draw(hidden, KERNEL, KERNEL),
            prelu_mid: 0.25,
            pointwise_out: draw(hidden, channels, hidden),
        }
    }

    pub fn channels(&self) -> usize {
        self.pointwise_in.nrows()
    }

    fn validate(&self) -> Result<()> {
        let hidden = self.pointwise_in.ncols();
        if self.depthwise.dim() != (hidden, KERNEL) || self.pointwise_out.dim() != (hidden, self.channels()) {
            return Err(Error::validation("block parameter shapes are inconsistent"));
        }
        Ok(())
    }
}

fn prelu(x: &mut Array2<f64>, alpha: f64) {
    x.mapv_inplace(|v| if v >= 0.0 { v } else { alpha * v });
}

/// Zero-mean unit-variance across channels, independently per frame.
fn normalize_frames(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale = 1.0 / (var + NORM_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * scale);
    }
}

fn depthwise_conv(x: &Array2<f64>, kernel: &Array2<f64>, dilation: usize) -> Array2<f64> {
    let (t, h) = x.dim();
    let mut out = Array2::zeros((t, h));
    for k in 0..KERNEL {
        let taps: Array1<f64> = kernel.column(k).to_owned();
        let offset = (k as isize - 1) * dilation as isize;
        for frame in 0..t {
            let src = frame as isize + offset;
            if src < 0 || src >= t as isize {
                continue;
            }
            let mut row = out.row_mut(frame);
            row.scaled_add(1.0, &(&x.row(src as usize) * &taps));
        }
    }
    out
}

/// pointwise -> PReLU -> norm -> dilated depthwise -> PReLU -> norm ->
/// pointwise, plus the input.
pub fn toy_block_forward(emb: ArrayView2<f64>, params: &BlockParams, dilation: usize) -> Result<Array2<f64>> {
    params.validate()?;
    if emb.ncols() != params.channels() {
        return Err(Error::validation(format!(
            "block expects {} channels, got {}",
            params.channels(),
            emb.ncols()
        )));
    }
    if dilation == 0 {
        return Err(Error::validation("dilation must be at least 1"));
    }
    let mut h = emb.dot(&params.pointwise_in);
    prelu(&mut h, params.prelu_in);
    normalize_frames(&mut h);
    let mut h = depthwise_conv(&h, &params.depthwise, dilation);
    prelu(&mut h, params.prelu_mid);
    normalize_frames(&mut h);
    Ok(&emb + &h.dot(&params.pointwise_out))
}

/// Blocks with dilations `1, 2, 4, ...` applied in order.
pub fn block_stack_forward(emb: ArrayView2<f64>, blocks: &[BlockParams]) -> Result<Array2<f64>> {
    let mut x = emb.to_owned();
    for (i, b) in blocks.iter().enumerate() {
        x = toy_block_forward(x.view(), b, 1 << i)?;
    }
    Ok(x)
}

/// Frames on either side that can influence one output of `blocks` stacked
/// blocks.
pub fn receptive_field(blocks: usize) -> usize {
    1 + (KERNEL - 1) * ((1usize << blocks) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimodalConfig {
    /// concat(A, V, S)
    ConcatConcat,
    /// concat(facatt(A, S), V)
    FacAttConcat,
    /// facatt(blocks(facatt(A, S)), V)
    FacAttFacAtt,
}

/// Parameters for one trimodal fusion order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimodalFusion {
    pub config: TrimodalConfig,
    /// Speaker-scored attention over acoustic subspaces.
    pub speaker_attention: Option<FactorizedAttentionParams>,
    /// Lip-scored attention, second stage of [`TrimodalConfig::FacAttFacAtt`].
    pub lip_attention: Option<FactorizedAttentionParams>,
    /// Blocks between the two attention stages.
    pub between: Vec<BlockParams>,
}

/// Number of blocks between the speaker and lip attention stages.
pub const BETWEEN_STAGE_BLOCKS: usize = 2;

impl TrimodalFusion {
    /// Random parameters for widths `e` (acoustic), `d` (lip), `g` (speaker)
    /// and fused width `p`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        config: TrimodalConfig,
        e: usize,
        d: usize,
        g: usize,
        heads: usize,
        p: usize,
    ) -> Result<Self> {
        let (speaker_attention, lip_attention, between) = match config {
            TrimodalConfig::ConcatConcat => (None, None, Vec::new()),
            TrimodalConfig::FacAttConcat => (Some(FactorizedAttentionParams::random(rng, e, g, heads, p)?), None, Vec::new()),
            TrimodalConfig::FacAttFacAtt => {
                let s = FactorizedAttentionParams::random(rng, e, g, heads, p)?;
                let blocks = (0..BETWEEN_STAGE_BLOCKS).map(|_| BlockParams::random(rng, p, p)).collect();
                let v = FactorizedAttentionParams::random(rng, p, d, heads, p)?;
                (Some(s), Some(v), blocks)
            }
        };
        Ok(Self {
            config,
            speaker_attention,
            lip_attention,
            between,
        })
    }

    /// Fuses frame-aligned acoustic `[T x E]`, lip `[T x D]` and tiled
    /// speaker `[T x G]` embeddings.
    pub fn forward(&self, a: ArrayView2<f64>, v: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
        if a.nrows() != v.nrows() || a.nrows() != s.nrows() {
            return Err(Error::validation("modalities must share the frame count"));
        }
        let missing = || Error::validation(format!("{:?} needs attention parameters", self.config));
        match self.config {
            TrimodalConfig::ConcatConcat => Ok(ndarray::concatenate(Axis(1), &[a, v, s]).expect("rows checked")),
            TrimodalConfig::FacAttConcat => {
                let p = self.speaker_attention.as_ref().ok_or_else(missing)?;
                let ase = factorized_attention_forward(a, s, p)?.fused;
                Ok(ndarray::concatenate(Axis(1), &[ase.view(), v]).expect("rows checked"))
            }
            TrimodalConfig::FacAttFacAtt => {
                let ps = self.speaker_attention.as_ref().ok_or_else(missing)?;
                let pv = self.lip_attention.as_ref().ok_or_else(missing)?;
                let ase = factorized_attention_forward(a, s, ps)?.fused;
                let mid = block_stack_forward(ase.view(), &self.between)?;
                Ok(factorized_attention_forward(mid.view(), v, pv)?.fused)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_block_is_identity() {
        let x = Array2::from_shape_fn((9, 4), |(t, c)| (t as f64 * 0.3 - c as f64).sin());
        for d in [1, 2, 4, 128] {
            let y = toy_block_forward(x.view(), &BlockParams::zeros(4, 6), d).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn shape_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = BlockParams::random(&mut rng, 5, 7);
        let x = Array2::from_shape_fn((20, 5), |(t, c)| ((t * c) as f64).cos());
        for i in 0..8 {
            assert_eq!(toy_block_forward(x.view(), &p, 1 << i).unwrap().dim(), (20, 5));
        }
        assert!(toy_block_forward(Array2::zeros((3, 4)).view(), &p, 1).is_err());
    }

    #[test]
    fn receptive_field_of_eight_blocks() {
        assert_eq!(receptive_field(8), 511);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let blocks: Vec<_> = (0..8).map(|_| BlockParams::random(&mut rng, 3, 4)).collect();
        let (t, t0) = (800, 400);
        let mut x = Array2::zeros((t, 3));
        x.row_mut(t0).fill(1.0);
        x[[t0, 1]] = -0.5;
        let y = block_stack_forward(x.view(), &blocks).unwrap();
        let touched: Vec<usize> = (0..t)
            .filter(|&i| i != t0 && y.row(i).iter().any(|v| *v != 0.0))
            .collect();
        let half = (receptive_field(8) - 1) / 2;
        assert_eq!(*touched.first().unwrap(), t0 - half);
        assert_eq!(*touched.last().unwrap(), t0 + half);
    }

    #[test]
    fn trimodal_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (t, e, d, g, h, p) = (6, 8, 8, 4, 3, 5);
        let a = Array2::from_elem((t, e), 0.1);
        let v = Array2::from_elem((t, d), -0.2);
        let s = Array2::from_elem((t, g), 0.3);
        let widths = [
            (TrimodalConfig::ConcatConcat, e + d + g),
            (TrimodalConfig::FacAttConcat, p + d),
            (TrimodalConfig::FacAttFacAtt, p),
        ];
        for (cfg, w) in widths {
            let f = TrimodalFusion::random(&mut rng, cfg, e, d, g, h, p).unwrap();
            assert_eq!(f.forward(a.view(), v.view(), s.view()).unwrap().dim(), (t, w), "{cfg:?}");
        }
    }
}
