//! Embedding sequences and their alignment to the acoustic frame rate.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acoustic embedding width `E`.
pub const ACOUSTIC_DIM: usize = 256;
/// Lip embedding width `D`.
pub const LIP_DIM: usize = 256;
/// Speaker embedding width `G`.
pub const SPEAKER_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Acoustic,
    Lip,
    Speaker,
    /// Output of a fusion stage; any width.
    Fused,
}

impl EmbeddingKind {
    pub fn expected_dim(self) -> Option<usize> {
        match self {
            EmbeddingKind::Acoustic => Some(ACOUSTIC_DIM),
            EmbeddingKind::Lip => Some(LIP_DIM),
            EmbeddingKind::Speaker => Some(SPEAKER_DIM),
            EmbeddingKind::Fused => None,
        }
    }
}

/// Rows are time steps, columns are embedding dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    values: Array2<f64>,
    kind: EmbeddingKind,
    frame_rate: f64,
}

impl EmbeddingSequence {
    pub fn new(values: Array2<f64>, kind: EmbeddingKind, frame_rate: f64) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::validation("embedding sequence must be non-empty"));
        }
        if let Some(d) = kind.expected_dim() {
            if values.ncols() != d {
                return Err(Error::validation(format!(
                    "{kind:?} embeddings have width {d}, got {}",
                    values.ncols()
                )));
            }
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::validation("frame rate must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("embedding values must be finite"));
        }
        Ok(Self {
            values,
            kind,
            frame_rate,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    /// Always false; construction rejects empty sequences.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Source row used for output row `t` when stretching `k` rows to `t_out`.
pub fn nearest_index(t: usize, k: usize, t_out: usize) -> usize {
    let pos = ((2 * t + 1) * k) / (2 * t_out);
    pos.min(k - 1)
}

/// Nearest-neighbour resampling of `emb` to `t_out` rows.
pub fn upsample_nearest(emb: &EmbeddingSequence, t_out: usize) -> Result<EmbeddingSequence> {
    if t_out == 0 {
        return Err(Error::validation("target length must be at least 1"));
    }
    let k = emb.len();
    let rows: Vec<usize> = (0..t_out).map(|t| nearest_index(t, k, t_out)).collect();
    let values = emb.values.select(Axis(0), &rows);
    let rate = emb.frame_rate * t_out as f64 / k as f64;
    EmbeddingSequence::new(values, emb.kind, rate)
}

/// Repeats a single-row embedding over `t_out` frames.
pub fn tile_speaker(s: &EmbeddingSequence, t_out: usize, frame_rate: f64) -> Result<EmbeddingSequence> {
    if s.len() != 1 {
        return Err(Error::validation(format!("speaker embedding must have one row, got {}", s.len())));
    }
    if t_out == 0 {
        return Err(Error::validation("target length must be at least 1"));
    }
    let row = s.values.row(0);
    let values = Array2::from_shape_fn((t_out, row.len()), |(_, j)| row[j]);
    EmbeddingSequence::new(values, s.kind, frame_rate)
}

/// Feature-axis concatenation, columns in argument order.
pub fn concat_fuse(embs: &[&EmbeddingSequence]) -> Result<EmbeddingSequence> {
    let first = embs.first().ok_or_else(|| Error::validation("nothing to concatenate"))?;
    if let [only] = embs {
        return Ok((*only).clone());
    }
    if let Some(bad) = embs.iter().find(|e| e.len() != first.len()) {
        return Err(Error::validation(format!(
            "length mismatch in concatenation: {} vs {}",
            first.len(),
            bad.len()
        )));
    }
    let views: Vec<_> = embs.iter().map(|e| e.values.view()).collect();
    let values = concatenate(Axis(1), &views).expect("row counts checked");
    EmbeddingSequence::new(values, EmbeddingKind::Fused, first.frame_rate)
}

/// Seeded stand-in for lip embeddings: a phone sequence where each phone
/// holds for a few frames and frames scatter around per-phone cluster means.
pub fn synthetic_lip_embeddings<R: Rng + ?Sized>(
    rng: &mut R,
    frames: usize,
    dim: usize,
    clusters: usize,
    spread: f64,
) -> Result<Array2<f64>> {
    if frames == 0 || dim == 0 || clusters == 0 {
        return Err(Error::validation("frames, dim and clusters must be positive"));
    }
    let means: Vec<Array1<f64>> = (0..clusters).map(|_| gaussian_vec(rng, dim)).collect();
    let mut out = Array2::zeros((frames, dim));
    let mut t = 0;
    while t < frames {
        let phone = rng.random_range(0..clusters);
        let hold = rng.random_range(2..=6).min(frames - t);
        for row in t..t + hold {
            let noise = gaussian_vec(rng, dim);
            out.row_mut(row).assign(&(&means[phone] + &(noise * spread)));
        }
        t += hold;
    }
    Ok(out)
}

/// Unit-norm Gaussian speaker embedding, one row.
pub fn synthetic_speaker_embedding<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<Array2<f64>> {
    if dim == 0 {
        return Err(Error::validation("dim must be positive"));
    }
    let v = gaussian_vec(rng, dim);
    let n = v.dot(&v).sqrt().max(1e-12);
    Ok((v / n).insert_axis(Axis(0)))
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| StandardNormal.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(k: usize, d: usize) -> EmbeddingSequence {
        let v = Array2::from_shape_fn((k, d), |(i, j)| (i * 10 + j) as f64);
        EmbeddingSequence::new(v, EmbeddingKind::Fused, 25.0).unwrap()
    }

    fn source_rows(k: usize, t: usize) -> Vec<usize> {
        let up = upsample_nearest(&seq(k, 1), t).unwrap();
        up.values().column(0).iter().map(|v| (*v / 10.0) as usize).collect()
    }

    #[test]
    fn nearest_mapping() {
        assert_eq!(source_rows(3, 3), vec![0, 1, 2]);
        assert_eq!(source_rows(2, 4), vec![0, 0, 1, 1]);
        // frame centres (t + 0.5) / T against (k + 0.5) / K
        assert_eq!(source_rows(4, 10), vec![0, 0, 1, 1, 1, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn nearest_matches_float_formula() {
        for k in 1..20 {
            for t in 1..60 {
                for i in 0..t {
                    let float = (((i as f64 + 0.5) * k as f64 / t as f64).floor() as usize).min(k - 1);
                    assert_eq!(nearest_index(i, k, t), float, "k={k} t={t} i={i}");
                }
            }
        }
    }

    #[test]
    fn tiling() {
        let s = EmbeddingSequence::new(ndarray::array![[1.0, 2.0]], EmbeddingKind::Fused, 1.0).unwrap();
        let t = tile_speaker(&s, 3, 62.5).unwrap();
        assert_eq!(t.values(), &ndarray::array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]);
        assert_eq!(tile_speaker(&s, 1, 62.5).unwrap().values(), s.values());
        assert!(tile_speaker(&seq(2, 2), 3, 1.0).is_err());
    }

    #[test]
    fn concat_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = 7;
        let a = EmbeddingSequence::new(Array2::zeros((t, ACOUSTIC_DIM)), EmbeddingKind::Acoustic, 62.5).unwrap();
        let v = synthetic_lip_embeddings(&mut rng, t, LIP_DIM, 5, 0.1).unwrap();
        let v = EmbeddingSequence::new(v, EmbeddingKind::Lip, 62.5).unwrap();
        let s = synthetic_speaker_embedding(&mut rng, SPEAKER_DIM).unwrap();
        let s = tile_speaker(&EmbeddingSequence::new(s, EmbeddingKind::Speaker, 1.0).unwrap(), t, 62.5).unwrap();
        let fe = concat_fuse(&[&a, &v, &s]).unwrap();
        assert_eq!(fe.dim(), 640);
        assert_eq!(fe.values().slice(ndarray::s![.., 256..512]), v.values());
        assert_eq!(concat_fuse(&[&a]).unwrap(), a);
        assert!(concat_fuse(&[&a, &seq(3, 4)]).is_err());
        assert!(concat_fuse(&[]).is_err());
    }

    #[test]
    fn kind_width_enforced() {
        assert!(EmbeddingSequence::new(Array2::zeros((2, 10)), EmbeddingKind::Lip, 25.0).is_err());
        assert!(EmbeddingSequence::new(Array2::from_elem((2, 2), f64::NAN), EmbeddingKind::Fused, 25.0).is_err());
    }

    #[test]
    fn speaker_embedding_is_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = synthetic_speaker_embedding(&mut rng, SPEAKER_DIM).unwrap();
        assert!((s.row(0).dot(&s.row(0)) - 1.0).abs() < 1e-12);
    }
}
