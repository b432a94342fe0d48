//! Factorized attention over acoustic subspaces and the angle-driven
//! rule gate for spatial features.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::AcousticFeatures;

/// Default number of acoustic subspaces.
pub const DEFAULT_HEADS: usize = 10;

/// Subspace projections `W_a^h: [E x P]` and the modality projection
/// `W_mod: [D_mod x H]` that scores them.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedAttentionParams {
    pub subspaces: Vec<Array2<f64>>,
    pub modality: Array2<f64>,
}

impl FactorizedAttentionParams {
    pub fn new(subspaces: Vec<Array2<f64>>, modality: Array2<f64>) -> Result<Self> {
        let params = Self { subspaces, modality };
        params.validate()?;
        Ok(params)
    }

    /// Gaussian init with standard deviation `1 / sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, e: usize, d_mod: usize, heads: usize, p: usize) -> Result<Self> {
        if e == 0 || d_mod == 0 || heads == 0 || p == 0 {
            return Err(Error::validation("attention dimensions must be positive"));
        }
        let draw = |rng: &mut R, rows: usize, cols: usize| {
            let dist = Normal::new(0.0, 1.0 / (rows as f64).sqrt()).expect("positive std");
            Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
        };
        let subspaces = (0..heads).map(|_| draw(rng, e, p)).collect();
        let modality = draw(rng, d_mod, heads);
        Self::new(subspaces, modality)
    }

    pub fn heads(&self) -> usize {
        self.subspaces.len()
    }

    pub fn input_dim(&self) -> usize {
        self.subspaces[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.subspaces[0].ncols()
    }

    pub fn modality_dim(&self) -> usize {
        self.modality.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .subspaces
            .first()
            .ok_or_else(|| Error::validation("at least one subspace is required"))?;
        if first.is_empty() {
            return Err(Error::validation("subspace projections must be non-empty"));
        }
        if self.subspaces.iter().any(|w| w.dim() != first.dim()) {
            return Err(Error::validation("all subspace projections must share one shape"));
        }
        if self.modality.ncols() != self.subspaces.len() || self.modality.nrows() == 0 {
            return Err(Error::validation(format!(
                "modality projection must be [D x {}], got {:?}",
                self.subspaces.len(),
                self.modality.dim()
            )));
        }
        let finite = self.subspaces.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.modality.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("attention parameters must be finite"));
        }
        Ok(())
    }

    fn check_inputs(&self, a: &ArrayView2<f64>, modality: &ArrayView2<f64>) -> Result<()> {
        self.validate()?;
        if a.ncols() != self.input_dim() {
            return Err(Error::validation(format!(
                "acoustic width {} does not match E = {}",
                a.ncols(),
                self.input_dim()
            )));
        }
        if modality.ncols() != self.modality_dim() {
            return Err(Error::validation(format!(
                "modality width {} does not match D = {}",
                modality.ncols(),
                self.modality_dim()
            )));
        }
        if a.nrows() != modality.nrows() {
            return Err(Error::validation(format!(
                "acoustic has {} frames, modality has {}",
                a.nrows(),
                modality.nrows()
            )));
        }
        if a.iter().chain(modality.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("attention inputs must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedOutput {
    /// `[T x P]`, every entry in (0, 1).
    pub fused: Array2<f64>,
    /// `[T x H]`, rows on the probability simplex.
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedGrads {
    pub acoustic: Array2<f64>,
    pub modality: Array2<f64>,
    pub subspaces: Vec<Array2<f64>>,
    pub modality_projection: Array2<f64>,
}

/// Row-wise softmax; the max is subtracted before exponentiating.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Forward {
    subspace: Vec<Array2<f64>>,
    weights: Array2<f64>,
    fused: Array2<f64>,
}

fn forward_parts(a: ArrayView2<f64>, modality: ArrayView2<f64>, params: &FactorizedAttentionParams) -> Result<Forward> {
    params.check_inputs(&a, &modality)?;
    let subspace: Vec<Array2<f64>> = params.subspaces.iter().map(|w| a.dot(w)).collect();
    let weights = softmax_rows(&modality.dot(&params.modality));
    let (t, p) = (a.nrows(), params.output_dim());
    let mut pre = Array2::<f64>::zeros((t, p));
    for (h, sub) in subspace.iter().enumerate() {
        let v = weights.column(h).insert_axis(Axis(1));
        pre.zip_mut_with(&(sub * &v), |acc, x| *acc += x);
    }
    let fused = pre.mapv(sigmoid);
    Ok(Forward {
        subspace,
        weights,
        fused,
    })
}

/// `fused_t = sigmoid(sum_h v_t^h A_t W_a^h)` with `v_t = softmax(mod_t W_mod)`.
///
/// Serves both the lip (AVE) and speaker (ASE) branches; only the modality
/// input differs.
pub fn factorized_attention_forward(
    a: ArrayView2<f64>,
    modality: ArrayView2<f64>,
    params: &FactorizedAttentionParams,
) -> Result<FactorizedOutput> {
    let f = forward_parts(a, modality, params)?;
    Ok(FactorizedOutput {
        fused: f.fused,
        weights: f.weights,
    })
}

/// Gradients of `sum(upstream * fused)` with respect to every input and
/// parameter.
pub fn factorized_attention_grad(
    a: ArrayView2<f64>,
    modality: ArrayView2<f64>,
    params: &FactorizedAttentionParams,
    upstream: ArrayView2<f64>,
) -> Result<FactorizedGrads> {
    let f = forward_parts(a, modality, params)?;
    if upstream.dim() != f.fused.dim() {
        return Err(Error::validation(format!(
            "upstream shape {:?} does not match output {:?}",
            upstream.dim(),
            f.fused.dim()
        )));
    }
    let du = &upstream * &f.fused.mapv(|s| s * (1.0 - s));
    let heads = params.heads();
    let t = a.nrows();

    // dL/dv_t^h = <du_t, a_t^h>
    let mut dv = Array2::<f64>::zeros((t, heads));
    for (h, sub) in f.subspace.iter().enumerate() {
        dv.column_mut(h).assign(&(&du * sub).sum_axis(Axis(1)));
    }
    // softmax backward: dz = v * (dv - <v, dv>)
    let inner = (&f.weights * &dv).sum_axis(Axis(1)).insert_axis(Axis(1));
    let dz = &f.weights * &(&dv - &inner);

    let mut d_acoustic = Array2::<f64>::zeros(a.raw_dim());
    let mut d_subspaces = Vec::with_capacity(heads);
    for (h, w) in params.subspaces.iter().enumerate() {
        let scaled = &du * &f.weights.column(h).insert_axis(Axis(1));
        d_acoustic += &scaled.dot(&w.t());
        d_subspaces.push(a.t().dot(&scaled));
    }
    Ok(FactorizedGrads {
        acoustic: d_acoustic,
        modality: dz.dot(&params.modality.t()),
        subspaces: d_subspaces,
        modality_projection: modality.t().dot(&dz),
    })
}

/// Trainable slope `w` and offset `b` (degrees) of the rule gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleAttentionParams {
    pub w: f64,
    pub b: f64,
}

impl Default for RuleAttentionParams {
    fn default() -> Self {
        Self { w: -0.5, b: 10.0 }
    }
}

/// Largest representable value below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// `att(ad) = 2 max(sigmoid(w (ad - b)) - 0.5, 0)` with the sigmoid taken as
/// `1 / (1 + exp(-w (ad - b)))`.
///
/// `None` (single speaker, no interferer) gives 1. The result saturates at
/// the largest double below 1.
pub fn rule_attention_weight(ad_deg: Option<f64>, params: RuleAttentionParams) -> f64 {
    let Some(ad) = ad_deg else {
        return 1.0;
    };
    let sigma = 1.0 / (1.0 + (-params.w * (ad - params.b)).exp());
    (2.0 * (sigma - 0.5).max(0.0)).min(BELOW_ONE)
}

/// Scales IPD and DF by `weight`; LPS passes through.
pub fn apply_feature_gate(features: &AcousticFeatures, weight: f64) -> Result<AcousticFeatures> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::validation(format!("gate weight {weight} is outside [0, 1]")));
    }
    Ok(AcousticFeatures {
        lps: features.lps.clone(),
        ipd: features.ipd.mapv(|v| v * weight),
        df: features.df.mapv(|v| v * weight),
    })
}
