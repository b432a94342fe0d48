//! Finite-difference verification of the factorized attention gradients
//! plus simplex and rule-gate invariants.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::attention::{
    factorized_attention_forward, factorized_attention_grad, rule_attention_weight, FactorizedAttentionParams,
    RuleAttentionParams,
};
use crate::error::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradient agreement threshold.
pub const GRAD_TOLERANCE: f64 = 1e-5;
/// Row-sum tolerance for attention weights.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;
/// Denominator floor of the relative error; below it the error is absolute.
pub const REL_FLOOR: f64 = 1e-3;

/// `|analytic - numeric| / max(|analytic|, |numeric|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckDims {
    pub frames: usize,
    pub acoustic: usize,
    pub modality: usize,
    pub heads: usize,
    pub out: usize,
}

impl Default for CheckDims {
    fn default() -> Self {
        Self {
            frames: 3,
            acoustic: 4,
            modality: 3,
            heads: 3,
            out: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionCheckReport {
    pub seed: u64,
    pub instances: usize,
    pub dims: CheckDims,
    pub max_grad_rel_error: f64,
    pub max_simplex_error: f64,
    pub fused_in_open_unit: bool,
    pub rule_zero_point: bool,
    pub rule_range: bool,
    pub failures: Vec<String>,
}

impl FusionCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

/// Scalar loss `sum(upstream * fused)`.
fn loss(a: &Array2<f64>, m: &Array2<f64>, p: &FactorizedAttentionParams, up: &Array2<f64>) -> Result<f64> {
    let out = factorized_attention_forward(a.view(), m.view(), p)?;
    Ok((&out.fused * up).sum())
}

fn central<F: FnMut(f64) -> Result<f64>>(x0: f64, mut f: F) -> Result<f64> {
    Ok((f(x0 + FD_STEP)? - f(x0 - FD_STEP)?) / (2.0 * FD_STEP))
}

/// Largest relative error between analytic and central-difference
/// gradients over every input and parameter entry of one instance.
///
/// `corrupt` perturbs one parameter after the analytic pass, so a
/// passing result with it set would mean the check cannot see errors.
pub fn check_instance(rng: &mut ChaCha8Rng, dims: CheckDims, corrupt: bool) -> Result<f64> {
    let mut a = gaussian(rng, dims.frames, dims.acoustic);
    let mut m = gaussian(rng, dims.frames, dims.modality);
    let up = gaussian(rng, dims.frames, dims.out);
    let mut p = FactorizedAttentionParams::random(rng, dims.acoustic, dims.modality, dims.heads, dims.out)?;
    let g = factorized_attention_grad(a.view(), m.view(), &p, up.view())?;
    if corrupt {
        p.modality[[0, 0]] += 0.5;
        p.subspaces[0][[0, 0]] -= 0.5;
    }
    let mut worst: f64 = 0.0;

    for idx in ndarray::indices(a.dim()) {
        let x0 = a[idx];
        let n = central(x0, |x| {
            a[idx] = x;
            loss(&a, &m, &p, &up)
        })?;
        a[idx] = x0;
        worst = worst.max(relative_error(g.acoustic[idx], n));
    }
    for idx in ndarray::indices(m.dim()) {
        let x0 = m[idx];
        let n = central(x0, |x| {
            m[idx] = x;
            loss(&a, &m, &p, &up)
        })?;
        m[idx] = x0;
        worst = worst.max(relative_error(g.modality[idx], n));
    }
    for h in 0..p.heads() {
        for idx in ndarray::indices(p.subspaces[h].dim()) {
            let x0 = p.subspaces[h][idx];
            let n = central(x0, |x| {
                p.subspaces[h][idx] = x;
                loss(&a, &m, &p, &up)
            })?;
            p.subspaces[h][idx] = x0;
            worst = worst.max(relative_error(g.subspaces[h][idx], n));
        }
    }
    for idx in ndarray::indices(p.modality.dim()) {
        let x0 = p.modality[idx];
        let n = central(x0, |x| {
            p.modality[idx] = x;
            loss(&a, &m, &p, &up)
        })?;
        p.modality[idx] = x0;
        worst = worst.max(relative_error(g.modality_projection[idx], n));
    }
    Ok(worst)
}

/// Runs `instances` seeded gradient checks plus simplex, sigmoid-range and
/// rule-gate checks.
pub fn run_fusion_checks(seed: u64, instances: usize, dims: CheckDims, inject_fault: bool) -> Result<FusionCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_grad: f64 = 0.0;
    let mut max_simplex: f64 = 0.0;
    let mut open_unit = true;
    for i in 0..instances {
        max_grad = max_grad.max(check_instance(&mut rng, dims, inject_fault && i == 0)?);
        let a = gaussian(&mut rng, dims.frames, dims.acoustic);
        let m = gaussian(&mut rng, dims.frames, dims.modality) * 3.0;
        let p = FactorizedAttentionParams::random(&mut rng, dims.acoustic, dims.modality, dims.heads, dims.out)?;
        let out = factorized_attention_forward(a.view(), m.view(), &p)?;
        for row in out.weights.rows() {
            max_simplex = max_simplex.max((row.sum() - 1.0).abs());
            if row.iter().any(|&w| w < 0.0) {
                max_simplex = f64::INFINITY;
            }
        }
        open_unit &= out.fused.iter().all(|&v| v > 0.0 && v < 1.0);
    }

    let rp = RuleAttentionParams::default();
    let rule_zero_point = rule_attention_weight(Some(rp.b), rp) == 0.0;
    let rule_range = (0..=1800).all(|i| {
        let w = rule_attention_weight(Some(i as f64 * 0.1), rp);
        (0.0..1.0).contains(&w)
    });

    let mut failures = Vec::new();
    if !(max_grad <= GRAD_TOLERANCE) {
        failures.push(format!("gradient relative error {max_grad:.3e} exceeds {GRAD_TOLERANCE:e}"));
    }
    if !(max_simplex <= SIMPLEX_TOLERANCE) {
        failures.push(format!("attention weights leave the simplex by {max_simplex:.3e}"));
    }
    if !open_unit {
        failures.push("fused output left (0, 1)".into());
    }
    if !rule_zero_point {
        failures.push("rule gate is not zero at ad = b".into());
    }
    if !rule_range {
        failures.push("rule gate left [0, 1)".into());
    }
    Ok(FusionCheckReport {
        seed,
        instances,
        dims,
        max_grad_rel_error: max_grad,
        max_simplex_error: max_simplex,
        fused_in_open_unit: open_unit,
        rule_zero_point,
        rule_range,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instances_pass() {
        let r = run_fusion_checks(11, 10, CheckDims::default(), false).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.max_grad_rel_error < 1e-6);
    }

    #[test]
    fn single_head_passes() {
        let dims = CheckDims {
            heads: 1,
            ..CheckDims::default()
        };
        assert!(run_fusion_checks(3, 5, dims, false).unwrap().passed());
    }

    #[test]
    fn injected_fault_is_detected() {
        let r = run_fusion_checks(11, 2, CheckDims::default(), true).unwrap();
        assert!(!r.passed());
        assert!(r.max_grad_rel_error > 1e-3);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert_eq!(relative_error(0.0, 1e-6), 1e-3);
    }
}
