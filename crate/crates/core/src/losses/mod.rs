//! Training objective: negative SNR, magnitude L2 and the magnitude penalty
//! over interference bins, each with closed-form gradients.
//!
//! The interference mask for estimate `i` marks bins where the other source's
//! reference magnitude exceeds `tau_max` while source `i`'s own reference stays
//! below `tau_min`. Any estimated energy there belongs to the other singer.

mod demo;
mod mask_problem;

pub use demo::{
    optimize_masks_demo, two_sine_mixture, DemoConfig, DemoStep, DEMO_AMPLITUDE, DEMO_FREQS, DEMO_SAMPLE_RATE, DEMO_SECONDS,
};
pub use mask_problem::{MaskEval, MaskProblem};

use std::f64::consts::LN_10;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::stft::{ComplexSpec, MagSpec, StftConfig, StftPlan};

pub const DEFAULT_TAU_MAX: f64 = 1.0;
pub const DEFAULT_TAU_MIN: f64 = 0.5;

/// Binary `[T x F]` grid marking interference bins for one estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceMask {
    grid: Array2<f64>,
    pub tau_max: f64,
    pub tau_min: f64,
    pub source_index: usize,
}

impl InterferenceMask {
    pub fn grid(&self) -> &Array2<f64> {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.grid.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.grid.dim()
    }
}

fn check_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// `I(t,f) = 1` iff `other(t,f) > tau_max` and `target(t,f) < tau_min`.
pub fn build_interference_mask(
    target: &MagSpec,
    other: &MagSpec,
    tau_max: f64,
    tau_min: f64,
    source_index: usize,
) -> Result<InterferenceMask> {
    check_dims(target.dim(), other.dim(), "interference mask inputs")?;
    if target.exponent != other.exponent {
        return Err(Error::InvalidConfig(format!(
            "compression exponents differ: {} vs {}",
            target.exponent, other.exponent
        )));
    }
    let mut grid = Array2::zeros(target.dim());
    ndarray::Zip::from(&mut grid)
        .and(&target.grid)
        .and(&other.grid)
        .for_each(|g, &mi, &mj| {
            if mj > tau_max && mi < tau_min {
                *g = 1.0;
            }
        });
    Ok(InterferenceMask {
        grid,
        tau_max,
        tau_min,
        source_index,
    })
}

/// `sum_{I=1} est^2 / (count(I) + eps)` and its gradient.
pub fn penalty_loss(est: &MagSpec, mask: &InterferenceMask, eps: f64) -> Result<(f64, Array2<f64>)> {
    check_dims(est.dim(), mask.dim(), "penalty loss")?;
    let denom = mask.count() as f64 + eps;
    let masked = &est.grid * &mask.grid;
    let value = masked.iter().map(|v| v * v).sum::<f64>() / denom;
    let grad = masked * (2.0 / denom);
    Ok((value, grad))
}

/// Mean squared error over all `T * F` bins and its gradient.
pub fn mag_loss(est: &MagSpec, reference: &MagSpec) -> Result<(f64, Array2<f64>)> {
    check_dims(est.dim(), reference.dim(), "magnitude loss")?;
    if est.exponent != reference.exponent {
        return Err(Error::InvalidConfig(format!(
            "compression exponents differ: {} vs {}",
            est.exponent, reference.exponent
        )));
    }
    let n = est.grid.len().max(1) as f64;
    let diff = &est.grid - &reference.grid;
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((value, diff * (2.0 / n)))
}

/// `-10 log10((|s|^2 + eps) / (|s - est|^2 + eps))` and its gradient w.r.t. `est`.
pub fn snr_loss(est: &[f64], target: &[f64], eps: f64) -> Result<(f64, Vec<f64>)> {
    if est.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} samples, target {}",
            est.len(),
            target.len()
        )));
    }
    if target.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateReference);
    }
    let signal: f64 = target.iter().map(|v| v * v).sum();
    let err: f64 = est.iter().zip(target).map(|(e, s)| (s - e) * (s - e)).sum();
    let value = -10.0 * ((signal + eps) / (err + eps)).log10();
    let k = 20.0 / LN_10 / (err + eps);
    let grad = est.iter().zip(target).map(|(e, s)| k * (e - s)).collect();
    Ok((value, grad))
}

/// Mean SNR loss over both sources under the better of the two assignments.
/// Returns `(value, grads per estimate, swapped)`.
pub fn pit_snr_loss(est: [&[f64]; 2], target: [&[f64]; 2], eps: f64) -> Result<(f64, [Vec<f64>; 2], bool)> {
    let (a0, g0) = snr_loss(est[0], target[0], eps)?;
    let (a1, g1) = snr_loss(est[1], target[1], eps)?;
    let (b0, h0) = snr_loss(est[0], target[1], eps)?;
    let (b1, h1) = snr_loss(est[1], target[0], eps)?;
    let (identity, swapped) = (0.5 * (a0 + a1), 0.5 * (b0 + b1));
    let half = |g: Vec<f64>| g.into_iter().map(|v| 0.5 * v).collect::<Vec<_>>();
    Ok(if swapped < identity {
        (swapped, [half(h0), half(h1)], true)
    } else {
        (identity, [half(g0), half(g1)], false)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_mag: f64,
    pub lambda_penalty: f64,
    pub eps: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_mag: 0.1,
            lambda_penalty: 0.02,
            eps: 1e-8,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_mag >= 0.0 && self.lambda_penalty >= 0.0 && self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid loss weights {self:?}")));
        }
        Ok(())
    }
}

/// Magnitude scale on which the interference thresholds are compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauDomain {
    Raw,
    #[default]
    Compressed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    pub weights: LossWeights,
    pub stft: StftConfig,
    /// Power-law exponent for the magnitude and penalty terms.
    pub compression: f64,
    pub tau_max: f64,
    pub tau_min: f64,
    pub tau_domain: TauDomain,
    /// Whether the penalty term contributes to the objective.
    pub penalty_active: bool,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            stft: StftConfig::default(),
            compression: 0.5,
            tau_max: DEFAULT_TAU_MAX,
            tau_min: DEFAULT_TAU_MIN,
            tau_domain: TauDomain::Compressed,
            penalty_active: true,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.stft.validate()?;
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "compression exponent {} outside (0, 1]",
                self.compression
            )));
        }
        Ok(())
    }

    /// Compressed reference magnitudes and the threshold view used for masks.
    pub(crate) fn reference_views(&self, spec: &ComplexSpec) -> (MagSpec, MagSpec) {
        let raw = spec.magnitude();
        let compressed = MagSpec {
            grid: raw.grid.mapv(|m| m.powf(self.compression)),
            exponent: self.compression,
        };
        let thresh = match self.tau_domain {
            TauDomain::Raw => raw,
            TauDomain::Compressed => compressed.clone(),
        };
        (compressed, thresh)
    }
}

/// Gradient w.r.t. the complex bins of `|X|^p`, packed as `dL/dRe + i dL/dIm`.
/// Zero-magnitude bins get a zero subgradient.
pub fn compressed_magnitude_vjp(spec: &Array2<Complex64>, grad_mag: &Array2<f64>, p: f64) -> Array2<Complex64> {
    let mut out = Array2::zeros(spec.dim());
    ndarray::Zip::from(&mut out)
        .and(spec)
        .and(grad_mag)
        .for_each(|o, &x, &g| {
            let m = x.norm();
            if m > 0.0 {
                *o = x * (g * p * m.powf(p - 2.0));
            }
        });
    out
}

#[derive(Clone, Debug)]
pub struct TotalLoss {
    pub value: f64,
    pub snr: f64,
    pub mag: f64,
    pub penalty: f64,
    /// Estimate 1 matched to reference 2.
    pub swapped: bool,
    pub grads: [Vec<f64>; 2],
}

/// `L_SNR + lambda_mag * L_Mag + lambda_penalty * L_Penalty` on waveform
/// estimates, with gradients w.r.t. both estimates. The assignment minimizing
/// the SNR term is applied to all three terms.
pub fn total_loss(est: [&AudioClip; 2], gt: [&AudioClip; 2], cfg: &ObjectiveConfig) -> Result<TotalLoss> {
    cfg.validate()?;
    let len = gt[0].len();
    if est.iter().chain(gt.iter()).any(|c| c.len() != len) {
        return Err(Error::ShapeMismatch("total loss needs four equal-length clips".into()));
    }
    let w = &cfg.weights;
    let (snr, mut grads, swapped) = pit_snr_loss(
        [est[0].samples(), est[1].samples()],
        [gt[0].samples(), gt[1].samples()],
        w.eps,
    )?;

    let plan = StftPlan::new(cfg.stft)?;
    let gt_views = [cfg.reference_views(&plan.forward(gt[0])?), cfg.reference_views(&plan.forward(gt[1])?)];
    let (mut mag, mut penalty) = (0.0, 0.0);
    for (i, e) in est.iter().enumerate() {
        let t = if swapped { 1 - i } else { i };
        let (target_c, target_th) = &gt_views[t];
        let (_, other_th) = &gt_views[1 - t];
        let spec = plan.forward(e)?;
        let est_mag = MagSpec {
            grid: spec.grid().mapv(|c| c.norm().powf(cfg.compression)),
            exponent: cfg.compression,
        };
        let (m_val, m_grad) = mag_loss(&est_mag, target_c)?;
        let mask = build_interference_mask(target_th, other_th, cfg.tau_max, cfg.tau_min, i)?;
        let (p_val, p_grad) = penalty_loss(&est_mag, &mask, w.eps)?;
        mag += m_val;
        penalty += p_val;

        let mut grad_mag = m_grad * w.lambda_mag;
        if cfg.penalty_active {
            grad_mag = grad_mag + p_grad * w.lambda_penalty;
        }
        let g_spec = compressed_magnitude_vjp(spec.grid(), &grad_mag, cfg.compression);
        let g_wave = plan.forward_vjp(&g_spec, len)?;
        for (g, v) in grads[i].iter_mut().zip(g_wave) {
            *g += v;
        }
    }
    let penalty_weight = if cfg.penalty_active { w.lambda_penalty } else { 0.0 };
    Ok(TotalLoss {
        value: snr + w.lambda_mag * mag + penalty_weight * penalty,
        snr,
        mag,
        penalty,
        swapped,
        grads,
    })
}
