use ndarray::{Array2, Zip};

use super::{build_interference_mask, mag_loss, penalty_loss, snr_loss, InterferenceMask, ObjectiveConfig};
use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::separator::sigmoid;
use crate::stft::{ComplexSpec, MagSpec, StftPlan};

/// Objective over per-source mask logits applied to a fixed mixture, with
/// estimate `i` always assigned to reference `i`.
pub struct MaskProblem {
    plan: StftPlan,
    mix: ComplexSpec,
    /// `|X|^p` of the mixture.
    mix_compressed: Array2<f64>,
    targets: [Vec<f64>; 2],
    target_mags: [MagSpec; 2],
    masks: [InterferenceMask; 2],
    cfg: ObjectiveConfig,
}

#[derive(Clone, Debug)]
pub struct MaskEval {
    pub value: f64,
    pub snr: f64,
    pub mag: f64,
    pub penalty: f64,
    /// Sum of squared estimated magnitudes over both interference masks.
    pub masked_energy: f64,
    pub estimates: [AudioClip; 2],
    /// Gradient w.r.t. each logit grid.
    pub grads: [Array2<f64>; 2],
}

impl MaskProblem {
    pub fn new(mix: &AudioClip, s1: &AudioClip, s2: &AudioClip, cfg: ObjectiveConfig) -> Result<Self> {
        cfg.validate()?;
        if s1.len() != mix.len() || s2.len() != mix.len() {
            return Err(Error::ShapeMismatch("mixture and references differ in length".into()));
        }
        let plan = StftPlan::new(cfg.stft)?;
        let spec = plan.forward(mix)?;
        let v1 = cfg.reference_views(&plan.forward(s1)?);
        let v2 = cfg.reference_views(&plan.forward(s2)?);
        let masks = [
            build_interference_mask(&v1.1, &v2.1, cfg.tau_max, cfg.tau_min, 0)?,
            build_interference_mask(&v2.1, &v1.1, cfg.tau_max, cfg.tau_min, 1)?,
        ];
        let p = cfg.compression;
        Ok(Self {
            mix_compressed: spec.grid().mapv(|c| c.norm().powf(p)),
            plan,
            mix: spec,
            targets: [s1.samples().to_vec(), s2.samples().to_vec()],
            target_mags: [v1.0, v2.0],
            masks,
            cfg,
        })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.mix.grid().dim()
    }

    pub fn masks(&self) -> &[InterferenceMask; 2] {
        &self.masks
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.cfg
    }

    pub fn set_penalty_active(&mut self, active: bool) {
        self.cfg.penalty_active = active;
    }

    pub fn evaluate(&self, logits: &[Array2<f64>; 2]) -> Result<MaskEval> {
        let dim = self.dim();
        if logits.iter().any(|l| l.dim() != dim) {
            return Err(Error::ShapeMismatch(format!("logit grids must be {dim:?}")));
        }
        let w = &self.cfg.weights;
        let p = self.cfg.compression;
        let len = self.mix.source_len();
        let (mut snr, mut mag, mut penalty, mut masked_energy) = (0.0, 0.0, 0.0, 0.0);
        let mut estimates = Vec::with_capacity(2);
        let mut grads = Vec::with_capacity(2);
        for i in 0..2 {
            let sig = logits[i].mapv(sigmoid);
            let est = self.plan.inverse(&self.mix.masked(&sig)?)?.fit_to_len(len);
            let (s_val, s_grad) = snr_loss(est.samples(), &self.targets[i], w.eps)?;
            snr += 0.5 * s_val;
            let half: Vec<f64> = s_grad.iter().map(|g| 0.5 * g).collect();
            let g_spec = self.plan.inverse_vjp(&half, &self.mix)?;

            let est_mag = MagSpec {
                grid: &sig.mapv(|s| s.powf(p)) * &self.mix_compressed,
                exponent: p,
            };
            let (m_val, m_grad) = mag_loss(&est_mag, &self.target_mags[i])?;
            let (p_val, p_grad) = penalty_loss(&est_mag, &self.masks[i], w.eps)?;
            mag += m_val;
            penalty += p_val;
            masked_energy += Zip::from(&est_mag.grid)
                .and(self.masks[i].grid())
                .fold(0.0, |acc, &m, &k| acc + k * m * m);

            let mut grad_mag = m_grad * w.lambda_mag;
            if self.cfg.penalty_active {
                grad_mag = grad_mag + p_grad * w.lambda_penalty;
            }
            // d sigma / d logit = sigma (1 - sigma); d(sigma^p |X|^p) / d logit = p sigma^p (1 - sigma) |X|^p.
            let mut grad = Array2::zeros(dim);
            Zip::from(&mut grad)
                .and(&sig)
                .and(&g_spec)
                .and(self.mix.grid())
                .and(&grad_mag)
                .and(&est_mag.grid)
                .for_each(|g, &s, &gs, &x, &gm, &m| {
                    let d_snr = (gs.re * x.re + gs.im * x.im) * s * (1.0 - s);
                    *g = d_snr + gm * p * m * (1.0 - s);
                });
            estimates.push(est);
            grads.push(grad);
        }
        let penalty_weight = if self.cfg.penalty_active { w.lambda_penalty } else { 0.0 };
        let [e1, e2]: [AudioClip; 2] = estimates.try_into().expect("two estimates");
        let [g1, g2]: [Array2<f64>; 2] = grads.try_into().expect("two gradients");
        Ok(MaskEval {
            value: snr + w.lambda_mag * mag + penalty_weight * penalty,
            snr,
            mag,
            penalty,
            masked_energy,
            estimates: [e1, e2],
            grads: [g1, g2],
        })
    }
}
