use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{MaskProblem, ObjectiveConfig};
use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::metrics::{ssnr, SegmentConfig};
use crate::stft::StftConfig;

/// Default tone pair: closer than the analysis main lobe, so masking alone
/// cannot separate them and some interference survives the SNR term.
pub const DEMO_FREQS: (f64, f64) = (440.0, 480.0);
pub const DEMO_AMPLITUDE: f64 = 0.5;
pub const DEMO_SECONDS: f64 = 1.0;
pub const DEMO_SAMPLE_RATE: u32 = 24_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    pub objective: ObjectiveConfig,
    pub steps: usize,
    pub lr: f64,
    /// The penalty term joins the objective from this step on.
    pub penalty_from_step: usize,
    pub init_logit: f64,
    pub segments: SegmentConfig,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig {
                // Centered frames keep the clip edges covered by full windows.
                stft: StftConfig {
                    center: true,
                    ..StftConfig::default()
                },
                ..ObjectiveConfig::default()
            },
            steps: 500,
            lr: 200.0,
            penalty_from_step: 0,
            init_logit: 0.0,
            segments: SegmentConfig {
                seg_s: 0.25,
                ..SegmentConfig::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub step: usize,
    pub loss: f64,
    pub snr_term: f64,
    pub mag_term: f64,
    pub penalty_term: f64,
    pub masked_energy: f64,
    pub ssnr_db: f64,
}

impl DemoStep {
    pub const CSV_HEADER: &'static str = "step,loss,snr_term,mag_term,penalty_term,masked_energy,ssnr_db";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step, self.loss, self.snr_term, self.mag_term, self.penalty_term, self.masked_energy, self.ssnr_db
        )
    }
}

/// Plain gradient descent on sigmoid mask logits. Row `k` of the trajectory
/// describes the state after `k` updates, so it has `steps + 1` rows.
pub fn optimize_masks_demo(mix: &AudioClip, s1: &AudioClip, s2: &AudioClip, cfg: &DemoConfig) -> Result<Vec<DemoStep>> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidConfig(format!("learning rate {} must be positive", cfg.lr)));
    }
    let mut problem = MaskProblem::new(mix, s1, s2, cfg.objective)?;
    let penalty_on = cfg.objective.penalty_active;
    let mut logits = [
        Array2::from_elem(problem.dim(), cfg.init_logit),
        Array2::from_elem(problem.dim(), cfg.init_logit),
    ];
    let sr = mix.sample_rate();
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    for step in 0..=cfg.steps {
        problem.set_penalty_active(penalty_on && step >= cfg.penalty_from_step);
        let eval = problem.evaluate(&logits)?;
        if !eval.value.is_finite() || eval.grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged(step));
        }
        let quality = ssnr(
            [eval.estimates[0].samples(), eval.estimates[1].samples()],
            [s1.samples(), s2.samples()],
            sr,
            &cfg.segments,
        )?;
        trajectory.push(DemoStep {
            step,
            loss: eval.value,
            snr_term: eval.snr,
            mag_term: eval.mag,
            penalty_term: eval.penalty,
            masked_energy: eval.masked_energy,
            ssnr_db: quality,
        });
        if step == cfg.steps {
            break;
        }
        for (l, g) in logits.iter_mut().zip(&eval.grads) {
            l.scaled_add(-cfg.lr, g);
        }
    }
    log::debug!("mask demo finished after {} steps", cfg.steps);
    Ok(trajectory)
}

/// Raised-cosine onset and offset length of the demo tones.
pub const DEMO_FADE_S: f64 = 0.05;

/// Two sines with disjoint spectra, `seconds` long, and their sum. Onsets and
/// offsets are faded so that no broadband click couples the two sources.
pub fn two_sine_mixture(freqs: (f64, f64), amplitude: f64, seconds: f64, sample_rate: u32) -> Result<[AudioClip; 3]> {
    let len = (seconds * sample_rate as f64).round() as usize;
    let fade = ((DEMO_FADE_S * sample_rate as f64) as usize).min(len / 2).max(1);
    let envelope = |n: usize| {
        let edge = n.min(len - 1 - n);
        if edge >= fade {
            1.0
        } else {
            0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / fade as f64).cos()
        }
    };
    let tone = |f: f64| -> Result<AudioClip> {
        AudioClip::new(
            (0..len)
                .map(|n| amplitude * envelope(n) * (2.0 * std::f64::consts::PI * f * n as f64 / sample_rate as f64).sin())
                .collect(),
            sample_rate,
        )
    };
    let (a, b) = (tone(freqs.0)?, tone(freqs.1)?);
    let mix = AudioClip::new(a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect(), sample_rate)?;
    Ok([mix, a, b])
}
