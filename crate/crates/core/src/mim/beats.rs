use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::stft::{StftConfig, StftPlan, WindowKind};

/// 60 / median inter-beat interval.
pub fn estimate_bpm(beats: &[f64]) -> Result<f64> {
    if beats.len() < 3 {
        return Err(Error::InsufficientBeats(beats.len()));
    }
    let mut ibi: Vec<f64> = beats.windows(2).map(|w| w[1] - w[0]).collect();
    ibi.sort_by(f64::total_cmp);
    let mid = ibi.len() / 2;
    let median = if ibi.len() % 2 == 1 { ibi[mid] } else { 0.5 * (ibi[mid - 1] + ibi[mid]) };
    if !(median > 0.0) {
        return Err(Error::InvalidConfig("beats must be strictly increasing".into()));
    }
    Ok(60.0 / median)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatGrid {
    pub beats: Vec<f64>,
    pub downbeats: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeatConfig {
    pub min_bpm: f64,
    pub max_bpm: f64,
    pub beats_per_bar: usize,
}

impl Default for BeatConfig {
    fn default() -> Self {
        Self {
            min_bpm: 60.0,
            max_bpm: 180.0,
            beats_per_bar: 4,
        }
    }
}

/// Fallback beat tracker for unannotated audio: positive spectral flux,
/// tempo from its autocorrelation, phase by grid alignment, and a downbeat
/// on the bar position with the most onset energy. Much cruder than a trained
/// tracker; prefer annotations whenever they exist.
pub fn estimate_beats(clip: &AudioClip, cfg: &BeatConfig) -> Result<BeatGrid> {
    let sr = clip.sample_rate() as f64;
    let hop = (0.01 * sr).round() as usize;
    // Four hops per window keeps the Hann frames overlap-add consistent.
    let window = 4 * hop;
    let stft_cfg = StftConfig {
        window_len: window,
        hop,
        fft_size: window.next_power_of_two(),
        window: WindowKind::Hann,
        center: false,
    };
    let frame_rate = sr / hop as f64;
    let max_lag = (60.0 * frame_rate / cfg.min_bpm).ceil() as usize;
    let min_lag = (60.0 * frame_rate / cfg.max_bpm).floor().max(1.0) as usize;
    if clip.len() < window + hop * 2 * max_lag {
        return Err(Error::InputTooShort(format!(
            "beat estimation needs at least {:.2} s of audio",
            (window + hop * 2 * max_lag) as f64 / sr
        )));
    }
    let mag = StftPlan::new(stft_cfg)?.forward(clip)?.magnitude().grid;
    let mut flux = vec![0.0; mag.nrows()];
    for t in 1..mag.nrows() {
        flux[t] = mag
            .row(t)
            .iter()
            .zip(mag.row(t - 1).iter())
            .map(|(a, b)| (a.ln_1p() - b.ln_1p()).max(0.0))
            .sum();
    }
    let mean = flux.iter().sum::<f64>() / flux.len() as f64;
    let onset: Vec<f64> = flux.iter().map(|v| v - mean).collect();
    let period = (min_lag..=max_lag)
        .max_by(|&a, &b| {
            let ac = |lag: usize| onset.iter().zip(&onset[lag..]).map(|(x, y)| x * y).sum::<f64>();
            ac(a).total_cmp(&ac(b))
        })
        .expect("non-empty lag range");
    let grid_energy = |phase: usize, step: usize| (phase..onset.len()).step_by(step).map(|t| flux[t]).sum::<f64>();
    let phase = (0..period)
        .max_by(|&a, &b| grid_energy(a, period).total_cmp(&grid_energy(b, period)))
        .expect("non-empty phase range");
    let frames: Vec<usize> = (phase..onset.len()).step_by(period).collect();
    let bar = cfg.beats_per_bar.max(1);
    let offset = (0..bar.min(frames.len()))
        .max_by(|&a, &b| {
            let e = |o: usize| frames.iter().skip(o).step_by(bar).map(|&t| flux[t]).sum::<f64>();
            e(a).total_cmp(&e(b))
        })
        .unwrap_or(0);
    // Frame t covers samples starting at t * hop; report the window centre.
    let to_s = |t: usize| (t * hop + window / 2) as f64 / sr;
    let beats: Vec<f64> = frames.iter().map(|&t| to_s(t)).collect();
    let downbeats = beats.iter().skip(offset).step_by(bar).copied().collect();
    Ok(BeatGrid { beats, downbeats })
}
