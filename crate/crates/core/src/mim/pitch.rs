use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Per-frame fundamental frequency in Hz, 0 marking unvoiced frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    pub hop_s: f64,
    pub values: Vec<f64>,
}

impl F0Track {
    pub fn new(hop_s: f64, values: Vec<f64>) -> Result<Self> {
        if !(hop_s > 0.0 && hop_s.is_finite()) {
            return Err(Error::InvalidConfig(format!("f0 hop {hop_s} must be positive")));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("f0 value {v} must be finite and >= 0")));
        }
        Ok(Self { hop_s, values })
    }

    /// Frames covering `[start_s, start_s + length_s)`, clamped to the track.
    pub fn window(&self, start_s: f64, length_s: f64) -> &[f64] {
        let a = ((start_s / self.hop_s).round() as usize).min(self.values.len());
        let b = (((start_s + length_s) / self.hop_s).round() as usize).clamp(a, self.values.len());
        &self.values[a..b]
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|&&v| v > 0.0).count() as f64 / self.values.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarmonicConfig {
    pub n_overtones: usize,
    pub tol_cents: f64,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self {
            n_overtones: 16,
            tol_cents: 50.0,
        }
    }
}

pub(crate) fn cents(fa: f64, fb: f64) -> f64 {
    1200.0 * (fa / fb).log2()
}

/// Number of overtones `p` of `fa` that some overtone `q` of `fb` matches.
/// The closest `q` in log frequency is a neighbour of `p * fa / fb`.
fn matched_overtones(fa: f64, fb: f64, cfg: &HarmonicConfig) -> usize {
    let n = cfg.n_overtones;
    (1..=n)
        .filter(|&p| {
            let ideal = p as f64 * fa / fb;
            let lo = (ideal.floor() as usize).clamp(1, n);
            let hi = (ideal.ceil() as usize).clamp(1, n);
            [lo, hi]
                .iter()
                .any(|&q| cents(p as f64 * fa, q as f64 * fb).abs() < cfg.tol_cents)
        })
        .count()
}

/// Coincidence score of one voiced frame pair, symmetric in its arguments:
/// matched overtones counted from both sides over `2 * n_overtones`.
pub fn frame_overlap(fa: f64, fb: f64, cfg: &HarmonicConfig) -> f64 {
    (matched_overtones(fa, fb, cfg) + matched_overtones(fb, fa, cfg)) as f64 / (2 * cfg.n_overtones) as f64
}

/// Nearest-neighbour stretch of `track` to `len` frames.
fn stretch(track: &[f64], len: usize) -> Vec<f64> {
    if track.len() == len || track.is_empty() {
        return track.to_vec();
    }
    (0..len)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * track.len() as f64 / len as f64 - 0.5).round();
            track[(pos.max(0.0) as usize).min(track.len() - 1)]
        })
        .collect()
}

/// Mean frame score over frames where both tracks are voiced; 0 if none are.
/// Tracks of different lengths are aligned by stretching the shorter one.
pub fn harmonic_overlap_score(f0_a: &[f64], f0_b: &[f64], cfg: &HarmonicConfig) -> Result<f64> {
    if f0_a.iter().chain(f0_b).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidConfig("f0 values must be >= 0".into()));
    }
    if cfg.n_overtones == 0 || !(cfg.tol_cents > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid harmonic config {cfg:?}")));
    }
    let len = f0_a.len().max(f0_b.len());
    let (a, b) = (stretch(f0_a, len), stretch(f0_b, len));
    let (mut total, mut voiced) = (0.0, 0usize);
    for (&fa, &fb) in a.iter().zip(&b) {
        if fa > 0.0 && fb > 0.0 {
            total += frame_overlap(fa, fb, cfg);
            voiced += 1;
        }
    }
    Ok(if voiced == 0 { 0.0 } else { total / voiced as f64 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct F0Config {
    pub frame_s: f64,
    pub hop_s: f64,
    pub fmin: f64,
    pub fmax: f64,
    /// Frames whose normalized autocorrelation peak falls below this are unvoiced.
    pub voicing_threshold: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            frame_s: 0.032,
            hop_s: 0.010,
            fmin: 60.0,
            fmax: 1000.0,
            voicing_threshold: 0.5,
        }
    }
}

/// Peaks within this fraction of the best are treated as equally good; the
/// shortest such lag wins, which avoids octave-down errors.
const SUBHARMONIC_SLACK: f64 = 0.9;

/// Autocorrelation pitch tracker.
pub fn estimate_f0(clip: &AudioClip, cfg: &F0Config) -> Result<F0Track> {
    let sr = clip.sample_rate() as f64;
    let frame = (cfg.frame_s * sr).round() as usize;
    let hop = ((cfg.hop_s * sr).round() as usize).max(1);
    let min_lag = (sr / cfg.fmax).floor().max(1.0) as usize;
    let max_lag = (sr / cfg.fmin).ceil() as usize;
    if !(cfg.fmin > 0.0 && cfg.fmax > cfg.fmin) || max_lag + 2 >= frame {
        return Err(Error::InvalidConfig(format!(
            "f0 range {}..{} Hz does not fit a {} s frame",
            cfg.fmin, cfg.fmax, cfg.frame_s
        )));
    }
    if clip.len() < frame {
        return Err(Error::InputTooShort(format!(
            "pitch tracking needs {frame} samples, clip has {}",
            clip.len()
        )));
    }
    let x = clip.samples();
    let n_frames = 1 + (x.len() - frame) / hop;
    let mut values = Vec::with_capacity(n_frames);
    let mut r = vec![0.0; max_lag + 2];
    for t in 0..n_frames {
        let seg = &x[t * hop..t * hop + frame];
        for (lag, slot) in r.iter_mut().enumerate().skip(min_lag.saturating_sub(1)) {
            let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
            for n in 0..frame - lag {
                xy += seg[n] * seg[n + lag];
                xx += seg[n] * seg[n];
                yy += seg[n + lag] * seg[n + lag];
            }
            *slot = if xx > 0.0 && yy > 0.0 { xy / (xx * yy).sqrt() } else { 0.0 };
        }
        let peaks: Vec<usize> = (min_lag..=max_lag)
            .filter(|&l| l >= 1 && r[l] >= r[l - 1] && r[l] >= r[l + 1])
            .collect();
        let best = peaks.iter().map(|&l| r[l]).fold(f64::MIN, f64::max);
        if peaks.is_empty() || best < cfg.voicing_threshold {
            values.push(0.0);
            continue;
        }
        let lag = *peaks.iter().find(|&&l| r[l] >= SUBHARMONIC_SLACK * best).expect("best peak qualifies");
        let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 1e-12 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        values.push(sr / (lag as f64 + shift));
    }
    F0Track::new(hop as f64 / sr, values)
}
