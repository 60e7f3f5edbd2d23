//! STFT / iSTFT with weighted overlap-add, magnitude compression and resampling.
//!
//! Analysis and synthesis share one window; synthesis divides by the summed
//! squared window, so any window whose squares overlap-add to a constant at the
//! configured hop reconstructs exactly. The vector-Jacobian products
//! [`istft_vjp`] and [`stft_vjp`] are the adjoints used by the loss gradients.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Periodic Hann.
    #[default]
    Hann,
    /// Square root of periodic Hann.
    SqrtHann,
    Rectangular,
}

impl WindowKind {
    pub fn samples(self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let hann = 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos();
                match self {
                    WindowKind::Hann => hann,
                    WindowKind::SqrtHann => hann.sqrt(),
                    WindowKind::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: WindowKind,
    /// Zero-pad `window_len / 2` samples on both sides before framing.
    pub center: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 960,
            hop: 240,
            fft_size: 960,
            window: WindowKind::Hann,
            center: false,
        }
    }
}

const COLA_TOL: f64 = 1e-6;
/// Relative floor of the overlap-add normalizer.
pub const SYNTHESIS_FLOOR: f64 = 1e-3;

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn pad(&self) -> usize {
        if self.center {
            self.window_len / 2
        } else {
            0
        }
    }

    pub fn n_frames(&self, signal_len: usize) -> usize {
        let padded = signal_len + 2 * self.pad();
        if padded < self.window_len {
            0
        } else {
            1 + (padded - self.window_len) / self.hop
        }
    }

    /// Summed squared window over one hop period of the steady-state region.
    pub fn cola_profile(&self) -> Vec<f64> {
        let w = self.window.samples(self.window_len);
        (0..self.hop)
            .map(|n| {
                (n..self.window_len)
                    .step_by(self.hop)
                    .map(|i| w[i] * w[i])
                    .sum()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.fft_size {
            return Err(Error::InvalidConfig(format!(
                "need 0 < hop <= window_len <= fft_size, got hop={} window_len={} fft_size={}",
                self.hop, self.window_len, self.fft_size
            )));
        }
        let profile = self.cola_profile();
        let hi = profile.iter().cloned().fold(f64::MIN, f64::max);
        let lo = profile.iter().cloned().fold(f64::MAX, f64::min);
        if hi <= 0.0 || (hi - lo) / hi > COLA_TOL {
            return Err(Error::InvalidConfig(format!(
                "{:?} window of {} samples does not overlap-add to a constant at hop {}",
                self.window, self.window_len, self.hop
            )));
        }
        Ok(())
    }
}

/// Complex STFT grid, frames × bins.
#[derive(Clone, Debug)]
pub struct ComplexSpec {
    grid: Array2<Complex64>,
    config: StftConfig,
    sample_rate: u32,
    source_len: usize,
}

impl ComplexSpec {
    pub fn new(
        grid: Array2<Complex64>,
        config: StftConfig,
        sample_rate: u32,
        source_len: usize,
    ) -> Result<Self> {
        if grid.ncols() != config.n_bins() {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {} bins, config implies {}",
                grid.ncols(),
                config.n_bins()
            )));
        }
        if grid.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("complex spectrogram"));
        }
        Ok(Self {
            grid,
            config,
            sample_rate,
            source_len,
        })
    }

    pub fn grid(&self) -> &Array2<Complex64> {
        &self.grid
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Length of the waveform this grid was computed from.
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn n_frames(&self) -> usize {
        self.grid.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.grid.ncols()
    }

    /// Same metadata, new grid of the same shape.
    pub fn with_grid(&self, grid: Array2<Complex64>) -> Result<Self> {
        if grid.dim() != self.grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "replacement grid {:?} vs {:?}",
                grid.dim(),
                self.grid.dim()
            )));
        }
        ComplexSpec::new(grid, self.config, self.sample_rate, self.source_len)
    }

    /// Elementwise real mask.
    pub fn masked(&self, mask: &Array2<f64>) -> Result<Self> {
        if mask.dim() != self.grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "mask {:?} vs spectrogram {:?}",
                mask.dim(),
                self.grid.dim()
            )));
        }
        let mut grid = self.grid.clone();
        grid.zip_mut_with(mask, |c, &m| *c *= m);
        self.with_grid(grid)
    }

    pub fn magnitude(&self) -> MagSpec {
        MagSpec {
            grid: self.grid.mapv(|c| c.norm()),
            exponent: 1.0,
        }
    }
}

/// Non-negative magnitude grid; `exponent` is 1.0 for raw magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct MagSpec {
    pub grid: Array2<f64>,
    pub exponent: f64,
}

impl MagSpec {
    pub fn new(grid: Array2<f64>, exponent: f64) -> Result<Self> {
        if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(
                "magnitudes must be finite and non-negative".into(),
            ));
        }
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "compression exponent {exponent} outside (0, 1]"
            )));
        }
        Ok(Self { grid, exponent })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.grid.dim()
    }
}

/// `m -> m^p` on every bin of a raw magnitude grid.
pub fn power_compress(mag: &MagSpec, p: f64) -> Result<MagSpec> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "compression exponent {p} outside (0, 1]"
        )));
    }
    if mag.exponent != 1.0 {
        return Err(Error::InvalidConfig(format!(
            "input already compressed with exponent {}",
            mag.exponent
        )));
    }
    Ok(MagSpec {
        grid: mag.grid.mapv(|m| m.powf(p)),
        exponent: p,
    })
}

/// Planned FFTs and the analysis/synthesis window for one configuration.
pub struct StftPlan {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            window: cfg.window.samples(cfg.window_len),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
            cfg,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn forward(&self, clip: &AudioClip) -> Result<ComplexSpec> {
        let cfg = &self.cfg;
        let padded = self.pad_signal(clip.samples());
        if padded.len() < cfg.window_len {
            return Err(Error::InputTooShort(format!(
                "{} samples, window needs {}",
                padded.len(),
                cfg.window_len
            )));
        }
        let n_frames = cfg.n_frames(clip.len());
        let n_bins = cfg.n_bins();
        let mut grid = Array2::zeros((n_frames, n_bins));
        let mut buf = vec![Complex64::default(); cfg.fft_size];
        for t in 0..n_frames {
            let start = t * cfg.hop;
            buf.fill(Complex64::default());
            for (n, b) in buf.iter_mut().take(cfg.window_len).enumerate() {
                b.re = padded[start + n] * self.window[n];
            }
            self.forward.process(&mut buf);
            for f in 0..n_bins {
                grid[[t, f]] = buf[f];
            }
        }
        ComplexSpec::new(grid, *cfg, clip.sample_rate(), clip.len())
    }

    pub fn inverse(&self, spec: &ComplexSpec) -> Result<AudioClip> {
        self.check_spec(spec)?;
        let cfg = &self.cfg;
        let n_frames = spec.n_frames();
        if n_frames == 0 {
            return AudioClip::new(Vec::new(), spec.sample_rate());
        }
        let padded_len = (n_frames - 1) * cfg.hop + cfg.window_len;
        let mut out = vec![0.0; padded_len];
        let denom = self.synthesis_denominator(n_frames);
        let mut buf = vec![Complex64::default(); cfg.fft_size];
        let scale = 1.0 / cfg.fft_size as f64;
        for t in 0..n_frames {
            self.hermitian_fill(spec.grid().row(t).as_slice().unwrap(), &mut buf);
            self.inverse.process(&mut buf);
            let start = t * cfg.hop;
            for n in 0..cfg.window_len {
                out[start + n] += buf[n].re * scale * self.window[n];
            }
        }
        for (o, d) in out.iter_mut().zip(&denom) {
            *o /= d;
        }
        let samples = self.unpad(out, spec.source_len());
        AudioClip::new(samples, spec.sample_rate())
    }

    fn pad_signal(&self, x: &[f64]) -> Vec<f64> {
        let pad = self.cfg.pad();
        let mut padded = vec![0.0; x.len() + 2 * pad];
        padded[pad..pad + x.len()].copy_from_slice(x);
        padded
    }

    fn unpad(&self, padded: Vec<f64>, source_len: usize) -> Vec<f64> {
        if !self.cfg.center {
            return padded;
        }
        let pad = self.cfg.pad();
        let mut out: Vec<f64> = padded.into_iter().skip(pad).collect();
        out.resize(source_len, 0.0);
        out
    }

    fn check_spec(&self, spec: &ComplexSpec) -> Result<()> {
        if spec.config() != &self.cfg {
            return Err(Error::ShapeMismatch(
                "spectrogram was computed with a different STFT configuration".into(),
            ));
        }
        Ok(())
    }

    /// Summed squared window per output sample, floored at [`SYNTHESIS_FLOOR`]
    /// of its peak. Near the outer edges of non-centered frames only one
    /// window tail covers a sample; dividing a masked (inconsistent) frame by
    /// that tail's tiny square would amplify it by orders of magnitude.
    fn synthesis_denominator(&self, n_frames: usize) -> Vec<f64> {
        let cfg = &self.cfg;
        let len = (n_frames - 1) * cfg.hop + cfg.window_len;
        let mut wss = vec![0.0; len];
        for t in 0..n_frames {
            for n in 0..cfg.window_len {
                wss[t * cfg.hop + n] += self.window[n] * self.window[n];
            }
        }
        let peak = wss.iter().cloned().fold(0.0, f64::max);
        let floor = peak * SYNTHESIS_FLOOR;
        wss.into_iter().map(|v| v.max(floor)).collect()
    }

    fn hermitian_fill(&self, half: &[Complex64], buf: &mut [Complex64]) {
        let n = self.cfg.fft_size;
        for f in 0..n {
            buf[f] = if f < half.len() {
                half[f]
            } else {
                half[n - f].conj()
            };
        }
    }

    /// Gradient of a scalar loss w.r.t. the STFT grid fed to [`StftPlan::inverse`],
    /// given the gradient w.r.t. its output samples. Entry `(t, f)` packs
    /// `dL/dRe + i dL/dIm`.
    pub fn inverse_vjp(&self, grad_out: &[f64], like: &ComplexSpec) -> Result<Array2<Complex64>> {
        self.check_spec(like)?;
        let cfg = &self.cfg;
        let n_frames = like.n_frames();
        let n_bins = cfg.n_bins();
        let mut grad = Array2::zeros((n_frames, n_bins));
        if n_frames == 0 {
            return Ok(grad);
        }
        let padded_len = (n_frames - 1) * cfg.hop + cfg.window_len;
        let pad = cfg.pad();
        let mut g = vec![0.0; padded_len];
        for (i, &v) in grad_out.iter().enumerate() {
            if let Some(slot) = g.get_mut(i + pad) {
                *slot = v;
            }
        }
        let denom = self.synthesis_denominator(n_frames);
        let n = cfg.fft_size;
        let mut buf = vec![Complex64::default(); n];
        for t in 0..n_frames {
            buf.fill(Complex64::default());
            let start = t * cfg.hop;
            for k in 0..cfg.window_len {
                buf[k].re = g[start + k] * self.window[k] / denom[start + k];
            }
            self.forward.process(&mut buf);
            for f in 0..n_bins {
                let doubled = f != 0 && !(n % 2 == 0 && f == n / 2);
                let c = if doubled { 2.0 } else { 1.0 };
                grad[[t, f]] = buf[f] * (c / n as f64);
            }
        }
        Ok(grad)
    }

    /// Gradient w.r.t. the analyzed waveform (length `source_len`), given
    /// `dL/dRe + i dL/dIm` for every STFT bin.
    pub fn forward_vjp(&self, grad_spec: &Array2<Complex64>, source_len: usize) -> Result<Vec<f64>> {
        let cfg = &self.cfg;
        if grad_spec.ncols() != cfg.n_bins() || grad_spec.nrows() != cfg.n_frames(source_len) {
            return Err(Error::ShapeMismatch(format!(
                "gradient grid {:?} does not match a {}-sample signal",
                grad_spec.dim(),
                source_len
            )));
        }
        let pad = cfg.pad();
        let mut g = vec![0.0; source_len + 2 * pad];
        let mut buf = vec![Complex64::default(); cfg.fft_size];
        for (t, row) in grad_spec.rows().into_iter().enumerate() {
            buf.fill(Complex64::default());
            for (b, &v) in buf.iter_mut().zip(row.iter()) {
                *b = v;
            }
            self.inverse.process(&mut buf);
            let start = t * cfg.hop;
            for k in 0..cfg.window_len {
                g[start + k] += self.window[k] * buf[k].re;
            }
        }
        Ok(g[pad..pad + source_len].to_vec())
    }
}

pub fn stft(clip: &AudioClip, cfg: &StftConfig) -> Result<ComplexSpec> {
    StftPlan::new(*cfg)?.forward(clip)
}

pub fn istft(spec: &ComplexSpec) -> Result<AudioClip> {
    StftPlan::new(*spec.config())?.inverse(spec)
}

/// Band-limited resampling with a Blackman-windowed sinc kernel.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::InvalidConfig("target rate must be positive".into()));
    }
    let source_rate = clip.sample_rate();
    if source_rate == target_rate {
        return Ok(clip.clone());
    }
    const ZERO_CROSSINGS: f64 = 32.0;
    let ratio = target_rate as f64 / source_rate as f64;
    let out_len = (clip.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0) * 0.97;
    let half_width = ZERO_CROSSINGS / cutoff;
    let x = clip.samples();
    let samples = (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = (t - half_width).ceil().max(0.0) as usize;
            let hi = ((t + half_width).floor() as usize).min(x.len().saturating_sub(1));
            (lo..=hi)
                .map(|k| {
                    let d = t - k as f64;
                    let arg = PI * cutoff * d;
                    let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
                    let u = d / half_width;
                    let blackman = 0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos();
                    x[k] * cutoff * sinc * blackman
                })
                .sum()
        })
        .collect();
    AudioClip::new(samples, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sine(freq: f64, len: usize, sr: u32) -> AudioClip {
        let s = (0..len)
            .map(|n| (2.0 * PI * freq * n as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(s, sr).unwrap()
    }

    /// O(N^2) reference DFT of one windowed frame.
    fn naive_dft(frame: &[f64], n_fft: usize) -> Vec<Complex64> {
        (0..n_fft / 2 + 1)
            .map(|f| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(n, &x)| {
                        Complex64::from_polar(x, -2.0 * PI * (f * n) as f64 / n_fft as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn zero_clip_gives_zero_spec_with_expected_shape() {
        let spec = stft(&AudioClip::silence(4800, 24_000), &StftConfig::default()).unwrap();
        assert_eq!(spec.grid().dim(), (17, 481));
        assert!(spec.grid().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn impulse_matches_naive_dft() {
        let cfg = StftConfig::default();
        let w = cfg.window.samples(cfg.window_len);
        for pos in [0usize, 480] {
            let mut x = vec![0.0; 2000];
            x[pos] = 1.0;
            let spec = stft(&AudioClip::new(x.clone(), 24_000).unwrap(), &cfg).unwrap();
            let frame: Vec<f64> = (0..960).map(|n| x[n] * w[n]).collect();
            let reference = naive_dft(&frame, 960);
            for f in 0..481 {
                assert_abs_diff_eq!(spec.grid()[[0, f]].norm(), w[pos], epsilon = 1e-12);
                assert_abs_diff_eq!(spec.grid()[[0, f]].re, reference[f].re, epsilon = 1e-9);
                assert_abs_diff_eq!(spec.grid()[[0, f]].im, reference[f].im, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn random_frame_matches_naive_dft_and_parseval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cfg = StftConfig {
            window_len: 64,
            hop: 16,
            fft_size: 64,
            ..Default::default()
        };
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = stft(&AudioClip::new(x.clone(), 8000).unwrap(), &cfg).unwrap();
        let w = cfg.window.samples(64);
        let frame: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let reference = naive_dft(&frame, 64);
        for f in 0..33 {
            assert_abs_diff_eq!((spec.grid()[[0, f]] - reference[f]).norm(), 0.0, epsilon = 1e-10);
        }
        // One-sided Parseval: sum |X|^2 with interior bins doubled equals N * sum (w x)^2.
        let spectral: f64 = (0..33)
            .map(|f| {
                let c = if f == 0 || f == 32 { 1.0 } else { 2.0 };
                c * spec.grid()[[0, f]].norm_sqr()
            })
            .sum();
        let temporal: f64 = frame.iter().map(|v| v * v).sum::<f64>() * 64.0;
        assert_abs_diff_eq!(spectral, temporal, epsilon = 1e-9 * temporal);
    }

    #[test]
    fn sine_round_trip_interior() {
        let cfg = StftConfig::default();
        let x = sine(440.0, 24_000, 24_000);
        let y = istft(&stft(&x, &cfg).unwrap()).unwrap();
        let max_err = (960..24_000 - 960)
            .map(|n| (x.samples()[n] - y.samples()[n]).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-6, "max err {max_err}");
    }

    #[test]
    fn centered_mode_preserves_length() {
        let cfg = StftConfig {
            center: true,
            ..Default::default()
        };
        let x = sine(300.0, 5000, 24_000);
        let spec = stft(&x, &cfg).unwrap();
        let y = istft(&spec).unwrap();
        assert_eq!(y.len(), 5000);
        for n in 0..5000 {
            assert_abs_diff_eq!(x.samples()[n], y.samples()[n], epsilon = 1e-9);
        }
    }

    #[test]
    fn istft_edge_cases() {
        let cfg = StftConfig::default();
        let zero = stft(&AudioClip::silence(2400, 24_000), &cfg).unwrap();
        let y = istft(&zero).unwrap();
        assert_eq!(y.len(), (zero.n_frames() - 1) * 240 + 960);
        assert!(y.samples().iter().all(|&v| v == 0.0));

        let one = stft(&AudioClip::silence(960, 24_000), &cfg).unwrap();
        assert_eq!(one.n_frames(), 1);
        assert_eq!(istft(&one).unwrap().len(), 960);

        let empty = ComplexSpec::new(Array2::zeros((0, 481)), cfg, 24_000, 0).unwrap();
        assert!(istft(&empty).unwrap().is_empty());
    }

    #[test]
    fn masked_inverse_does_not_blow_up_edges() {
        // A mask breaks the spectral consistency that normally cancels the
        // near-zero window taper at the signal edges.
        let cfg = StftConfig::default();
        let x = sine(440.0, 9600, 24_000);
        let mut spec = stft(&x, &cfg).unwrap();
        for ((f, k), v) in spec.grid.indexed_iter_mut() {
            *v *= ((f * 7 + k * 3) % 5) as f64 / 4.0;
        }
        let y = istft(&spec).unwrap();
        assert!(y.peak() < 10.0 * x.peak(), "peak {}", y.peak());
    }

    #[test]
    fn short_input_errors() {
        let err = stft(&AudioClip::silence(959, 24_000), &StftConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InputTooShort(_)));
    }

    #[test]
    fn cola_holds_for_defaults_and_fails_for_bad_hop() {
        let cfg = StftConfig::default();
        let p = cfg.cola_profile();
        let hi = p.iter().cloned().fold(f64::MIN, f64::max);
        let lo = p.iter().cloned().fold(f64::MAX, f64::min);
        assert!((hi - lo) / hi < 1e-6);
        assert_abs_diff_eq!(hi, 1.5, epsilon = 1e-9);
        let bad = StftConfig {
            hop: 700,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let inverted = StftConfig {
            hop: 240,
            window_len: 1024,
            fft_size: 960,
            ..Default::default()
        };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn power_compress_cases() {
        let raw = MagSpec::new(Array2::from_shape_vec((1, 3), vec![0.0, 1.0, 4.0]).unwrap(), 1.0)
            .unwrap();
        let c = power_compress(&raw, 0.5).unwrap();
        assert_eq!(c.grid.as_slice().unwrap(), &[0.0, 1.0, 2.0]);
        assert_eq!(c.exponent, 0.5);
        for p in [0.1, 0.3, 1.0] {
            let c = power_compress(&raw, p).unwrap();
            assert_eq!(c.grid[[0, 0]], 0.0);
            assert_eq!(c.grid[[0, 1]], 1.0);
        }
        assert!(power_compress(&raw, 0.0).is_err());
        assert!(power_compress(&raw, 1.5).is_err());
        assert!(power_compress(&c, 0.5).is_err());
    }

    #[test]
    fn resample_identity_and_length() {
        let x = sine(440.0, 2400, 24_000);
        assert_eq!(resample(&x, 24_000).unwrap(), x);
        let y = sine(440.0, 96_000, 48_000);
        let r = resample(&y, 24_000).unwrap();
        assert_eq!(r.len(), 48_000);
        assert_eq!(r.sample_rate(), 24_000);
        assert!(resample(&y, 0).is_err());
    }

    #[test]
    fn resampled_sine_peaks_at_440() {
        let y = sine(440.0, 96_000, 48_000);
        let r = resample(&y, 24_000).unwrap();
        let spec = stft(&r, &StftConfig::default()).unwrap();
        let t = spec.n_frames() / 2;
        let peak = (0..spec.n_bins())
            .max_by(|&a, &b| {
                spec.grid()[[t, a]]
                    .norm()
                    .partial_cmp(&spec.grid()[[t, b]].norm())
                    .unwrap()
            })
            .unwrap();
        // 25 Hz bins: nearest bin to 440 Hz is 18 (450 Hz) or 17 (425 Hz).
        let nearest = (440.0f64 / 25.0).round() as usize;
        assert_eq!(peak, nearest);
    }

    #[test]
    fn vjps_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for center in [false, true] {
            let cfg = StftConfig {
                window_len: 32,
                hop: 8,
                fft_size: 32,
                center,
                ..Default::default()
            };
            let plan = StftPlan::new(cfg).unwrap();
            let x: Vec<f64> = (0..96).map(|_| rng.random_range(-1.0..1.0)).collect();
            let clip = AudioClip::new(x.clone(), 8000).unwrap();
            let spec = plan.forward(&clip).unwrap();
            // Linear functional L(X) = sum Re(conj(A) X); gradient packs A.
            let a = spec.grid().mapv(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let grad_x = plan.forward_vjp(&a, x.len()).unwrap();
            let lin = |xs: &[f64]| -> f64 {
                let s = plan.forward(&AudioClip::new(xs.to_vec(), 8000).unwrap()).unwrap();
                s.grid().iter().zip(a.iter()).map(|(x, a)| (a.conj() * x).re).sum()
            };
            for i in [0usize, 5, 40, 95] {
                let mut xp = x.clone();
                xp[i] += 1e-6;
                let mut xm = x.clone();
                xm[i] -= 1e-6;
                let fd = (lin(&xp) - lin(&xm)) / 2e-6;
                assert_abs_diff_eq!(fd, grad_x[i], epsilon = 1e-6);
            }
            // Inverse adjoint: L(Y) = <g, istft(Y)>.
            let y = plan.inverse(&spec).unwrap();
            let g: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gy = plan.inverse_vjp(&g, &spec).unwrap();
            let lin_inv = |grid: Array2<Complex64>| -> f64 {
                let out = plan.inverse(&spec.with_grid(grid).unwrap()).unwrap();
                out.samples().iter().zip(&g).map(|(a, b)| a * b).sum()
            };
            for (t, f) in [(0usize, 0usize), (2, 3), (5, 16), (4, 7)] {
                if t >= spec.n_frames() {
                    continue;
                }
                for (dir, pick) in [(Complex64::new(1e-6, 0.0), 0), (Complex64::new(0.0, 1e-6), 1)] {
                    let mut p = spec.grid().clone();
                    p[[t, f]] += dir;
                    let mut m = spec.grid().clone();
                    m[[t, f]] -= dir;
                    let fd = (lin_inv(p) - lin_inv(m)) / 2e-6;
                    let an = if pick == 0 { gy[[t, f]].re } else { gy[[t, f]].im };
                    assert_abs_diff_eq!(fd, an, epsilon = 1e-6);
                }
            }
        }
    }
}
