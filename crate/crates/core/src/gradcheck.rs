//! Central finite-difference checks of every analytic loss gradient.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::Result;
use crate::losses::{
    build_interference_mask, mag_loss, penalty_loss, snr_loss, total_loss, MaskProblem, ObjectiveConfig,
};
use crate::stft::{MagSpec, StftConfig, StftPlan};

/// Denominator floor for the relative error, guarding `0 / 0`.
pub const REL_FLOOR: f64 = 1e-8;
/// Round-off amplification assumed for a loss evaluation, in ulps of `|f|`.
const ROUNDOFF_ULPS: f64 = 4.0;
/// Smallest STFT magnitude allowed at a waveform evaluation point.
const KINK_MARGIN: f64 = 1e-3;
const MAX_DRAWS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    pub seed: u64,
    /// Coordinates probed per loss.
    pub trials: usize,
    pub h: f64,
    pub tol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            trials: 100,
            h: 1e-5,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub name: String,
    pub coords: usize,
    pub max_rel_error: f64,
    pub worst_coord: usize,
    /// Coordinates whose gradient lies below [`GradCheckReport::resolution`]
    /// and were therefore judged against that floor.
    pub floored: usize,
    /// Smallest gradient central differences resolve to the tolerance:
    /// the round-off of `(f(x+h) - f(x-h)) / 2h` divided by `tol`.
    pub resolution: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor.max(REL_FLOOR))
}

fn probe(
    name: &str,
    params: &[f64],
    analytic: &[f64],
    f: impl Fn(&[f64]) -> Result<f64>,
    cfg: &GradCheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheckReport> {
    let n = cfg.trials.min(params.len());
    let mut x = params.to_vec();
    let f0 = f(&x)?;
    let resolution = ROUNDOFF_ULPS * f64::EPSILON * f0.abs().max(1.0) / cfg.h / cfg.tol;
    let (mut worst, mut worst_coord, mut floored) = (0.0f64, 0, 0);
    for c in sample(rng, params.len(), n) {
        let orig = x[c];
        x[c] = orig + cfg.h;
        let up = f(&x)?;
        x[c] = orig - cfg.h;
        let down = f(&x)?;
        x[c] = orig;
        let numeric = (up - down) / (2.0 * cfg.h);
        if analytic[c].abs().max(numeric.abs()) < resolution {
            floored += 1;
        }
        let err = relative_error(analytic[c], numeric, resolution);
        if err > worst || err.is_nan() {
            worst = err;
            worst_coord = c;
        }
    }
    log::debug!("{name}: worst relative error {worst:.3e} at coordinate {worst_coord}, {floored} floored");
    Ok(GradCheckReport {
        name: name.to_string(),
        coords: n,
        max_rel_error: worst,
        worst_coord,
        floored,
        resolution,
        passed: worst < cfg.tol,
    })
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn grid(v: &[f64], dim: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_vec(dim, v.to_vec()).expect("grid length")
}

/// Two tones in broadband noise: every bin carries energy, and the spectra
/// are distinct enough that both interference masks are non-empty.
fn noisy_tones(rng: &mut ChaCha8Rng, len: usize, sr: u32) -> Result<[AudioClip; 2]> {
    let mut tone = |f: f64| {
        let noise = normal_vec(rng, len, 0.02);
        AudioClip::new(
            (0..len)
                .map(|n| 0.5 * (2.0 * std::f64::consts::PI * f * n as f64 / sr as f64).sin() + noise[n])
                .collect(),
            sr,
        )
    };
    Ok([tone(300.0)?, tone(2300.0)?])
}

/// Sum of bin-centred sines with random phases over `bins`: energy in every
/// bin of that range and almost none elsewhere.
fn multitone(rng: &mut ChaCha8Rng, bins: std::ops::Range<usize>, fft: usize, len: usize, sr: u32) -> Result<AudioClip> {
    let phases: Vec<(usize, f64)> = bins.map(|k| (k, rng.random_range(0.0..std::f64::consts::TAU))).collect();
    AudioClip::new(
        (0..len)
            .map(|n| {
                phases
                    .iter()
                    .map(|&(k, ph)| 0.1 * (std::f64::consts::TAU * k as f64 * n as f64 / fft as f64 + ph).sin())
                    .sum()
            })
            .collect(),
        sr,
    )
}

fn small_objective() -> ObjectiveConfig {
    ObjectiveConfig {
        stft: StftConfig {
            window_len: 256,
            hop: 64,
            fft_size: 256,
            ..StftConfig::default()
        },
        ..ObjectiveConfig::default()
    }
}

/// Runs the SNR, magnitude, penalty, total and mask-chained checks.
pub fn run_grad_checks(cfg: &GradCheckConfig) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eps = crate::losses::LossWeights::default().eps;
    let mut reports = Vec::with_capacity(5);

    // SNR on random 1000-sample signals.
    let target = normal_vec(&mut rng, 1000, 1.0);
    let est = normal_vec(&mut rng, 1000, 1.0);
    let (_, g) = snr_loss(&est, &target, eps)?;
    reports.push(probe("snr", &est, &g, |x| Ok(snr_loss(x, &target, eps)?.0), cfg, &mut rng)?);

    // Magnitude L2 and penalty on random compressed grids.
    let dim = (16, 24);
    let n = dim.0 * dim.1;
    let reference = MagSpec::new(grid(&(0..n).map(|_| rng.random_range(0.0..2.0)).collect::<Vec<_>>(), dim), 0.5)?;
    let est_mag: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let as_mag = |x: &[f64]| MagSpec {
        grid: grid(x, dim),
        exponent: 0.5,
    };
    let (_, g) = mag_loss(&as_mag(&est_mag), &reference)?;
    reports.push(probe(
        "mag",
        &est_mag,
        g.as_slice().expect("standard layout"),
        |x| Ok(mag_loss(&as_mag(x), &reference)?.0),
        cfg,
        &mut rng,
    )?);

    let own = MagSpec::new(grid(&(0..n).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>(), dim), 0.5)?;
    let other = MagSpec::new(grid(&(0..n).map(|_| rng.random_range(0.5..3.0)).collect::<Vec<_>>(), dim), 0.5)?;
    let mask = build_interference_mask(&own, &other, 1.0, 0.5, 0)?;
    let (_, g) = penalty_loss(&as_mag(&est_mag), &mask, eps)?;
    reports.push(probe(
        "penalty",
        &est_mag,
        g.as_slice().expect("standard layout"),
        |x| Ok(penalty_loss(&as_mag(x), &mask, eps)?.0),
        cfg,
        &mut rng,
    )?);

    // Total objective on waveforms, both estimates flattened into one vector.
    let sr = 8000;
    let len = 2048;
    let objective = small_objective();
    let gt = noisy_tones(&mut rng, len, sr)?;
    // |X|^p has a kink at |X| = 0; central differences straddling it are
    // meaningless, so the estimates are redrawn until every bin is clear of it.
    let plan = StftPlan::new(objective.stft)?;
    let mut flat: Vec<f64> = Vec::with_capacity(2 * len);
    for _ in 0..MAX_DRAWS {
        flat.clear();
        for g in &gt {
            let noise = normal_vec(&mut rng, len, 0.05);
            flat.extend(g.samples().iter().zip(noise).map(|(s, e)| s + e));
        }
        let mut clear = true;
        for part in flat.chunks(len) {
            let spec = plan.forward(&AudioClip::new(part.to_vec(), sr)?)?;
            clear &= spec.grid().iter().all(|c| c.norm() >= KINK_MARGIN);
        }
        if clear {
            break;
        }
    }
    let total_at = |x: &[f64]| -> Result<crate::losses::TotalLoss> {
        let e1 = AudioClip::new(x[..len].to_vec(), sr)?;
        let e2 = AudioClip::new(x[len..].to_vec(), sr)?;
        total_loss([&e1, &e2], [&gt[0], &gt[1]], &objective)
    };
    let base = total_at(&flat)?;
    let analytic: Vec<f64> = base.grads.concat();
    reports.push(probe("total", &flat, &analytic, |x| Ok(total_at(x)?.value), cfg, &mut rng)?);

    // Objective chained through sigmoid masks on a mixture spectrogram. Each
    // source fills one half-band so that every logit moves the loss by far
    // more than the finite-difference round-off.
    let chain_objective = ObjectiveConfig {
        stft: StftConfig {
            window_len: 64,
            hop: 16,
            fft_size: 64,
            ..StftConfig::default()
        },
        ..ObjectiveConfig::default()
    };
    let (fft, chain_len) = (chain_objective.stft.fft_size, 256);
    let low = multitone(&mut rng, 1..fft / 4, fft, chain_len, sr)?;
    let high = multitone(&mut rng, fft / 4..fft / 2, fft, chain_len, sr)?;
    let mix = AudioClip::new(low.samples().iter().zip(high.samples()).map(|(a, b)| a + b).collect(), sr)?;
    let problem = MaskProblem::new(&mix, &low, &high, chain_objective)?;
    debug_assert!(problem.masks().iter().all(|m| m.count() > 0));
    let mdim = problem.dim();
    let m = mdim.0 * mdim.1;
    // Logits away from sigmoid saturation keep every coordinate informative.
    let logits: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let split = |x: &[f64]| [grid(&x[..m], mdim), grid(&x[m..], mdim)];
    let eval = problem.evaluate(&split(&logits))?;
    let analytic: Vec<f64> = eval.grads.iter().flat_map(|g| g.iter().copied()).collect();
    reports.push(probe(
        "mask_chain",
        &logits,
        &analytic,
        |x| Ok(problem.evaluate(&split(x))?.value),
        cfg,
        &mut rng,
    )?);
    Ok(reports)
}
