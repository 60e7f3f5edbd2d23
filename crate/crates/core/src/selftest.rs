//! Invariant suite on synthetic signals, run by `unmixx selftest`.
//!
//! Each check is a scaled-down version of a library property: STFT
//! reconstruction, attention normalization and reversal, mining and mixing,
//! metric arithmetic, gradient agreement, the swap trend and the penalty demo.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::attention::{
    attention_weights, f3a_forward, reverse_split_swap, row_sums, AttentionAxis, AttentionConfig, FeatureTensor,
    QkvProjections,
};
use crate::audio::AudioClip;
use crate::error::Result;
use crate::gradcheck::{run_grad_checks, GradCheckConfig};
use crate::losses::{optimize_masks_demo, two_sine_mixture, DemoConfig, DEMO_AMPLITUDE, DEMO_FREQS, DEMO_SAMPLE_RATE, DEMO_SECONDS};
use crate::metrics::{hssnr, improvement, pssnr, ssnr, swap_sim_table, ItemMetrics, Metric, SegmentConfig};
use crate::mim::{crop_at_downbeat, harmonic_overlap_score, make_mixture, mine_batch, AnnotatedSong, HarmonicConfig, MixPair};
use crate::stft::{power_compress, MagSpec, StftConfig, StftPlan};
use crate::synth::same_singer_pair;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<CheckResult>;

const CHECKS: &[(&str, Check)] = &[
    ("stft_roundtrip", stft_roundtrip),
    ("cola", cola),
    ("compression_monotone", compression_monotone),
    ("attention_rows_sum_to_one", attention_rows),
    ("negation_reverses_ranking", negation_reverses),
    ("split_swap_involution", swap_involution),
    ("f3a_preserves_shape", f3a_shape),
    ("mine_within_top_pool", mine_subset),
    ("harmonic_reference_pairs", harmonic_references),
    ("crops_start_on_downbeats", crop_on_downbeats),
    ("mix_is_sum_of_references", mix_additivity),
    ("si_sdri_of_mixture_is_zero", si_sdri_mix),
    ("pssnr_at_least_ssnr", pssnr_ge_ssnr),
    ("hssnr_branches", hssnr_branches),
    ("gradient_checks", grad_checks),
    ("swap_trend", swap_trend),
    ("penalty_demo", penalty_demo),
];

/// Names of all checks, in run order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check with its own rng derived from `seed`. Errors inside a
/// check are reported as failures rather than aborting the suite.
pub fn run_selftest(seed: u64) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let started = std::time::Instant::now();
            let result = check(&mut rng).unwrap_or_else(|e| CheckResult::new(name, false, format!("error: {e}")));
            log::info!("{name}: {} in {:.2?}", if result.passed { "pass" } else { "FAIL" }, started.elapsed());
            result
        })
        .collect()
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn normal_tensor(rng: &mut ChaCha8Rng, n: usize, k: usize, t: usize) -> Array3<f64> {
    Array3::from_shape_simple_fn((n, k, t), || rng.sample(StandardNormal))
}

fn stft_roundtrip(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    // Centered framing covers every sample with full windows.
    let plan = StftPlan::new(StftConfig {
        center: true,
        ..StftConfig::default()
    })?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let len = rng.random_range(4_800..24_000);
        let clip = AudioClip::new(normal_vec(rng, len), 24_000)?;
        let back = plan.inverse(&plan.forward(&clip)?)?;
        let err: f64 = clip.samples().iter().zip(back.samples()).map(|(a, b)| (a - b).powi(2)).sum();
        worst = worst.max((err / clip.energy()).sqrt());
    }
    Ok(CheckResult::new("stft_roundtrip", worst < 1e-6, format!("worst relative error {worst:.2e}")))
}

fn cola(_: &mut ChaCha8Rng) -> Result<CheckResult> {
    let cfg = StftConfig::default();
    let profile = cfg.cola_profile();
    let hi = profile.iter().cloned().fold(f64::MIN, f64::max);
    let lo = profile.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    Ok(CheckResult::new("cola", spread < 1e-6 && cfg.validate().is_ok(), format!("relative spread {spread:.2e}")))
}

fn compression_monotone(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut values: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..10.0)).collect();
    values.push(0.0);
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mag = MagSpec::new(ndarray::Array2::from_shape_vec((1, n), values).expect("1 x n"), 1.0)?;
    let comp = power_compress(&mag, 0.5)?;
    let row: Vec<f64> = comp.grid.iter().copied().collect();
    let ok = row.windows(2).all(|w| w[0] <= w[1]) && row[0] == 0.0;
    Ok(CheckResult::new("compression_monotone", ok, format!("{n} sorted magnitudes")))
}

fn random_attention_case(rng: &mut ChaCha8Rng) -> Result<(Array3<f64>, Array3<f64>, AttentionConfig)> {
    let heads = rng.random_range(1..=3);
    let embed = rng.random_range(1..=4);
    let axis = if rng.random_bool(0.5) { AttentionAxis::Frequency } else { AttentionAxis::Time };
    let cfg = AttentionConfig::new(heads, embed, axis);
    let (k, t) = (rng.random_range(2..8), rng.random_range(2..8));
    let q = normal_tensor(rng, cfg.qk_width(), k, t);
    let kk = normal_tensor(rng, cfg.qk_width(), k, t);
    Ok((q, kk, cfg))
}

fn attention_rows(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (q, k, cfg) = random_attention_case(rng)?;
        for negate in [false, true] {
            for w in attention_weights(&q, &k, &cfg, negate)? {
                for s in row_sums(w.view()) {
                    worst = worst.max((s - 1.0).abs());
                }
            }
        }
    }
    Ok(CheckResult::new("attention_rows_sum_to_one", worst <= 1e-9, format!("max |row sum - 1| = {worst:.2e}")))
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).expect("non-empty row")
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).expect("non-empty row")
}

fn negation_reverses(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let (mut rows, mut bad) = (0usize, 0usize);
    for _ in 0..100 {
        let (q, k, cfg) = random_attention_case(rng)?;
        let pos = attention_weights(&q, &k, &cfg, false)?;
        let neg = attention_weights(&q, &k, &cfg, true)?;
        for (p, n) in pos.iter().zip(&neg) {
            for (rp, rn) in p.rows().into_iter().zip(n.rows()) {
                let (rp, rn) = (rp.to_vec(), rn.to_vec());
                rows += 1;
                if argmax(&rp) != argmin(&rn) || argmin(&rp) != argmax(&rn) {
                    bad += 1;
                }
            }
        }
    }
    Ok(CheckResult::new("negation_reverses_ranking", bad == 0, format!("{bad} of {rows} rows disagree")))
}

fn swap_involution(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut ok = true;
    for _ in 0..50 {
        let n = 2 * rng.random_range(1..6);
        let z = FeatureTensor::new(normal_tensor(rng, n, 3, 4))?;
        let once = reverse_split_swap(&z)?;
        ok &= reverse_split_swap(&once)? == z && once != z;
    }
    Ok(CheckResult::new("split_swap_involution", ok, "50 random tensors"))
}

fn f3a_shape(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut ok = true;
    for _ in 0..5 {
        let heads = rng.random_range(1..=2);
        let n = 2 * heads * rng.random_range(1..=3);
        let axis = if rng.random_bool(0.5) { AttentionAxis::Frequency } else { AttentionAxis::Time };
        let cfg = AttentionConfig::new(heads, rng.random_range(1..=4), axis);
        let proj = QkvProjections::random(n, &cfg, rng);
        let (k, t) = (rng.random_range(2..6), rng.random_range(2..6));
        let z = FeatureTensor::new(normal_tensor(rng, n, k, t))?;
        ok &= f3a_forward(&z, &proj, &cfg)?.dim() == z.dim();
    }
    Ok(CheckResult::new("f3a_preserves_shape", ok, "5 random configurations"))
}

fn mine_subset(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let (batch, pool, keep) = (4, 8, 3);
    let mut ok = true;
    for _ in 0..100 {
        let pairs: Vec<MixPair> = (0..batch * pool)
            .map(|i| MixPair {
                song_a: format!("a{i}"),
                song_b: format!("b{i}"),
                start_a: 0.0,
                start_b: 0.0,
                length: 1.0,
                gain_a: 1.0,
                gain_b: 1.0,
                harmonic_score: (rng.random_range(0..20) as f64) / 20.0,
            })
            .collect();
        let mut scores: Vec<f64> = pairs.iter().map(|p| p.harmonic_score).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let cutoff = scores[batch * keep - 1];
        let chosen = mine_batch(&pairs, batch, pool, keep, rng)?;
        ok &= chosen.len() == batch && chosen.iter().all(|p| p.harmonic_score >= cutoff);
    }
    Ok(CheckResult::new("mine_within_top_pool", ok, "100 random pools"))
}

fn harmonic_references(_: &mut ChaCha8Rng) -> Result<CheckResult> {
    let cfg = HarmonicConfig::default();
    let unison = harmonic_overlap_score(&[220.0; 10], &[220.0; 10], &cfg)?;
    let octave = harmonic_overlap_score(&[220.0; 10], &[440.0; 10], &cfg)?;
    Ok(CheckResult::new(
        "harmonic_reference_pairs",
        unison == 1.0 && octave == 0.5,
        format!("220/220 -> {unison}, 220/440 -> {octave}"),
    ))
}

fn crop_on_downbeats(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let sr = 1000;
    let clip = AudioClip::new(normal_vec(rng, 20 * sr as usize), sr)?;
    let downbeats: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 0.25).collect();
    let song = AnnotatedSong::new("s", clip, downbeats.clone(), downbeats.clone(), None)?;
    let mut ok = true;
    for _ in 0..200 {
        let (seg, start) = crop_at_downbeat(&song, 4.0, rng)?;
        ok &= downbeats.contains(&start) && seg.len() == 4 * sr as usize;
    }
    Ok(CheckResult::new("crops_start_on_downbeats", ok, "200 crops"))
}

fn mix_additivity(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut ok = true;
    for _ in 0..20 {
        let a = AudioClip::new(normal_vec(rng, 4000), 8000)?;
        let b = AudioClip::new(normal_vec(rng, 4000), 8000)?;
        let m = make_mixture(&a, &b, rng.random_range(0.1..2.0), rng.random_range(0.1..2.0))?;
        ok &= m
            .mix
            .samples()
            .iter()
            .zip(m.gt1.samples().iter().zip(m.gt2.samples()))
            .all(|(x, (p, q))| *x == p + q);
    }
    Ok(CheckResult::new("mix_is_sum_of_references", ok, "20 random mixtures, exact equality"))
}

fn si_sdri_mix(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let g = normal_vec(rng, 2000);
        let mix: Vec<f64> = g.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect();
        worst = worst.max(improvement(Metric::SiSdr, &mix, &g, &mix)?.abs());
    }
    Ok(CheckResult::new("si_sdri_of_mixture_is_zero", worst == 0.0, format!("max |SI-SDRi| = {worst}")))
}

fn pssnr_ge_ssnr(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let cfg = SegmentConfig::default();
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let len = rng.random_range(1000..5000);
        let (g1, g2, e1, e2) = (normal_vec(rng, len), normal_vec(rng, len), normal_vec(rng, len), normal_vec(rng, len));
        let est = [e1.as_slice(), e2.as_slice()];
        let gt = [g1.as_slice(), g2.as_slice()];
        worst = worst.min(pssnr(est, gt, 1000, &cfg)? - ssnr(est, gt, 1000, &cfg)?);
    }
    Ok(CheckResult::new("pssnr_at_least_ssnr", worst >= 0.0, format!("min PSSNR - SSNR = {worst:.3e}")))
}

fn hssnr_branches(_: &mut ChaCha8Rng) -> Result<CheckResult> {
    let item = |same_singer, ssnr, pssnr| ItemMetrics {
        id: String::new(),
        same_singer,
        sdr_i: 0.0,
        si_sdr_i: 0.0,
        ssnr,
        pssnr,
        hssnr_contribution: 0.0,
    };
    let different = hssnr(&[item(false, 10.0, 30.0), item(false, 20.0, 30.0)])?;
    let same = hssnr(&[item(true, 10.0, 30.0), item(true, 0.0, 20.0)])?;
    let mixed = hssnr(&[item(false, 10.0, 99.0), item(true, -5.0, 20.0)])?;
    Ok(CheckResult::new(
        "hssnr_branches",
        different == 15.0 && same == 25.0 && mixed == 15.0,
        format!("{different}, {same}, {mixed} (expected 15, 25, 15)"),
    ))
}

fn grad_checks(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let cfg = GradCheckConfig {
        seed: rng.random(),
        ..GradCheckConfig::default()
    };
    let reports = run_grad_checks(&cfg)?;
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let detail = reports
        .iter()
        .map(|r| format!("{} {:.1e}", r.name, r.max_rel_error))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(CheckResult::new("gradient_checks", reports.iter().all(|r| r.passed) && worst < cfg.tol, detail))
}

fn swap_trend(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let seed = rng.random_range(0..5);
    let [g1, g2] = same_singer_pair(seed, 10.0, 24_000)?;
    let ratios = [0.1, 0.2, 0.3, 0.4, 0.5];
    let rows = swap_sim_table(&g1, &g2, &ratios, &SegmentConfig::default(), seed)?;
    let decreasing = |f: fn(&crate::metrics::SwapRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let p0 = rows[0].pssnr;
    let ok = decreasing(|r| r.sdri)
        && decreasing(|r| r.si_sdri)
        && decreasing(|r| r.ssnr)
        && rows.iter().all(|r| (r.pssnr - p0).abs() <= 1e-6);
    let last = rows.last().expect("five ratios");
    Ok(CheckResult::new(
        "swap_trend",
        ok,
        format!("seed family {seed}: SI-SDRi at 50% = {:.2} dB, PSSNR {:.2} dB", last.si_sdri, p0),
    ))
}

fn penalty_demo(_: &mut ChaCha8Rng) -> Result<CheckResult> {
    let [mix, s1, s2] = two_sine_mixture(DEMO_FREQS, DEMO_AMPLITUDE, DEMO_SECONDS, DEMO_SAMPLE_RATE)?;
    let run = |lambda: f64| {
        let mut cfg = DemoConfig::default();
        cfg.objective.weights.lambda_penalty = lambda;
        optimize_masks_demo(&mix, &s1, &s2, &cfg).map(|t| *t.last().expect("steps + 1 rows"))
    };
    let (with, without) = (run(0.02)?, run(0.0)?);
    let ratio = without.masked_energy / with.masked_energy.max(f64::MIN_POSITIVE);
    let dsnr = (with.snr_term - without.snr_term).abs();
    Ok(CheckResult::new(
        "penalty_demo",
        ratio >= 10.0 && dsnr < 1.0,
        format!("masked energy ratio {ratio:.1}x, |dL_SNR| = {dsnr:.3} dB"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes_at_default_seed() {
        let results = run_selftest(7);
        assert_eq!(results.len(), check_names().len());
        for r in &results {
            println!("{:<30} {} {}", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
        }
        assert!(results.iter().all(|r| r.passed));
    }
}
