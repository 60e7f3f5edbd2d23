//! Acceptance suite: one pass/fail line per criterion, exit status 1 if any
//! criterion fails. Criteria 1-3 drive the `unmixx` binary end to end; 4-7
//! exercise the library against test-side oracles.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

use unmixx_core::attention::{
    attention_logits, attention_weights, reverse_split_swap, row_sums, AttentionAxis, AttentionConfig, F3aBlock,
    FeatureTensor, QkvProjections,
};
use unmixx_core::metrics::{evaluate, improvement, pair_improvement, pssnr, ssnr, EvalItem, Metric, SegmentConfig};
use unmixx_core::mim::{
    crop_at_downbeat, generate_mixtures, harmonic_overlap_score, make_mixture, mine_batch, AnnotatedSong,
    HarmonicConfig, MimConfig, MixPair,
};
use unmixx_core::stft::{power_compress, MagSpec, StftConfig, StftPlan};
use unmixx_core::synth::synthetic_corpus;
use unmixx_core::AudioClip;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn unmixx(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_unmixx"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn normal_tensor(rng: &mut ChaCha8Rng, shape: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

// ---------------------------------------------------------------- criterion 1

fn swap_trend() -> Outcome {
    let dir = TempDir::new().unwrap();
    let mut details = Vec::new();
    let (mut per_seed_ok, mut negative_somewhere) = (true, false);
    for seed in 0..5u64 {
        let out = dir.path().join(format!("swap_{seed}.csv"));
        let o = unmixx(&["swap-sim", "--synthetic", "10", "--seed", &seed.to_string(), "--ratios", "0.1,0.2,0.3,0.4,0.5", "--out", p(&out)]);
        if !o.status.success() {
            return Outcome::new(false, format!("swap-sim failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let csv = fs::read_to_string(&out).unwrap();
        let mut lines = csv.lines();
        if lines.next() != Some("ratio,sdri,si_sdri,ssnr,pssnr") {
            return Outcome::new(false, "unexpected CSV header");
        }
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
        let (ratio, sdri, si, ss, ps) = (col(0), col(1), col(2), col(3), col(4));
        let pssnr_spread = ps.iter().map(|v| (v - ps[0]).abs()).fold(0.0, f64::max);
        let a = strictly_decreasing(&sdri) && strictly_decreasing(&si);
        let c = strictly_decreasing(&ss);
        let d = pssnr_spread <= 1e-6;
        negative_somewhere |= ratio.iter().zip(&si).any(|(r, s)| *r >= 0.4 && *s < 0.0);
        per_seed_ok &= a && c && d;
        details.push(format!("seed {seed}: a={a} c={c} d={d} SI-SDRi@50%={:.2}", si[4]));
    }
    Outcome::new(per_seed_ok && negative_somewhere, format!("{}; b={negative_somewhere}", details.join(", ")))
}

// ---------------------------------------------------------------- criterion 2

fn gradients() -> Outcome {
    let o = unmixx(&["grad-check", "--seed", "7", "--trials", "100"]);
    let out = String::from_utf8_lossy(&o.stdout);
    let names = ["snr", "mag", "penalty", "total", "mask_chain"];
    let all_listed = names.iter().all(|n| out.lines().any(|l| l.starts_with(n) && l.contains("over 100 coords")));
    let worst: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("worst relative error: "))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(f64::INFINITY);
    Outcome::new(
        o.status.success() && all_listed && worst < 1e-4,
        format!("exit {:?}, worst relative error {worst:.2e} over 5 losses x 100 coords", o.status.code()),
    )
}

// ---------------------------------------------------------------- criterion 3

fn final_row(csv: &str) -> (f64, f64) {
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let at = |name: &str| last[header.iter().position(|h| *h == name).unwrap()];
    (at("masked_energy"), at("snr_term"))
}

fn penalty_efficacy() -> Outcome {
    let dir = TempDir::new().unwrap();
    let mut finals = Vec::new();
    for lambda in ["0.02", "0"] {
        let out = dir.path().join(format!("traj_{lambda}.csv"));
        let o = unmixx(&["demo-penalty", "--out", p(&out), "--lambda-penalty", lambda, "--steps", "500"]);
        if !o.status.success() {
            return Outcome::new(false, format!("demo-penalty failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let csv = fs::read_to_string(&out).unwrap();
        if csv.lines().count() != 502 {
            return Outcome::new(false, "trajectory does not hold 501 steps");
        }
        finals.push(final_row(&csv));
    }
    let (with, without) = (finals[0], finals[1]);
    let ratio = without.0 / with.0;
    let dsnr = (with.1 - without.1).abs();
    Outcome::new(
        ratio >= 10.0 && dsnr < 1.0,
        format!("masked energy {:.3e} vs {:.3e} ({ratio:.0}x lower), |dL_SNR| = {dsnr:.4} dB", with.0, without.0),
    )
}

// ---------------------------------------------------------------- criterion 4

fn random_axis(rng: &mut ChaCha8Rng) -> AttentionAxis {
    if rng.random_bool(0.5) {
        AttentionAxis::Frequency
    } else {
        AttentionAxis::Time
    }
}

fn random_block(rng: &mut ChaCha8Rng) -> (F3aBlock, (usize, usize, usize)) {
    let heads = rng.random_range(1..=4);
    let n = 2 * heads * rng.random_range(1..=3);
    let mut cfg = AttentionConfig::new(heads, rng.random_range(1..=6), random_axis(rng));
    cfg.residual = rng.random_bool(0.5);
    cfg.layer_norm = rng.random_bool(0.5);
    let shape = (n, rng.random_range(1..=9), rng.random_range(1..=9));
    (
        F3aBlock {
            proj: QkvProjections::random(n, &cfg, rng),
            cfg,
        },
        shape,
    )
}

fn attention_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // (a) rows of both attention maps inside full blocks.
    let mut worst_row = 0.0f64;
    for _ in 0..1000 {
        let (block, shape) = random_block(&mut rng);
        let z = FeatureTensor::new(normal_tensor(&mut rng, shape)).unwrap();
        let trace = block.forward_traced(&z).unwrap();
        for w in trace.self_weights.iter().chain(&trace.cross_weights) {
            for s in row_sums(w.view()) {
                worst_row = worst_row.max((s - 1.0).abs());
            }
        }
    }
    let a = worst_row <= 1e-9;

    // (b) against the raw query-key products.
    let (mut rows, mut mismatched) = (0usize, 0usize);
    for _ in 0..1000 {
        let cfg = AttentionConfig::new(rng.random_range(1..=3), rng.random_range(1..=4), random_axis(&mut rng));
        let shape = (cfg.qk_width(), rng.random_range(2..=8), rng.random_range(2..=8));
        let (q, k) = (normal_tensor(&mut rng, shape), normal_tensor(&mut rng, shape));
        let raw = attention_logits(&q, &k, &cfg).unwrap();
        let pos = attention_weights(&q, &k, &cfg, false).unwrap();
        let neg = attention_weights(&q, &k, &cfg, true).unwrap();
        for h in 0..cfg.heads {
            for i in 0..raw[h].nrows() {
                let (r, wp, wn) = (raw[h].row(i).to_vec(), pos[h].row(i).to_vec(), neg[h].row(i).to_vec());
                rows += 1;
                let ok = argmax(&wp) == argmax(&r)
                    && argmin(&wp) == argmin(&r)
                    && argmax(&wn) == argmin(&r)
                    && argmin(&wn) == argmax(&r);
                mismatched += usize::from(!ok);
            }
        }
    }
    let b = mismatched == 0;

    // (c) swapping twice is the identity; once moves channel c to (c + n/2) mod n.
    let mut c = true;
    for _ in 0..200 {
        let n = 2 * rng.random_range(1..=8);
        let z = FeatureTensor::new(normal_tensor(&mut rng, (n, 3, 5))).unwrap();
        let once = reverse_split_swap(&z).unwrap();
        let moved = (0..n).all(|ch| {
            once.data().index_axis(ndarray::Axis(0), ch) == z.data().index_axis(ndarray::Axis(0), (ch + n / 2) % n)
        });
        c &= moved && reverse_split_swap(&once).unwrap() == z;
    }

    // (d) shape preservation.
    let mut d = true;
    for _ in 0..20 {
        let (block, shape) = random_block(&mut rng);
        let z = FeatureTensor::new(normal_tensor(&mut rng, shape)).unwrap();
        d &= block.forward(&z).unwrap().dim() == shape;
    }
    Outcome::new(
        a && b && c && d,
        format!("a: max |row-1| {worst_row:.1e}; b: {mismatched}/{rows} rows mismatched; c: {c}; d: {d}"),
    )
}

// ---------------------------------------------------------------- criterion 5

/// Brute force over all overtone pairs, counted from both sides.
fn overlap_oracle(fa: f64, fb: f64) -> f64 {
    let count = |x: f64, y: f64| {
        (1..=16)
            .filter(|&p| (1..=16).any(|q| (1200.0 * ((p as f64 * x) / (q as f64 * y)).log2()).abs() < 50.0))
            .count()
    };
    (count(fa, fb) + count(fb, fa)) as f64 / 32.0
}

fn track_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (mut total, mut voiced) = (0.0, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        if x > 0.0 && y > 0.0 {
            total += overlap_oracle(x, y);
            voiced += 1;
        }
    }
    if voiced == 0 {
        0.0
    } else {
        total / voiced as f64
    }
}

fn mim_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // (a) selection within the top B*m scores.
    let mut a = true;
    for _ in 0..1000 {
        let (batch, keep) = (rng.random_range(1..=8), rng.random_range(1..=6));
        let pool = keep + rng.random_range(1..=6);
        let coarse = rng.random_bool(0.5);
        let pairs: Vec<MixPair> = (0..batch * pool)
            .map(|i| MixPair {
                song_a: format!("a{i:03}"),
                song_b: format!("b{i:03}"),
                start_a: 0.0,
                start_b: 0.0,
                length: 4.0,
                gain_a: 1.0,
                gain_b: 1.0,
                // Coarse pools exercise ties at the cutoff.
                harmonic_score: if coarse { rng.random_range(0..5) as f64 / 4.0 } else { rng.random() },
            })
            .collect();
        let mut sorted: Vec<f64> = pairs.iter().map(|p| p.harmonic_score).collect();
        sorted.sort_by(|x, y| y.total_cmp(x));
        let cutoff = sorted[batch * keep - 1];
        let chosen = mine_batch(&pairs, batch, pool, keep, &mut rng).unwrap();
        let mut ids: Vec<&str> = chosen.iter().map(|c| c.song_a.as_str()).collect();
        ids.sort();
        ids.dedup();
        a &= chosen.len() == batch && ids.len() == batch && chosen.iter().all(|c| c.harmonic_score >= cutoff);
    }

    // (b) reference pairs and the brute-force oracle.
    let cfg = HarmonicConfig::default();
    let unison = harmonic_overlap_score(&[220.0; 20], &[220.0; 20], &cfg).unwrap();
    let octave = harmonic_overlap_score(&[220.0; 20], &[440.0; 20], &cfg).unwrap();
    let mut max_diff = 0.0f64;
    for _ in 0..100 {
        let len = rng.random_range(1..50);
        let track = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..len).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(60.0..1000.0) }).collect()
        };
        let (ta, tb) = (track(&mut rng), track(&mut rng));
        let got = harmonic_overlap_score(&ta, &tb, &cfg).unwrap();
        max_diff = max_diff.max((got - track_oracle(&ta, &tb)).abs());
    }
    let b = unison == 1.0 && octave == 0.5 && max_diff == 0.0;

    // (c) crops from random annotations and from the full mining pipeline.
    let mut c = true;
    for _ in 0..100 {
        let sr = 1000;
        let secs = rng.random_range(6.0..20.0);
        let clip = AudioClip::new(normal_vec(&mut rng, (secs * sr as f64) as usize), sr).unwrap();
        let mut downbeats: Vec<f64> = (0..rng.random_range(1..12)).map(|_| (rng.random_range(0.0..secs) * 1000.0).round() / 1000.0).collect();
        downbeats.sort_by(f64::total_cmp);
        downbeats.dedup();
        let song = AnnotatedSong::new("s", clip, downbeats.clone(), downbeats.clone(), None).unwrap();
        for _ in 0..10 {
            if let Ok((seg, start)) = crop_at_downbeat(&song, 4.0, &mut rng) {
                c &= downbeats.contains(&start) && seg.len() == 4000;
            }
        }
    }
    let mut songs = synthetic_corpus(6, 12.0, 8000, 9).unwrap();
    let mim = MimConfig {
        length_s: 2.0,
        batch: 2,
        pool: 4,
        keep: 2,
        ..MimConfig::default()
    };
    let mined = generate_mixtures(&mut songs, 6, &mim, 11).unwrap();
    let downbeats_of = |id: &str| songs.iter().find(|s| s.id == id).unwrap().downbeats.clone();
    for m in &mined {
        c &= downbeats_of(&m.pair.song_a).contains(&m.pair.start_a) && downbeats_of(&m.pair.song_b).contains(&m.pair.start_b);
    }

    // (d) bit-exact additivity, with and without peak normalization.
    let mut d = true;
    for i in 0..200 {
        let (x, y) = (normal_vec(&mut rng, 2000), normal_vec(&mut rng, 2000));
        let scale = if i % 2 == 0 { 0.05 } else { 1.0 };
        let (ga, gb) = (scale * rng.random_range(0.1..1.0), scale * rng.random_range(0.1..1.0));
        let m = make_mixture(&AudioClip::new(x.clone(), 8000).unwrap(), &AudioClip::new(y.clone(), 8000).unwrap(), ga, gb).unwrap();
        let sum_exact = m.mix.samples().iter().zip(m.gt1.samples().iter().zip(m.gt2.samples())).all(|(s, (p, q))| *s == p + q);
        let pre_normalization = m.peak_scale != 1.0
            || m.mix.samples().iter().zip(x.iter().zip(&y)).all(|(s, (p, q))| *s == p * ga + q * gb);
        d &= sum_exact && pre_normalization;
    }
    for m in &mined {
        d &= m.mixture.mix.samples().iter().zip(m.mixture.gt1.samples().iter().zip(m.mixture.gt2.samples())).all(|(s, (p, q))| *s == p + q);
    }
    Outcome::new(
        a && b && c && d,
        format!("a: {a}; b: 220/220={unison} 220/440={octave} oracle max diff {max_diff}; c: {c} ({} mined); d: {d}", mined.len()),
    )
}

// ---------------------------------------------------------------- criterion 6

fn dsp_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let centered = StftPlan::new(StftConfig {
        center: true,
        ..StftConfig::default()
    })
    .unwrap();
    let plain = StftPlan::new(StftConfig::default()).unwrap();
    let (mut worst, mut worst_interior) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let len = rng.random_range(2_000..48_000);
        let x = normal_vec(&mut rng, len);
        let clip = AudioClip::new(x.clone(), 24_000).unwrap();
        let y = centered.inverse(&centered.forward(&clip).unwrap()).unwrap();
        let err: f64 = x.iter().zip(y.samples()).map(|(a, b)| (a - b).powi(2)).sum();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        worst = worst.max((err / energy).sqrt() + (y.len() != len) as u8 as f64);
        // Without padding, samples covered by a full set of overlapping frames.
        let y = plain.inverse(&plain.forward(&clip).unwrap()).unwrap();
        let covered = y.len().min(len);
        let interior = 960..covered.saturating_sub(960);
        let e: f64 = interior.clone().map(|n| (x[n] - y.samples()[n]).powi(2)).sum();
        let s: f64 = interior.map(|n| x[n] * x[n]).sum();
        worst_interior = worst_interior.max((e / s).sqrt());
    }

    // Periodic Hann, summed squared over every hop offset.
    let cfg = StftConfig::default();
    let w: Vec<f64> = (0..cfg.window_len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / cfg.window_len as f64).cos()).collect();
    let oracle: Vec<f64> = (0..cfg.hop).map(|r| (r..cfg.window_len).step_by(cfg.hop).map(|i| w[i] * w[i]).sum()).collect();
    let hi = oracle.iter().cloned().fold(f64::MIN, f64::max);
    let lo = oracle.iter().cloned().fold(f64::MAX, f64::min);
    let profile_diff = cfg.cola_profile().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let cola = (hi - lo) / hi <= 1e-6 && profile_diff <= 1e-12 && cfg.validate().is_ok();

    let mut monotone = true;
    for _ in 0..50 {
        let grid = Array2::from_shape_simple_fn((20, 30), || rng.random_range(0.0..5.0f64).powi(3));
        let pexp = rng.random_range(0.05..=1.0);
        let comp = power_compress(&MagSpec::new(grid.clone(), 1.0).unwrap(), pexp).unwrap();
        let (raw, out): (Vec<f64>, Vec<f64>) = (grid.iter().copied().collect(), comp.grid.iter().copied().collect());
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                if raw[i] < raw[j] && out[i] > out[j] {
                    monotone = false;
                }
            }
        }
    }
    Outcome::new(
        worst < 1e-6 && worst_interior < 1e-6 && cola && monotone,
        format!(
            "round-trip worst {worst:.1e} (centered), {worst_interior:.1e} (interior); COLA spread {:.1e}; monotone {monotone}",
            (hi - lo) / hi
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn metric_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mix_zero = true;
    for _ in 0..100 {
        let n = rng.random_range(500..5000);
        let (g1, g2) = (normal_vec(&mut rng, n), normal_vec(&mut rng, n));
        let mix: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        mix_zero &= improvement(Metric::SiSdr, &mix, &g1, &mix).unwrap() == 0.0;
        mix_zero &= pair_improvement(Metric::SiSdr, [&mix, &mix], [&g1, &g2], &mix).unwrap().value == 0.0;
    }

    let seg = SegmentConfig::default();
    let mut min_gap = f64::INFINITY;
    for _ in 0..500 {
        let n = rng.random_range(1000..8000);
        let (g1, g2) = (normal_vec(&mut rng, n), normal_vec(&mut rng, n));
        let noise = rng.random_range(0.0..2.0);
        let mut e1: Vec<f64> = g1.iter().map(|v| v + noise * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut e2: Vec<f64> = g2.iter().map(|v| v + noise * rng.sample::<f64, _>(StandardNormal)).collect();
        let cut = rng.random_range(0..n);
        for i in cut..n {
            std::mem::swap(&mut e1[i], &mut e2[i]);
        }
        let (est, gt) = ([e1.as_slice(), e2.as_slice()], [g1.as_slice(), g2.as_slice()]);
        min_gap = min_gap.min(pssnr(est, gt, 1000, &seg).unwrap() - ssnr(est, gt, 1000, &seg).unwrap());
    }

    let clip = |v: Vec<f64>| AudioClip::new(v, 1000).unwrap();
    let items: Vec<EvalItem> = (0..8)
        .map(|i| {
            let (g1, g2) = (normal_vec(&mut rng, 3000), normal_vec(&mut rng, 3000));
            let mix: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
            let mut e1 = g1.clone();
            e1[1000..2000].copy_from_slice(&g2[1000..2000]);
            let e2: Vec<f64> = g2.iter().map(|v| 0.9 * v).collect();
            EvalItem {
                id: format!("item{i}"),
                mix: clip(mix),
                est: [clip(e1), clip(e2)],
                gt: [clip(g1), clip(g2)],
                same_singer: i % 3 == 0,
            }
        })
        .collect();
    let report = evaluate(&items, &seg).unwrap();
    let mut total = 0.0;
    for m in &report.items {
        total += if m.same_singer { m.pssnr } else { m.ssnr };
    }
    let hssnr_exact = report.aggregates.hssnr == total / report.items.len() as f64
        && report.items.iter().any(|m| m.same_singer && m.pssnr != m.ssnr);
    Outcome::new(
        mix_zero && min_gap >= 0.0 && hssnr_exact,
        format!("SI-SDRi(mix) exactly 0: {mix_zero}; min PSSNR-SSNR {min_gap:.3} dB over 500 pairs; HSSNR exact: {hssnr_exact}"),
    )
}

// ---------------------------------------------------------------- criterion 8

fn scope_statement() -> Outcome {
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = fs::read_to_string(&readme).unwrap_or_default();
    let stated = text.contains("## Not reproduced") && text.contains("trained");
    Outcome::new(
        stated,
        "trained-model scores and ablations need large-scale vocal training data; scope documented in README",
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("swap-simulation trend on a same-singer proxy", Duration::from_secs(30), swap_trend),
        ("analytic gradients match central differences", Duration::from_secs(10), gradients),
        ("penalty lowers masked-bin energy >= 10x", Duration::from_secs(60), penalty_efficacy),
        ("cross-source attention mechanics", Duration::from_secs(20), attention_checks),
        ("musically informed mixing pipeline", Duration::from_secs(20), mim_checks),
        ("STFT, COLA and compression", Duration::from_secs(10), dsp_checks),
        ("metric sanity", Duration::from_secs(20), metric_checks),
        ("out-of-scope results stated", Duration::from_secs(1), scope_statement),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let passed = outcome.passed && elapsed <= *budget;
        failures += usize::from(!passed);
        println!(
            "criterion {}: {} | {name} | {} | {:.2}s (budget {}s)",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", criteria.len());
}
