//! Separation metrics for two-source estimates.
//!
//! SDR and SI-SDR (and their improvements over the unprocessed mixture) pick one
//! global assignment of estimates to references. Segmental SNR does the same
//! per clip, while the permutation-per-segment variant re-picks the assignment
//! in every segment and so ignores singer swaps across segments. The hybrid
//! score uses the former for different-singer items and the latter for
//! same-singer items.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub const EPS: f64 = 1e-12;
pub const DB_CAP: f64 = 100.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_pair(est: &[f64], reference: &[f64]) -> Result<()> {
    if est.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    if reference.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateReference);
    }
    Ok(())
}

fn ratio_db(num: f64, den: f64) -> f64 {
    (10.0 * ((num + EPS) / (den + EPS)).log10()).min(DB_CAP)
}

/// Scale-invariant SDR in dB, capped at [`DB_CAP`].
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    let alpha = dot(est, reference) / (dot(reference, reference) + EPS);
    let (mut target, mut noise) = (0.0, 0.0);
    for (&e, &r) in est.iter().zip(reference) {
        let t = alpha * r;
        target += t * t;
        noise += (e - t) * (e - t);
    }
    Ok(ratio_db(target, noise))
}

/// Plain energy-ratio SDR in dB, capped at [`DB_CAP`].
pub fn sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    let err: f64 = est.iter().zip(reference).map(|(e, r)| (r - e) * (r - e)).sum();
    Ok(ratio_db(dot(reference, reference), err))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Sdr,
    SiSdr,
}

impl Metric {
    pub fn eval(self, est: &[f64], reference: &[f64]) -> Result<f64> {
        match self {
            Metric::Sdr => sdr(est, reference),
            Metric::SiSdr => si_sdr(est, reference),
        }
    }
}

/// `metric(est, ref) - metric(mix, ref)`.
pub fn improvement(metric: Metric, est: &[f64], reference: &[f64], mix: &[f64]) -> Result<f64> {
    Ok(metric.eval(est, reference)? - metric.eval(mix, reference)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    /// Mean over the two sources under the chosen assignment.
    pub value: f64,
    pub per_source: [f64; 2],
    /// Whether estimate 1 was matched to reference 2.
    pub swapped: bool,
}

/// Pair-level improvement under the global assignment maximizing the mean.
/// Ties keep the identity assignment.
pub fn pair_improvement(metric: Metric, est: [&[f64]; 2], gt: [&[f64]; 2], mix: &[f64]) -> Result<PairScore> {
    let identity = [
        improvement(metric, est[0], gt[0], mix)?,
        improvement(metric, est[1], gt[1], mix)?,
    ];
    let swapped = [
        improvement(metric, est[1], gt[0], mix)?,
        improvement(metric, est[0], gt[1], mix)?,
    ];
    let (mi, ms) = (0.5 * (identity[0] + identity[1]), 0.5 * (swapped[0] + swapped[1]));
    Ok(if ms > mi {
        PairScore {
            value: ms,
            per_source: [swapped[1], swapped[0]],
            swapped: true,
        }
    } else {
        PairScore {
            value: mi,
            per_source: identity,
            swapped: false,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub seg_s: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            seg_s: 1.0,
            clamp_lo: -10.0,
            clamp_hi: 35.0,
        }
    }
}

impl SegmentConfig {
    pub fn seg_len(&self, sample_rate: u32) -> usize {
        (self.seg_s * sample_rate as f64).round().max(1.0) as usize
    }

    /// Segment bounds: full segments, plus the remainder when it is at least half a segment.
    pub fn segments(&self, len: usize, sample_rate: u32) -> Result<Vec<std::ops::Range<usize>>> {
        let seg = self.seg_len(sample_rate);
        if len < seg {
            return Err(Error::InputTooShort(format!(
                "{len} samples, one {}-second segment needs {seg}",
                self.seg_s
            )));
        }
        let mut out: Vec<_> = (0..len / seg).map(|i| i * seg..(i + 1) * seg).collect();
        let rem = len % seg;
        if rem > 0 && 2 * rem >= seg {
            out.push(len - rem..len);
        }
        Ok(out)
    }
}

fn segment_snr(est: &[f64], gt: &[f64], cfg: &SegmentConfig) -> f64 {
    let signal = dot(gt, gt);
    let err: f64 = est.iter().zip(gt).map(|(e, g)| (g - e) * (g - e)).sum();
    (10.0 * ((signal + EPS) / (err + EPS)).log10()).clamp(cfg.clamp_lo, cfg.clamp_hi)
}

/// Per segment: (identity score, swapped score), each summed over both sources.
fn segment_scores(
    est: [&[f64]; 2],
    gt: [&[f64]; 2],
    sample_rate: u32,
    cfg: &SegmentConfig,
) -> Result<Vec<(f64, f64)>> {
    let len = gt[0].len();
    for x in [est[0], est[1], gt[1]] {
        if x.len() != len {
            return Err(Error::ShapeMismatch("segmental SNR needs equal lengths".into()));
        }
    }
    Ok(cfg
        .segments(len, sample_rate)?
        .into_iter()
        .map(|r| {
            let s = |e: &[f64], g: &[f64]| segment_snr(&e[r.clone()], &g[r.clone()], cfg);
            (s(est[0], gt[0]) + s(est[1], gt[1]), s(est[1], gt[0]) + s(est[0], gt[1]))
        })
        .collect())
}

/// Segmental SNR with one global assignment for the whole clip.
pub fn ssnr(est: [&[f64]; 2], gt: [&[f64]; 2], sample_rate: u32, cfg: &SegmentConfig) -> Result<f64> {
    let scores = segment_scores(est, gt, sample_rate, cfg)?;
    let identity: f64 = scores.iter().map(|s| s.0).sum();
    let swapped: f64 = scores.iter().map(|s| s.1).sum();
    Ok(identity.max(swapped) / (2 * scores.len()) as f64)
}

/// Segmental SNR with the assignment re-optimized in every segment.
pub fn pssnr(est: [&[f64]; 2], gt: [&[f64]; 2], sample_rate: u32, cfg: &SegmentConfig) -> Result<f64> {
    let scores = segment_scores(est, gt, sample_rate, cfg)?;
    let total: f64 = scores.iter().map(|s| s.0.max(s.1)).sum();
    Ok(total / (2 * scores.len()) as f64)
}

/// Swap the content of `round(ratio * n_segments)` randomly chosen segments
/// between the two references. For a fixed rng state the swapped sets are
/// nested as `ratio` grows.
pub fn swap_simulate<R: Rng + ?Sized>(
    gt1: &[f64],
    gt2: &[f64],
    ratio: f64,
    seg_len: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidConfig(format!("swap ratio {ratio} outside [0, 1]")));
    }
    if gt1.len() != gt2.len() || seg_len == 0 {
        return Err(Error::ShapeMismatch("swap simulation needs equal lengths".into()));
    }
    let n_seg = gt1.len().div_ceil(seg_len);
    let k = (ratio * n_seg as f64).round() as usize;
    let mut order: Vec<usize> = (0..n_seg).collect();
    order.shuffle(rng);
    let (mut e1, mut e2) = (gt1.to_vec(), gt2.to_vec());
    for &s in &order[..k] {
        let r = s * seg_len..((s + 1) * seg_len).min(gt1.len());
        e1[r.clone()].copy_from_slice(&gt2[r.clone()]);
        e2[r.clone()].copy_from_slice(&gt1[r]);
    }
    Ok((e1, e2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapRow {
    pub ratio: f64,
    pub sdri: f64,
    pub si_sdri: f64,
    pub ssnr: f64,
    pub pssnr: f64,
}

/// Metrics of perfectly separated references after segment swapping, one row per ratio.
/// Every ratio starts from the same rng state.
pub fn swap_sim_table(
    gt1: &AudioClip,
    gt2: &AudioClip,
    ratios: &[f64],
    cfg: &SegmentConfig,
    seed: u64,
) -> Result<Vec<SwapRow>> {
    if gt1.len() != gt2.len() || gt1.sample_rate() != gt2.sample_rate() {
        return Err(Error::ShapeMismatch("references differ in length or rate".into()));
    }
    let sr = gt1.sample_rate();
    let (g1, g2) = (gt1.samples(), gt2.samples());
    let mix: Vec<f64> = g1.iter().zip(g2).map(|(a, b)| a + b).collect();
    ratios
        .iter()
        .map(|&ratio| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (e1, e2) = swap_simulate(g1, g2, ratio, cfg.seg_len(sr), &mut rng)?;
            let est = [e1.as_slice(), e2.as_slice()];
            let gt = [g1, g2];
            Ok(SwapRow {
                ratio,
                sdri: pair_improvement(Metric::Sdr, est, gt, &mix)?.value,
                si_sdri: pair_improvement(Metric::SiSdr, est, gt, &mix)?.value,
                ssnr: ssnr(est, gt, sr, cfg)?,
                pssnr: pssnr(est, gt, sr, cfg)?,
            })
        })
        .collect()
}

/// One evaluation item: mixture, two estimates and two references.
#[derive(Clone, Debug)]
pub struct EvalItem {
    pub id: String,
    pub mix: AudioClip,
    pub est: [AudioClip; 2],
    pub gt: [AudioClip; 2],
    pub same_singer: bool,
}

impl EvalItem {
    fn validate(&self) -> Result<()> {
        let (len, sr) = (self.mix.len(), self.mix.sample_rate());
        for c in self.est.iter().chain(&self.gt) {
            if c.len() != len || c.sample_rate() != sr {
                return Err(Error::ShapeMismatch(format!(
                    "item {}: all five clips must share length and rate",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub id: String,
    pub same_singer: bool,
    pub sdr_i: f64,
    pub si_sdr_i: f64,
    pub ssnr: f64,
    pub pssnr: f64,
    /// PSSNR for same-singer items, SSNR otherwise.
    pub hssnr_contribution: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsetMeans {
    pub count: usize,
    pub sdr_i: Option<f64>,
    pub si_sdr_i: Option<f64>,
    pub ssnr: Option<f64>,
    pub pssnr: Option<f64>,
}

impl SubsetMeans {
    fn from_items<'a>(items: impl Iterator<Item = &'a ItemMetrics>) -> Self {
        let items: Vec<_> = items.collect();
        let mean = |f: fn(&ItemMetrics) -> f64| {
            (!items.is_empty()).then(|| items.iter().map(|m| f(m)).sum::<f64>() / items.len() as f64)
        };
        Self {
            count: items.len(),
            sdr_i: mean(|m| m.sdr_i),
            si_sdr_i: mean(|m| m.si_sdr_i),
            ssnr: mean(|m| m.ssnr),
            pssnr: mean(|m| m.pssnr),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub overall: SubsetMeans,
    pub same_singer: SubsetMeans,
    pub different_singer: SubsetMeans,
    pub hssnr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub items: Vec<ItemMetrics>,
    pub aggregates: Aggregates,
}

pub fn evaluate_item(item: &EvalItem, cfg: &SegmentConfig) -> Result<ItemMetrics> {
    item.validate()?;
    let est = [item.est[0].samples(), item.est[1].samples()];
    let gt = [item.gt[0].samples(), item.gt[1].samples()];
    let mix = item.mix.samples();
    let sr = item.mix.sample_rate();
    let ssnr_v = ssnr(est, gt, sr, cfg)?;
    let pssnr_v = pssnr(est, gt, sr, cfg)?;
    Ok(ItemMetrics {
        id: item.id.clone(),
        same_singer: item.same_singer,
        sdr_i: pair_improvement(Metric::Sdr, est, gt, mix)?.value,
        si_sdr_i: pair_improvement(Metric::SiSdr, est, gt, mix)?.value,
        ssnr: ssnr_v,
        pssnr: pssnr_v,
        hssnr_contribution: if item.same_singer { pssnr_v } else { ssnr_v },
    })
}

/// Mean over items of PSSNR (same singer) or SSNR (different singers).
pub fn hssnr(items: &[ItemMetrics]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Empty("no items for HSSNR"));
    }
    Ok(items
        .iter()
        .map(|m| if m.same_singer { m.pssnr } else { m.ssnr })
        .sum::<f64>()
        / items.len() as f64)
}

/// Evaluate items in parallel; the report is ordered by item id.
pub fn evaluate(items: &[EvalItem], cfg: &SegmentConfig) -> Result<MetricReport> {
    if items.is_empty() {
        return Err(Error::Empty("no evaluation items"));
    }
    let mut per_item: Vec<ItemMetrics> = items
        .par_iter()
        .map(|it| evaluate_item(it, cfg))
        .collect::<Result<_>>()?;
    per_item.sort_by(|a, b| a.id.cmp(&b.id));
    let aggregates = Aggregates {
        overall: SubsetMeans::from_items(per_item.iter()),
        same_singer: SubsetMeans::from_items(per_item.iter().filter(|m| m.same_singer)),
        different_singer: SubsetMeans::from_items(per_item.iter().filter(|m| !m.same_singer)),
        hssnr: hssnr(&per_item)?,
    };
    Ok(MetricReport {
        items: per_item,
        aggregates,
    })
}
