//! Full-frequency-frame attention (F3A) with self- and cross-source (reverse) attention.
//!
//! The input `N x K x T` tensor is split along channels into two singer halves.
//! Swapping the halves gives the reversed input from which the cross-source
//! queries are projected; their logits against the ordinary keys are negated
//! before the softmax so that positions where the two halves agree receive the
//! least weight. The block output averages self- and cross-source attention
//! applied to the same values.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandsplit::Affine;
use crate::error::{Error, Result};

/// Feature tensor `[N channels x K sub-bands x T frames]`, all entries finite.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    data: Array3<f64>,
}

impl FeatureTensor {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature tensor"));
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros(n: usize, k: usize, t: usize) -> Self {
        Self {
            data: Array3::zeros((n, k, t)),
        }
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    /// `(N, K, T)`.
    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn channels(&self, range: std::ops::Range<usize>) -> FeatureTensor {
        FeatureTensor {
            data: self.data.slice(s![range, .., ..]).to_owned(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionAxis {
    /// Attend across the K sub-bands; each position is flattened over (E, T).
    Frequency,
    /// Attend across the T frames; each position is flattened over (E, K).
    Time,
}

pub const MAX_QK_WIDTH: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub heads: usize,
    pub embed_per_head: usize,
    pub axis: AttentionAxis,
    /// Add the block input to its output.
    pub residual: bool,
    /// Channel-wise layer normalization before projecting.
    pub layer_norm: bool,
}

impl AttentionConfig {
    pub fn new(heads: usize, embed_per_head: usize, axis: AttentionAxis) -> Self {
        Self {
            heads,
            embed_per_head,
            axis,
            residual: true,
            layer_norm: true,
        }
    }

    pub fn qk_width(&self) -> usize {
        self.heads * self.embed_per_head
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.heads == 0 || self.embed_per_head == 0 {
            return Err(Error::InvalidConfig("heads and embedding size must be positive".into()));
        }
        if n % self.heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "{} heads do not divide {} channels",
                self.heads, n
            )));
        }
        if self.qk_width() > MAX_QK_WIDTH {
            return Err(Error::InvalidConfig(format!(
                "heads x embed = {} exceeds {}",
                self.qk_width(),
                MAX_QK_WIDTH
            )));
        }
        Ok(())
    }
}

/// 1x1 convolutions: `q`, `k`, `q_rev` map `N -> A*E`, `v` and `out` map `N -> N`.
#[derive(Clone, Debug, PartialEq)]
pub struct QkvProjections {
    pub q: Affine,
    pub k: Affine,
    pub v: Affine,
    pub q_rev: Affine,
    pub out: Affine,
}

impl QkvProjections {
    pub fn random<R: Rng + ?Sized>(n: usize, cfg: &AttentionConfig, rng: &mut R) -> Self {
        let w = cfg.qk_width();
        Self {
            q: Affine::random(w, n, rng),
            k: Affine::random(w, n, rng),
            v: Affine::random(n, n, rng),
            q_rev: Affine::random(w, n, rng),
            out: Affine::random(n, n, rng),
        }
    }

    pub fn zeros(n: usize, cfg: &AttentionConfig) -> Self {
        let w = cfg.qk_width();
        Self {
            q: Affine::zeros(w, n),
            k: Affine::zeros(w, n),
            v: Affine::zeros(n, n),
            q_rev: Affine::zeros(w, n),
            out: Affine::zeros(n, n),
        }
    }

    fn validate(&self, n: usize, cfg: &AttentionConfig) -> Result<()> {
        let w = cfg.qk_width();
        let shapes = [
            ("q", &self.q, w),
            ("k", &self.k, w),
            ("q_rev", &self.q_rev, w),
            ("v", &self.v, n),
            ("out", &self.out, n),
        ];
        for (name, a, out_dim) in shapes {
            if a.in_dim() != n || a.out_dim() != out_dim {
                return Err(Error::ShapeMismatch(format!(
                    "{name} projection is {}x{}, expected {out_dim}x{n}",
                    a.out_dim(),
                    a.in_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Pointwise (1x1) convolution over the channel axis.
pub fn conv1x1(x: &Array3<f64>, a: &Affine) -> Array3<f64> {
    let (n, k, t) = x.dim();
    let flat = x
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n, k * t))
        .expect("standard layout reshapes");
    let mut y = a.weight.dot(&flat);
    for (mut row, &b) in y.axis_iter_mut(Axis(0)).zip(&a.bias) {
        row += b;
    }
    y.into_shape_with_order((a.out_dim(), k, t))
        .expect("standard layout reshapes")
}

/// Swap the front and back channel halves.
pub fn reverse_split_swap(z: &FeatureTensor) -> Result<FeatureTensor> {
    let (n, _, _) = z.dim();
    if n % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "channel count {n} is odd, cannot split into two halves"
        )));
    }
    let half = n / 2;
    let mut data = Array3::zeros(z.dim());
    data.slice_mut(s![..half, .., ..])
        .assign(&z.data.slice(s![half.., .., ..]));
    data.slice_mut(s![half.., .., ..])
        .assign(&z.data.slice(s![..half, .., ..]));
    Ok(FeatureTensor { data })
}

/// Numerically stable softmax of one row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-head `L x L` attention matrices, rows indexed by query position.
pub type AttentionMatrix = Vec<Array2<f64>>;

/// Slice of `x` for one head, arranged as `[positions x (chunk * other)]`.
fn head_matrix(x: &Array3<f64>, head: usize, chunk: usize, axis: AttentionAxis) -> Array2<f64> {
    let part = x.slice(s![head * chunk..(head + 1) * chunk, .., ..]);
    let (c, k, t) = part.dim();
    match axis {
        AttentionAxis::Frequency => {
            Array2::from_shape_fn((k, c * t), |(pos, j)| part[[j / t, pos, j % t]])
        }
        AttentionAxis::Time => {
            Array2::from_shape_fn((t, c * k), |(pos, j)| part[[j / k, j % k, pos]])
        }
    }
}

/// Raw (unscaled, unsigned) query-key products per head.
pub fn attention_logits(q: &Array3<f64>, k: &Array3<f64>, cfg: &AttentionConfig) -> Result<AttentionMatrix> {
    if q.dim() != k.dim() || q.dim().0 != cfg.qk_width() {
        return Err(Error::ShapeMismatch(format!(
            "query {:?} and key {:?} must both have {} channels",
            q.dim(),
            k.dim(),
            cfg.qk_width()
        )));
    }
    Ok((0..cfg.heads)
        .map(|h| {
            let qm = head_matrix(q, h, cfg.embed_per_head, cfg.axis);
            let km = head_matrix(k, h, cfg.embed_per_head, cfg.axis);
            qm.dot(&km.t())
        })
        .collect())
}

/// Softmax over keys of `sign * Q K^T / sqrt(E * other)`, `sign = -1` when `negate`.
/// The scale flattens the non-attended axis: `sqrt(E*T)` for frequency
/// attention, `sqrt(E*K)` for time attention.
pub fn attention_weights(
    q: &Array3<f64>,
    k: &Array3<f64>,
    cfg: &AttentionConfig,
    negate: bool,
) -> Result<AttentionMatrix> {
    let (_, kk, tt) = q.dim();
    let other = match cfg.axis {
        AttentionAxis::Frequency => tt,
        AttentionAxis::Time => kk,
    };
    let scale = ((cfg.embed_per_head * other) as f64).sqrt();
    let sign = if negate { -1.0 } else { 1.0 };
    attention_logits(q, k, cfg)?
        .into_iter()
        .map(|raw| {
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("attention logits"));
            }
            let mut w = raw;
            for mut row in w.rows_mut() {
                let scaled: Vec<f64> = row.iter().map(|&l| sign * l / scale).collect();
                for (dst, v) in row.iter_mut().zip(softmax(&scaled)) {
                    *dst = v;
                }
            }
            Ok(w)
        })
        .collect()
}

/// Apply per-head attention to a value tensor `[N x K x T]` along `axis`.
fn attend(weights: &AttentionMatrix, v: &Array3<f64>, axis: AttentionAxis) -> Array3<f64> {
    let heads = weights.len();
    let (n, k, t) = v.dim();
    let chunk = n / heads;
    let mut out = Array3::zeros((n, k, t));
    for (h, a) in weights.iter().enumerate() {
        let vm = head_matrix(v, h, chunk, axis);
        let om = a.dot(&vm);
        let mut dst = out.slice_mut(s![h * chunk..(h + 1) * chunk, .., ..]);
        match axis {
            AttentionAxis::Frequency => {
                for ((c, kk, tt), slot) in dst.indexed_iter_mut() {
                    *slot = om[[kk, c * t + tt]];
                }
            }
            AttentionAxis::Time => {
                for ((c, kk, tt), slot) in dst.indexed_iter_mut() {
                    *slot = om[[tt, c * k + kk]];
                }
            }
        }
    }
    out
}

/// Layer normalization across channels at every (sub-band, frame) position.
pub fn channel_layer_norm(x: &Array3<f64>) -> Array3<f64> {
    const EPS: f64 = 1e-5;
    let mut y = x.clone();
    let n = x.dim().0 as f64;
    for mut lane in y.lanes_mut(Axis(0)) {
        let mean = lane.sum() / n;
        let var = lane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + EPS).sqrt();
        lane.mapv_inplace(|v| (v - mean) * inv);
    }
    y
}

/// Intermediate values of one F3A pass.
#[derive(Clone, Debug)]
pub struct F3aTrace {
    pub self_weights: AttentionMatrix,
    pub cross_weights: AttentionMatrix,
    pub values: Array3<f64>,
    /// `0.5 * (A_self V + A_cs V)` before the head merge.
    pub attended: Array3<f64>,
    pub output: FeatureTensor,
}

/// One F3A block: projections plus configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct F3aBlock {
    pub proj: QkvProjections,
    pub cfg: AttentionConfig,
}

impl F3aBlock {
    pub fn random<R: Rng + ?Sized>(n: usize, cfg: AttentionConfig, rng: &mut R) -> Self {
        Self {
            proj: QkvProjections::random(n, &cfg, rng),
            cfg,
        }
    }

    pub fn forward(&self, z: &FeatureTensor) -> Result<FeatureTensor> {
        f3a_forward(z, &self.proj, &self.cfg)
    }

    pub fn forward_traced(&self, z: &FeatureTensor) -> Result<F3aTrace> {
        f3a_trace(z, &self.proj, &self.cfg)
    }
}

pub fn f3a_forward(z: &FeatureTensor, proj: &QkvProjections, cfg: &AttentionConfig) -> Result<FeatureTensor> {
    Ok(f3a_trace(z, proj, cfg)?.output)
}

fn f3a_trace(z: &FeatureTensor, proj: &QkvProjections, cfg: &AttentionConfig) -> Result<F3aTrace> {
    let (n, _, _) = z.dim();
    if n % 2 != 0 {
        return Err(Error::ShapeMismatch(format!("channel count {n} is odd")));
    }
    cfg.validate(n)?;
    proj.validate(n, cfg)?;

    let normed = if cfg.layer_norm {
        FeatureTensor {
            data: channel_layer_norm(&z.data),
        }
    } else {
        z.clone()
    };
    let reversed = reverse_split_swap(&normed)?;
    let q = conv1x1(&normed.data, &proj.q);
    let k = conv1x1(&normed.data, &proj.k);
    let v = conv1x1(&normed.data, &proj.v);
    let q_rev = conv1x1(&reversed.data, &proj.q_rev);

    let self_weights = attention_weights(&q, &k, cfg, false)?;
    let cross_weights = attention_weights(&q_rev, &k, cfg, true)?;
    let attended = (attend(&self_weights, &v, cfg.axis) + attend(&cross_weights, &v, cfg.axis)) * 0.5;

    let mut out = conv1x1(&attended, &proj.out);
    if cfg.residual {
        out += &z.data;
    }
    Ok(F3aTrace {
        self_weights,
        cross_weights,
        values: v,
        attended,
        output: FeatureTensor::new(out)?,
    })
}

/// A frequency-axis block followed by a time-axis block.
#[derive(Clone, Debug, PartialEq)]
pub struct F3aLayer {
    pub frequency: F3aBlock,
    pub time: F3aBlock,
}

impl F3aLayer {
    pub fn random<R: Rng + ?Sized>(n: usize, heads: usize, embed: usize, rng: &mut R) -> Self {
        Self {
            frequency: F3aBlock::random(n, AttentionConfig::new(heads, embed, AttentionAxis::Frequency), rng),
            time: F3aBlock::random(n, AttentionConfig::new(heads, embed, AttentionAxis::Time), rng),
        }
    }

    pub fn forward(&self, z: &FeatureTensor) -> Result<FeatureTensor> {
        self.time.forward(&self.frequency.forward(z)?)
    }
}

/// Apply `repeats` frequency-then-time passes, cycling through `blocks`.
pub fn interleaved_stack(z: &FeatureTensor, blocks: &[F3aLayer], repeats: usize) -> Result<FeatureTensor> {
    if blocks.is_empty() || repeats == 0 {
        return Err(Error::InvalidConfig(
            "interleaved stack needs at least one layer and one repeat".into(),
        ));
    }
    let mut x = z.clone();
    for layer in blocks.iter().cycle().take(repeats) {
        x = layer.forward(&x)?;
    }
    Ok(x)
}

/// Cosine similarity between the front and back channel halves.
pub fn half_cosine_similarity(z: &FeatureTensor) -> f64 {
    let n = z.dim().0;
    let a = z.data.slice(s![..n / 2, .., ..]);
    let b = z.data.slice(s![n / 2.., .., ..]);
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Row sums of an attention matrix, for normalization checks.
pub fn row_sums(a: ArrayView2<f64>) -> Vec<f64> {
    a.rows().into_iter().map(|r| r.sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_tensor(rng: &mut ChaCha8Rng, n: usize, k: usize, t: usize) -> FeatureTensor {
        FeatureTensor::new(Array3::from_shape_simple_fn((n, k, t), || rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn split_swap_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = FeatureTensor::new(Array3::from_shape_vec((2, 1, 1), vec![1.0, 2.0]).unwrap()).unwrap();
        let r = reverse_split_swap(&z).unwrap();
        assert_eq!(r.data().as_slice().unwrap(), &[2.0, 1.0]);
        let z = random_tensor(&mut rng, 6, 3, 4);
        assert_eq!(reverse_split_swap(&reverse_split_swap(&z).unwrap()).unwrap(), z);
        let zero = FeatureTensor::zeros(4, 2, 2);
        assert_eq!(reverse_split_swap(&zero).unwrap(), zero);
        assert!(reverse_split_swap(&FeatureTensor::zeros(3, 1, 1)).is_err());
    }

    #[test]
    fn single_key_gets_full_weight() {
        let cfg = AttentionConfig::new(1, 2, AttentionAxis::Frequency);
        let q = Array3::from_shape_vec((2, 1, 3), vec![5.0, -1.0, 2.0, 0.3, 9.0, -4.0]).unwrap();
        for negate in [false, true] {
            let w = attention_weights(&q, &q, &cfg, negate).unwrap();
            assert_eq!(w[0][[0, 0]], 1.0);
        }
    }

    #[test]
    fn two_key_softmax_matches_scalar_oracle() {
        // E = 1, T = 1 along frequency: scale = 1; keys at positions with logits 2 and 1.
        let cfg = AttentionConfig::new(1, 1, AttentionAxis::Frequency);
        let q = Array3::from_shape_vec((1, 2, 1), vec![1.0, 0.0]).unwrap();
        let k = Array3::from_shape_vec((1, 2, 1), vec![2.0, 1.0]).unwrap();
        let sigma = 1.0 / (1.0 + (-1.0f64).exp());
        let w = attention_weights(&q, &k, &cfg, false).unwrap();
        assert_abs_diff_eq!(w[0][[0, 0]], sigma, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0][[0, 1]], 1.0 - sigma, epsilon = 1e-15);
        let wn = attention_weights(&q, &k, &cfg, true).unwrap();
        assert_abs_diff_eq!(wn[0][[0, 0]], 1.0 - sigma, epsilon = 1e-15);
        assert_abs_diff_eq!(wn[0][[0, 1]], sigma, epsilon = 1e-15);
        // Scale for time attention is sqrt(E*K).
        let cfg_t = AttentionConfig::new(1, 1, AttentionAxis::Time);
        let q = Array3::from_shape_vec((1, 4, 2), vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let k = Array3::from_shape_vec((1, 4, 2), vec![0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        // logits row 0: [4*0.5, 0] / sqrt(4) = [1, 0]
        let w = attention_weights(&q, &k, &cfg_t, false).unwrap();
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert_abs_diff_eq!(w[0][[0, 0]], s1, epsilon = 1e-15);
    }

    #[test]
    fn matching_position_is_min_under_negation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = AttentionConfig::new(2, 3, AttentionAxis::Frequency);
        let q = Array3::from_shape_simple_fn((6, 5, 4), || rng.sample::<f64, _>(StandardNormal));
        let neg = attention_weights(&q, &q, &cfg, true).unwrap();
        let pos = attention_weights(&q, &q, &cfg, false).unwrap();
        let logits = attention_logits(&q, &q, &cfg).unwrap();
        for h in 0..2 {
            for i in 0..5 {
                // brute force: diagonal is the row max of the raw logits here
                let row = logits[h].row(i);
                let best = (0..5).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
                if best != i {
                    continue;
                }
                let n_row = neg[h].row(i);
                let p_row = pos[h].row(i);
                assert!((0..5).all(|j| n_row[i] <= n_row[j]));
                assert!((0..5).all(|j| p_row[i] >= p_row[j]));
            }
        }
    }

    #[test]
    fn degenerate_single_band_makes_self_and_cross_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_tensor(&mut rng, 4, 1, 6);
        let block = F3aBlock::random(4, AttentionConfig::new(2, 2, AttentionAxis::Frequency), &mut rng);
        let trace = block.forward_traced(&z).unwrap();
        assert_eq!(trace.self_weights, trace.cross_weights);
        let expected = attend(&trace.self_weights, &trace.values, AttentionAxis::Frequency);
        assert_eq!(trace.attended, expected);
    }

    #[test]
    fn zero_input_and_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = AttentionConfig {
            residual: false,
            ..AttentionConfig::new(2, 2, AttentionAxis::Time)
        };
        let proj = QkvProjections::random(4, &cfg, &mut rng);
        let out = f3a_forward(&FeatureTensor::zeros(4, 3, 5), &proj, &cfg).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));

        let z = random_tensor(&mut rng, 4, 3, 5);
        let layer = F3aLayer {
            frequency: F3aBlock {
                proj: QkvProjections::zeros(4, &cfg),
                cfg: AttentionConfig::new(2, 2, AttentionAxis::Frequency),
            },
            time: F3aBlock {
                proj: QkvProjections::zeros(4, &cfg),
                cfg: AttentionConfig::new(2, 2, AttentionAxis::Time),
            },
        };
        assert_eq!(interleaved_stack(&z, &[layer], 3).unwrap(), z);
    }

    #[test]
    fn stack_composition_and_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_tensor(&mut rng, 8, 4, 6);
        let layers: Vec<F3aLayer> = (0..8).map(|_| F3aLayer::random(8, 2, 3, &mut rng)).collect();
        let once = interleaved_stack(&z, &layers[..1], 1).unwrap();
        let manual = layers[0].time.forward(&layers[0].frequency.forward(&z).unwrap()).unwrap();
        assert_eq!(once, manual);
        for repeats in [1, 2, 8] {
            assert_eq!(interleaved_stack(&z, &layers, repeats).unwrap().dim(), (8, 4, 6));
        }
        assert!(interleaved_stack(&z, &[], 1).is_err());
    }

    #[test]
    fn frequency_attention_is_equivariant_to_frame_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = random_tensor(&mut rng, 4, 5, 6);
        let block = F3aBlock::random(4, AttentionConfig::new(2, 2, AttentionAxis::Frequency), &mut rng);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permute_t = |x: &Array3<f64>| Array3::from_shape_fn(x.dim(), |(c, k, t)| x[[c, k, perm[t]]]);
        let out = block.forward(&z).unwrap();
        let out_p = block.forward(&FeatureTensor::new(permute_t(z.data())).unwrap()).unwrap();
        for (a, b) in permute_t(out.data()).iter().zip(out_p.data().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_halves_diverge() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let half = Array3::from_shape_simple_fn((4, 6, 8), || rng.sample::<f64, _>(StandardNormal));
        let mut data = Array3::zeros((8, 6, 8));
        data.slice_mut(s![..4, .., ..]).assign(&half);
        data.slice_mut(s![4.., .., ..]).assign(&half);
        let z = FeatureTensor::new(data).unwrap();
        assert_abs_diff_eq!(half_cosine_similarity(&z), 1.0, epsilon = 1e-12);
        let block = F3aBlock::random(8, AttentionConfig::new(2, 4, AttentionAxis::Frequency), &mut rng);
        let out = block.forward(&z).unwrap();
        assert!(half_cosine_similarity(&out) < 1.0 - 1e-6);
    }

    #[test]
    fn config_validation() {
        let cfg = AttentionConfig::new(3, 2, AttentionAxis::Time);
        assert!(cfg.validate(4).is_err());
        assert!(AttentionConfig::new(2, 1024, AttentionAxis::Time).validate(4).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let proj = QkvProjections::random(4, &AttentionConfig::new(2, 2, AttentionAxis::Time), &mut rng);
        let z = random_tensor(&mut rng, 6, 2, 2);
        assert!(f3a_forward(&z, &proj, &AttentionConfig::new(2, 2, AttentionAxis::Time)).is_err());
    }
}
