//! End-to-end two-singer masking path and the ideal-ratio-mask oracle.

use ndarray::{s, Array1, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{F3aLayer, FeatureTensor};
use crate::audio::AudioClip;
use crate::bandsplit::{default_scheme, restore_fullband, split_project, Affine, BandProjection, BandScheme};
use crate::error::{Error, Result};
use crate::stft::{StftConfig, StftPlan};
use crate::weights::{NamedTensor, WeightBlob};

pub const N_SOURCES: usize = 2;
const IRM_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeparatorConfig {
    pub stft: StftConfig,
    pub sample_rate: u32,
    /// Sub-band layout; `None` selects [`default_scheme`].
    pub bands: Option<BandScheme>,
    pub features: usize,
    pub heads: usize,
    pub embed_per_head: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SeparatorConfig {
    fn default() -> Self {
        Self {
            // Centered frames give every output sample full window coverage.
            stft: StftConfig {
                center: true,
                ..StftConfig::default()
            },
            sample_rate: 24_000,
            bands: None,
            features: 16,
            heads: 2,
            embed_per_head: 4,
            repeats: 8,
            seed: 7,
        }
    }
}

impl SeparatorConfig {
    pub fn scheme(&self) -> Result<BandScheme> {
        match &self.bands {
            Some(s) => Ok(s.clone()),
            None => default_scheme(self.stft.n_bins(), self.sample_rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if self.features < 2 || self.features % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "feature dimension {} must be even and >= 2",
                self.features
            )));
        }
        if self.heads == 0 || self.features % self.heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "{} heads do not divide {} features",
                self.heads, self.features
            )));
        }
        if self.embed_per_head == 0 || self.repeats == 0 {
            return Err(Error::InvalidConfig("embed_per_head and repeats must be positive".into()));
        }
        let scheme = self.scheme()?;
        if scheme.n_bins() != self.stft.n_bins() {
            return Err(Error::InvalidConfig(format!(
                "band scheme covers {} bins, STFT has {}",
                scheme.n_bins(),
                self.stft.n_bins()
            )));
        }
        Ok(())
    }
}

/// Stage run before each F3A layer. The default is a residual pointwise mix;
/// other sequence models plug in here.
pub trait ContextStage: Send + Sync {
    fn apply(&self, z: &FeatureTensor) -> Result<FeatureTensor>;
}

/// `z + tanh(W z + b)` over channels.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseMix {
    pub conv: Affine,
}

impl ContextStage for PointwiseMix {
    fn apply(&self, z: &FeatureTensor) -> Result<FeatureTensor> {
        let mixed = crate::attention::conv1x1(z.data(), &self.conv).mapv(f64::tanh);
        FeatureTensor::new(mixed + z.data())
    }
}

/// All separator parameters. `input` contributes only its encoders; each entry
/// of `heads` contributes only its decoders (`N/2 -> 2 w_b`).
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatorWeights {
    pub input: BandProjection,
    pub context: Vec<PointwiseMix>,
    pub layers: Vec<F3aLayer>,
    pub heads: [BandProjection; N_SOURCES],
}

impl SeparatorWeights {
    /// Deterministic pseudo-random weights from `cfg.seed`.
    pub fn seeded(cfg: &SeparatorConfig) -> Result<Self> {
        cfg.validate()?;
        let scheme = cfg.scheme()?;
        let n = cfg.features;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let input = BandProjection::random(&scheme, n, n / 2, &mut rng);
        let mut context = Vec::with_capacity(cfg.repeats);
        let mut layers = Vec::with_capacity(cfg.repeats);
        for _ in 0..cfg.repeats {
            context.push(PointwiseMix {
                conv: Affine::random(n, n, &mut rng),
            });
            layers.push(F3aLayer::random(n, cfg.heads, cfg.embed_per_head, &mut rng));
        }
        let heads = [
            BandProjection::random(&scheme, n, n / 2, &mut rng),
            BandProjection::random(&scheme, n, n / 2, &mut rng),
        ];
        Ok(Self {
            input,
            context,
            layers,
            heads,
        })
    }

    fn named_affines(&self) -> Vec<(String, &Affine)> {
        let mut out = Vec::new();
        for (b, a) in self.input.encoders.iter().enumerate() {
            out.push((format!("input.encoder.{b}"), a));
        }
        for (r, (mix, layer)) in self.context.iter().zip(&self.layers).enumerate() {
            out.push((format!("layer.{r}.context"), &mix.conv));
            for (axis, block) in [("frequency", &layer.frequency), ("time", &layer.time)] {
                let p = &block.proj;
                for (name, a) in [("q", &p.q), ("k", &p.k), ("v", &p.v), ("q_rev", &p.q_rev), ("out", &p.out)] {
                    out.push((format!("layer.{r}.{axis}.{name}"), a));
                }
            }
        }
        for (s, head) in self.heads.iter().enumerate() {
            for (b, a) in head.decoders.iter().enumerate() {
                out.push((format!("head.{s}.decoder.{b}"), a));
            }
        }
        out
    }

    pub fn to_blob(&self, cfg: &SeparatorConfig) -> Result<WeightBlob> {
        let mut tensors = Vec::new();
        for (name, a) in self.named_affines() {
            tensors.push(NamedTensor {
                name: format!("{name}.weight"),
                shape: vec![a.out_dim(), a.in_dim()],
                data: a.weight.iter().cloned().collect(),
            });
            tensors.push(NamedTensor {
                name: format!("{name}.bias"),
                shape: vec![a.out_dim()],
                data: a.bias.to_vec(),
            });
        }
        Ok(WeightBlob {
            seed: cfg.seed,
            meta: serde_json::to_value(cfg)?,
            tensors,
        })
    }

    /// Rebuild weights for `cfg` from a blob, checking every name and shape.
    pub fn from_blob(cfg: &SeparatorConfig, blob: &WeightBlob) -> Result<Self> {
        let template = Self::seeded(cfg)?;
        let names = template.named_affines();
        if blob.tensors.len() != 2 * names.len() {
            return Err(Error::Weights(format!(
                "expected {} tensors, blob has {}",
                2 * names.len(),
                blob.tensors.len()
            )));
        }
        let mut loaded = Vec::with_capacity(names.len());
        for ((name, a), pair) in names.iter().zip(blob.tensors.chunks(2)) {
            let (w, b) = (&pair[0], &pair[1]);
            if w.name != format!("{name}.weight")
                || b.name != format!("{name}.bias")
                || w.shape != [a.out_dim(), a.in_dim()]
                || b.shape != [a.out_dim()]
            {
                return Err(Error::Weights(format!("tensor {} does not match {name}", w.name)));
            }
            loaded.push(Affine {
                weight: Array2::from_shape_vec((a.out_dim(), a.in_dim()), w.data.clone())
                    .map_err(|e| Error::Weights(e.to_string()))?,
                bias: Array1::from(b.data.clone()),
            });
        }
        let mut it = loaded.into_iter();
        let mut next = || it.next().expect("count checked above");
        let mut out = template;
        for enc in out.input.encoders.iter_mut() {
            *enc = next();
        }
        for (mix, layer) in out.context.iter_mut().zip(out.layers.iter_mut()) {
            mix.conv = next();
            for block in [&mut layer.frequency, &mut layer.time] {
                let p = &mut block.proj;
                p.q = next();
                p.k = next();
                p.v = next();
                p.q_rev = next();
                p.out = next();
            }
        }
        for head in out.heads.iter_mut() {
            for dec in head.decoders.iter_mut() {
                *dec = next();
            }
        }
        Ok(out)
    }
}

/// Two real masks `[T x F]` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPair {
    pub masks: [Array2<f64>; N_SOURCES],
}

impl MaskPair {
    pub fn new(a: Array2<f64>, b: Array2<f64>) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::ShapeMismatch(format!("masks {:?} vs {:?}", a.dim(), b.dim())));
        }
        if a.iter().chain(b.iter()).any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("mask values must lie in [0, 1]".into()));
        }
        Ok(Self { masks: [a, b] })
    }

    pub fn constant(dim: (usize, usize), a: f64, b: f64) -> Result<Self> {
        Self::new(Array2::from_elem(dim, a), Array2::from_elem(dim, b))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mask both sources out of the mixture spectrogram and resynthesize at the mixture length.
pub fn apply_masks(mix: &AudioClip, masks: &MaskPair, stft: &StftConfig) -> Result<[AudioClip; N_SOURCES]> {
    let plan = StftPlan::new(*stft)?;
    let spec = plan.forward(mix)?;
    let render = |m: &Array2<f64>| -> Result<AudioClip> {
        Ok(plan.inverse(&spec.masked(m)?)?.fit_to_len(mix.len()))
    };
    Ok([render(&masks.masks[0])?, render(&masks.masks[1])?])
}

/// `|S_i| / (|S_1| + |S_2| + eps)` per bin.
pub fn ideal_ratio_masks(gt1: &AudioClip, gt2: &AudioClip, stft: &StftConfig) -> Result<MaskPair> {
    if gt1.len() != gt2.len() {
        return Err(Error::ShapeMismatch(format!(
            "ground truths have {} and {} samples",
            gt1.len(),
            gt2.len()
        )));
    }
    let plan = StftPlan::new(*stft)?;
    let m1 = plan.forward(gt1)?.magnitude().grid;
    let m2 = plan.forward(gt2)?.magnitude().grid;
    let denom = &m1 + &m2 + IRM_EPS;
    MaskPair::new(&m1 / &denom, &m2 / &denom)
}

/// Configured separator with immutable weights.
pub struct Separator {
    cfg: SeparatorConfig,
    scheme: BandScheme,
    weights: SeparatorWeights,
    context: Vec<Box<dyn ContextStage>>,
}

impl Separator {
    pub fn new(cfg: SeparatorConfig, weights: SeparatorWeights) -> Result<Self> {
        cfg.validate()?;
        let scheme = cfg.scheme()?;
        weights.input.validate(&scheme)?;
        for h in &weights.heads {
            h.validate(&scheme)?;
        }
        if weights.layers.len() != cfg.repeats || weights.context.len() != cfg.repeats {
            return Err(Error::ShapeMismatch(format!(
                "weights hold {} layers, config asks for {}",
                weights.layers.len(),
                cfg.repeats
            )));
        }
        let context = weights
            .context
            .iter()
            .cloned()
            .map(|m| Box::new(m) as Box<dyn ContextStage>)
            .collect();
        Ok(Self {
            cfg,
            scheme,
            weights,
            context,
        })
    }

    pub fn seeded(cfg: SeparatorConfig) -> Result<Self> {
        let w = SeparatorWeights::seeded(&cfg)?;
        Self::new(cfg, w)
    }

    /// Replace the per-layer context stages.
    pub fn with_context_stages(mut self, stages: Vec<Box<dyn ContextStage>>) -> Result<Self> {
        if stages.len() != self.cfg.repeats {
            return Err(Error::ShapeMismatch(format!(
                "{} context stages for {} layers",
                stages.len(),
                self.cfg.repeats
            )));
        }
        self.context = stages;
        Ok(self)
    }

    pub fn config(&self) -> &SeparatorConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &SeparatorWeights {
        &self.weights
    }

    /// Masks predicted for a mixture. Each singer's mask comes from its channel
    /// half of the final features; the two decoded logits per bin are averaged
    /// before the sigmoid.
    pub fn predict_masks(&self, mix: &AudioClip) -> Result<MaskPair> {
        if mix.sample_rate() != self.cfg.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "mixture is {} Hz, separator expects {} Hz",
                mix.sample_rate(),
                self.cfg.sample_rate
            )));
        }
        let plan = StftPlan::new(self.cfg.stft)?;
        let spec = plan.forward(mix)?;
        let mut z = split_project(&spec, &self.scheme, &self.weights.input)?;
        for (stage, layer) in self.context.iter().zip(&self.weights.layers) {
            z = stage.apply(&z)?;
            z = layer.forward(&z)?;
        }
        let half = self.cfg.features / 2;
        let to_mask = |logits: Array3<f64>| -> Array2<f64> {
            let pair = logits.slice(s![.., .., 0]).to_owned() + logits.slice(s![.., .., 1]);
            pair.mapv(|v| sigmoid(0.5 * v).clamp(0.0, 1.0))
        };
        let front = restore_fullband(&z.channels(0..half), &self.scheme, &self.weights.heads[0])?;
        let back = restore_fullband(&z.channels(half..2 * half), &self.scheme, &self.weights.heads[1])?;
        MaskPair::new(to_mask(front), to_mask(back))
    }

    pub fn separate(&self, mix: &AudioClip) -> Result<[AudioClip; N_SOURCES]> {
        let masks = self.predict_masks(mix)?;
        apply_masks(mix, &masks, &self.cfg.stft)
    }
}
