//! Non-uniform sub-band split of the STFT axis and its inverse for mask synthesis.

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attention::FeatureTensor;
use crate::error::{Error, Result};
use crate::stft::ComplexSpec;

/// Strictly increasing bin edges `0 = e0 < e1 < ... < eK = F`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandScheme {
    edges: Vec<usize>,
}

impl BandScheme {
    pub fn new(edges: Vec<usize>) -> Result<Self> {
        if edges.len() < 2 || edges[0] != 0 {
            return Err(Error::InvalidConfig(
                "band edges must start at 0 and define at least one band".into(),
            ));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "band edges must be strictly increasing".into(),
            ));
        }
        Ok(Self { edges })
    }

    /// `K` equal-ish bands over `n_bins`; wider bands come first.
    pub fn uniform(n_bins: usize, k: usize) -> Result<Self> {
        let mut edges = vec![0];
        push_equal_split(&mut edges, n_bins, k);
        Self::new(edges)
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn n_bands(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_bins(&self) -> usize {
        *self.edges.last().unwrap()
    }

    pub fn band(&self, b: usize) -> std::ops::Range<usize> {
        self.edges[b]..self.edges[b + 1]
    }

    pub fn widths(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.windows(2).map(|w| w[1] - w[0])
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: BandScheme = serde_json::from_str(s)?;
        Self::new(raw.edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("band scheme serializes")
    }
}

fn push_equal_split(edges: &mut Vec<usize>, end: usize, k: usize) {
    let start = *edges.last().unwrap();
    let span = end - start;
    let k = k.min(span).max(1);
    let (base, extra) = (span / k, span % k);
    let mut e = start;
    for b in 0..k {
        e += base + usize::from(b < extra);
        edges.push(e);
    }
}

/// Unit-width bands below 1 kHz, 2-bin bands to 4 kHz, 8-bin bands to 8 kHz, then
/// the remainder split into 8 equal bands. Falls back to `min(F, 8)` equal bands
/// when fewer than 8 bins remain above 8 kHz.
pub fn default_scheme(n_bins: usize, sample_rate: u32) -> Result<BandScheme> {
    if n_bins == 0 {
        return Err(Error::InvalidConfig("need at least one frequency bin".into()));
    }
    if n_bins < 2 {
        return BandScheme::uniform(n_bins, 1);
    }
    let bin_hz = sample_rate as f64 / (2.0 * (n_bins - 1) as f64);
    let limit = |hz: f64| ((hz / bin_hz).round() as usize).min(n_bins);
    let mut edges = vec![0usize];
    for (width, stop) in [(1usize, limit(1000.0)), (2, limit(4000.0)), (8, limit(8000.0))] {
        let mut e = *edges.last().unwrap();
        while e < stop {
            e = (e + width).min(stop);
            edges.push(e);
        }
    }
    let last = *edges.last().unwrap();
    if n_bins - last < 8 {
        return BandScheme::uniform(n_bins, n_bins.min(8));
    }
    push_equal_split(&mut edges, n_bins, 8);
    BandScheme::new(edges)
}

/// Dense affine map `y = W x + b`, `W` is `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            weight: Array2::eye(dim),
            bias: Array1::zeros(dim),
        }
    }

    /// Gaussian weights scaled by `1/sqrt(in_dim)`, zero bias.
    pub fn random<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 1.0 / (in_dim.max(1) as f64).sqrt()).unwrap();
        Self {
            weight: Array2::from_shape_simple_fn((out_dim, in_dim), || normal.sample(rng)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weight.rows().into_iter().zip(&self.bias)) {
            *o = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
        }
    }
}

/// Per-band encoders (`2 w_b -> N`, real/imag interleaved) and decoders
/// (`D -> 2 w_b`) producing two mask logits per bin.
#[derive(Clone, Debug, PartialEq)]
pub struct BandProjection {
    pub encoders: Vec<Affine>,
    pub decoders: Vec<Affine>,
}

impl BandProjection {
    pub fn random<R: Rng + ?Sized>(
        scheme: &BandScheme,
        feature_dim: usize,
        decoder_dim: usize,
        rng: &mut R,
    ) -> Self {
        let encoders = scheme
            .widths()
            .map(|w| Affine::random(feature_dim, 2 * w, rng))
            .collect();
        let decoders = scheme
            .widths()
            .map(|w| Affine::random(2 * w, decoder_dim, rng))
            .collect();
        Self { encoders, decoders }
    }

    /// Identity maps on unit-width bands (`N = D = 2`).
    pub fn identity(scheme: &BandScheme) -> Result<Self> {
        if scheme.widths().any(|w| w != 1) {
            return Err(Error::InvalidConfig(
                "identity projection needs unit-width bands".into(),
            ));
        }
        let k = scheme.n_bands();
        Ok(Self {
            encoders: vec![Affine::identity(2); k],
            decoders: vec![Affine::identity(2); k],
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.encoders.first().map_or(0, Affine::out_dim)
    }

    pub fn decoder_dim(&self) -> usize {
        self.decoders.first().map_or(0, Affine::in_dim)
    }

    pub fn validate(&self, scheme: &BandScheme) -> Result<()> {
        if self.encoders.len() != scheme.n_bands() || self.decoders.len() != scheme.n_bands() {
            return Err(Error::ShapeMismatch(format!(
                "projection has {}/{} band maps, scheme has {} bands",
                self.encoders.len(),
                self.decoders.len(),
                scheme.n_bands()
            )));
        }
        let n = self.feature_dim();
        let d = self.decoder_dim();
        for (b, w) in scheme.widths().enumerate() {
            let (e, dec) = (&self.encoders[b], &self.decoders[b]);
            if e.in_dim() != 2 * w || e.out_dim() != n || dec.out_dim() != 2 * w || dec.in_dim() != d {
                return Err(Error::ShapeMismatch(format!(
                    "band {b} of width {w} has encoder {}x{} and decoder {}x{}",
                    e.out_dim(),
                    e.in_dim(),
                    dec.out_dim(),
                    dec.in_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Encode each sub-band of every frame into an `N x K x T` feature tensor.
pub fn split_project(
    spec: &ComplexSpec,
    scheme: &BandScheme,
    proj: &BandProjection,
) -> Result<FeatureTensor> {
    if scheme.n_bins() != spec.n_bins() {
        return Err(Error::ShapeMismatch(format!(
            "scheme covers {} bins, spectrogram has {}",
            scheme.n_bins(),
            spec.n_bins()
        )));
    }
    proj.validate(scheme)?;
    let n = proj.feature_dim();
    let (k, t_frames) = (scheme.n_bands(), spec.n_frames());
    let mut data = Array3::zeros((n, k, t_frames));
    let mut input = Vec::new();
    let mut out = vec![0.0; n];
    for t in 0..t_frames {
        for b in 0..k {
            input.clear();
            for f in scheme.band(b) {
                let c = spec.grid()[[t, f]];
                input.push(c.re);
                input.push(c.im);
            }
            proj.encoders[b].apply(&input, &mut out);
            for (ch, &v) in out.iter().enumerate() {
                data[[ch, b, t]] = v;
            }
        }
    }
    FeatureTensor::new(data)
}

/// Decode features back to a full-band `[T x F x 2]` grid of mask logits.
pub fn restore_fullband(
    feat: &FeatureTensor,
    scheme: &BandScheme,
    proj: &BandProjection,
) -> Result<Array3<f64>> {
    proj.validate(scheme)?;
    let (n, k, t_frames) = feat.dim();
    if n != proj.decoder_dim() || k != scheme.n_bands() {
        return Err(Error::ShapeMismatch(format!(
            "features {n}x{k} vs decoder input {} and {} bands",
            proj.decoder_dim(),
            scheme.n_bands()
        )));
    }
    let mut logits = Array3::zeros((t_frames, scheme.n_bins(), 2));
    let mut input = vec![0.0; n];
    let mut out = Vec::new();
    for t in 0..t_frames {
        for b in 0..k {
            for (ch, slot) in input.iter_mut().enumerate() {
                *slot = feat.data()[[ch, b, t]];
            }
            out.resize(2 * scheme.band(b).len(), 0.0);
            proj.decoders[b].apply(&input, &mut out);
            for (i, f) in scheme.band(b).enumerate() {
                logits[[t, f, 0]] = out[2 * i];
                logits[[t, f, 1]] = out[2 * i + 1];
            }
        }
    }
    Ok(logits)
}

/// Packs a `[T x F x 2]` logit grid as complex values (re, im).
pub fn logits_as_complex(logits: &Array3<f64>) -> Array2<Complex64> {
    let (t, f, _) = logits.dim();
    Array2::from_shape_fn((t, f), |(i, j)| Complex64::new(logits[[i, j, 0]], logits[[i, j, 1]]))
}
