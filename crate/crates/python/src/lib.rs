//! Python bindings: `import unmixx`.
//!
//! Audio crosses the boundary as lists of floats; structured results come
//! back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use unmixx_core::gradcheck::{run_grad_checks, GradCheckConfig};
use unmixx_core::losses::{optimize_masks_demo, pit_snr_loss, snr_loss, total_loss, two_sine_mixture, DemoConfig, ObjectiveConfig};
use unmixx_core::metrics::{self, swap_sim_table, SegmentConfig};
use unmixx_core::mim::{frame_overlap, generate_mixtures, harmonic_overlap_score, HarmonicConfig, MimConfig};
use unmixx_core::separator::{apply_masks, ideal_ratio_masks, Separator as CoreSeparator, SeparatorConfig, SeparatorWeights};
use unmixx_core::weights::WeightBlob;
use unmixx_core::stft::{resample, ComplexSpec, StftConfig, StftPlan};
use unmixx_core::synth::synthetic_corpus;
use unmixx_core::{selftest, WavFormat};

create_exception!(unmixx, UnmixxError, PyException);

fn err(e: unmixx_core::Error) -> PyErr {
    UnmixxError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| UnmixxError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Mono audio with a sample rate.
#[pyclass(frozen, skip_from_py_object, module = "unmixx")]
#[derive(Clone)]
struct AudioClip {
    inner: unmixx_core::AudioClip,
}

impl From<unmixx_core::AudioClip> for AudioClip {
    fn from(inner: unmixx_core::AudioClip) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl AudioClip {
    #[new]
    fn new(samples: Vec<f64>, sample_rate: u32) -> PyResult<Self> {
        Ok(unmixx_core::AudioClip::new(samples, sample_rate).map_err(err)?.into())
    }

    #[staticmethod]
    fn read_wav(path: &str) -> PyResult<Self> {
        Ok(unmixx_core::AudioClip::read_wav(path).map_err(err)?.into())
    }

    /// Writes 32-bit float by default, 16-bit PCM with `pcm16=True`.
    #[pyo3(signature = (path, pcm16 = false))]
    fn write_wav(&self, path: &str, pcm16: bool) -> PyResult<()> {
        let format = if pcm16 { WavFormat::Pcm16 } else { WavFormat::Float32 };
        self.inner.write_wav(path, format).map_err(err)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.inner.sample_rate()
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s()
    }

    fn rms(&self) -> f64 {
        self.inner.rms()
    }

    fn peak(&self) -> f64 {
        self.inner.peak()
    }

    fn resample(&self, sample_rate: u32) -> PyResult<Self> {
        Ok(resample(&self.inner, sample_rate).map_err(err)?.into())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("AudioClip(len={}, sample_rate={})", self.inner.len(), self.inner.sample_rate())
    }
}

/// Complex spectrogram produced by [`Stft::forward`].
#[pyclass(frozen, module = "unmixx")]
struct Spectrogram {
    inner: ComplexSpec,
}

#[pymethods]
impl Spectrogram {
    #[getter]
    fn n_frames(&self) -> usize {
        self.inner.n_frames()
    }

    #[getter]
    fn n_bins(&self) -> usize {
        self.inner.n_bins()
    }

    /// Magnitude as `n_frames` rows of `n_bins` values.
    fn magnitude(&self) -> Vec<Vec<f64>> {
        self.inner.magnitude().grid.outer_iter().map(|row| row.to_vec()).collect()
    }

    /// Multiplies every bin by a real mask of the same shape.
    fn masked(&self, mask: Vec<Vec<f64>>) -> PyResult<Self> {
        let grid = rows_to_array(mask, self.inner.n_frames(), self.inner.n_bins())?;
        Ok(Self {
            inner: self.inner.masked(&grid).map_err(err)?,
        })
    }

    fn inverse(&self) -> PyResult<AudioClip> {
        Ok(unmixx_core::stft::istft(&self.inner).map_err(err)?.into())
    }
}

fn rows_to_array(rows: Vec<Vec<f64>>, n_rows: usize, n_cols: usize) -> PyResult<ndarray::Array2<f64>> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(UnmixxError::new_err(format!("mask must be {n_rows} x {n_cols}")));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    ndarray::Array2::from_shape_vec((n_rows, n_cols), flat).map_err(|e| UnmixxError::new_err(e.to_string()))
}

#[pyclass(frozen, module = "unmixx")]
struct Stft {
    plan: StftPlan,
}

#[pymethods]
impl Stft {
    #[new]
    #[pyo3(signature = (window_len = 960, hop = 240, fft_size = 960, center = false))]
    fn new(window_len: usize, hop: usize, fft_size: usize, center: bool) -> PyResult<Self> {
        let cfg = StftConfig {
            window_len,
            hop,
            fft_size,
            center,
            ..StftConfig::default()
        };
        Ok(Self {
            plan: StftPlan::new(cfg).map_err(err)?,
        })
    }

    fn forward(&self, clip: &AudioClip) -> PyResult<Spectrogram> {
        Ok(Spectrogram {
            inner: self.plan.forward(&clip.inner).map_err(err)?,
        })
    }

    fn window(&self) -> Vec<f64> {
        self.plan.window().to_vec()
    }

    /// Overlap-added squared window over one hop period.
    fn cola_profile(&self) -> Vec<f64> {
        self.plan.config().cola_profile()
    }
}

/// Two-source separator with seeded (untrained) or loaded weights.
#[pyclass(frozen, module = "unmixx")]
struct Separator {
    inner: CoreSeparator,
}

#[pymethods]
impl Separator {
    #[new]
    #[pyo3(signature = (seed = 7, sample_rate = 24_000, repeats = 8))]
    fn new(seed: u64, sample_rate: u32, repeats: usize) -> PyResult<Self> {
        let cfg = SeparatorConfig {
            seed,
            sample_rate,
            repeats,
            ..SeparatorConfig::default()
        };
        Ok(Self {
            inner: CoreSeparator::seeded(cfg).map_err(err)?,
        })
    }

    /// Loads a weight file written for the default architecture with
    /// `repeats` separation blocks.
    #[staticmethod]
    #[pyo3(signature = (path, sample_rate = 24_000, repeats = 8))]
    fn from_weights(path: &str, sample_rate: u32, repeats: usize) -> PyResult<Self> {
        let cfg = SeparatorConfig {
            sample_rate,
            repeats,
            ..SeparatorConfig::default()
        };
        let blob = WeightBlob::load(path).map_err(err)?;
        let weights = SeparatorWeights::from_blob(&cfg, &blob).map_err(err)?;
        Ok(Self {
            inner: CoreSeparator::new(cfg, weights).map_err(err)?,
        })
    }

    /// Writes the current weights in the binary weight format.
    fn save_weights(&self, path: &str) -> PyResult<()> {
        let blob = self.inner.weights().to_blob(self.inner.config()).map_err(err)?;
        blob.save(path).map_err(err)
    }

    fn separate(&self, mix: &AudioClip) -> PyResult<(AudioClip, AudioClip)> {
        let [a, b] = self.inner.separate(&mix.inner).map_err(err)?;
        Ok((a.into(), b.into()))
    }

    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.config())
    }
}

/// Separates `mix` with ideal ratio masks computed from the references.
#[pyfunction]
fn separate_ideal(mix: &AudioClip, gt1: &AudioClip, gt2: &AudioClip) -> PyResult<(AudioClip, AudioClip)> {
    let stft = SeparatorConfig::default().stft;
    let masks = ideal_ratio_masks(&gt1.inner, &gt2.inner, &stft).map_err(err)?;
    let [a, b] = apply_masks(&mix.inner, &masks, &stft).map_err(err)?;
    Ok((a.into(), b.into()))
}

#[pyfunction]
fn si_sdr(est: Vec<f64>, reference: Vec<f64>) -> PyResult<f64> {
    metrics::si_sdr(&est, &reference).map_err(err)
}

#[pyfunction]
fn sdr(est: Vec<f64>, reference: Vec<f64>) -> PyResult<f64> {
    metrics::sdr(&est, &reference).map_err(err)
}

fn seg_cfg(seg_s: f64) -> SegmentConfig {
    SegmentConfig {
        seg_s,
        ..SegmentConfig::default()
    }
}

#[pyfunction]
#[pyo3(signature = (est, gt, sample_rate, seg_s = 1.0))]
fn ssnr(est: (Vec<f64>, Vec<f64>), gt: (Vec<f64>, Vec<f64>), sample_rate: u32, seg_s: f64) -> PyResult<f64> {
    metrics::ssnr([&est.0, &est.1], [&gt.0, &gt.1], sample_rate, &seg_cfg(seg_s)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (est, gt, sample_rate, seg_s = 1.0))]
fn pssnr(est: (Vec<f64>, Vec<f64>), gt: (Vec<f64>, Vec<f64>), sample_rate: u32, seg_s: f64) -> PyResult<f64> {
    metrics::pssnr([&est.0, &est.1], [&gt.0, &gt.1], sample_rate, &seg_cfg(seg_s)).map_err(err)
}

/// Metric rows for perfectly separated references with a fraction of
/// segments swapped between them.
#[pyfunction]
#[pyo3(signature = (gt1, gt2, ratios, seed, seg_s = 1.0))]
fn swap_sim<'py>(
    py: Python<'py>,
    gt1: &AudioClip,
    gt2: &AudioClip,
    ratios: Vec<f64>,
    seed: u64,
    seg_s: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let rows = swap_sim_table(&gt1.inner, &gt2.inner, &ratios, &seg_cfg(seg_s), seed).map_err(err)?;
    to_py(py, &rows)
}

/// Symmetrized overtone-overlap score of two f0 tracks (Hz, 0 = unvoiced).
#[pyfunction]
fn harmonic_score(f0_a: Vec<f64>, f0_b: Vec<f64>) -> PyResult<f64> {
    harmonic_overlap_score(&f0_a, &f0_b, &HarmonicConfig::default()).map_err(err)
}

#[pyfunction]
fn harmonic_frame_score(fa: f64, fb: f64) -> f64 {
    frame_overlap(fa, fb, &HarmonicConfig::default())
}

/// Mines `count` mixtures from a seeded synthetic corpus. Returns
/// `(mix, gt1, gt2, pair)` tuples where `pair` describes the crops.
#[pyfunction]
#[pyo3(signature = (count, seed, n_songs = 6, song_s = 10.0, length_s = 2.0, sample_rate = 16_000))]
fn synthetic_mixtures<'py>(
    py: Python<'py>,
    count: usize,
    seed: u64,
    n_songs: usize,
    song_s: f64,
    length_s: f64,
    sample_rate: u32,
) -> PyResult<Vec<(AudioClip, AudioClip, AudioClip, Bound<'py, PyAny>)>> {
    let mut songs = synthetic_corpus(n_songs, song_s, sample_rate, seed).map_err(err)?;
    let cfg = MimConfig {
        length_s,
        batch: 2,
        pool: 4,
        keep: 2,
        ..MimConfig::default()
    };
    let mined = py
        .detach(|| generate_mixtures(&mut songs, count, &cfg, seed))
        .map_err(err)?;
    mined
        .into_iter()
        .map(|m| {
            let pair = to_py(py, &m.pair)?;
            let x = m.mixture;
            Ok((x.mix.into(), x.gt1.into(), x.gt2.into(), pair))
        })
        .collect()
}

/// Negative SNR in dB and its gradient with respect to `est`.
#[pyfunction]
#[pyo3(signature = (est, target, eps = 1e-8))]
fn snr_loss_grad(est: Vec<f64>, target: Vec<f64>, eps: f64) -> PyResult<(f64, Vec<f64>)> {
    snr_loss(&est, &target, eps).map_err(err)
}

/// Permutation-invariant SNR loss: `(value, grads, swapped)`.
#[pyfunction]
#[pyo3(signature = (est, target, eps = 1e-8))]
fn pit_snr_loss_grad(
    est: (Vec<f64>, Vec<f64>),
    target: (Vec<f64>, Vec<f64>),
    eps: f64,
) -> PyResult<(f64, (Vec<f64>, Vec<f64>), bool)> {
    let (v, [g1, g2], swapped) = pit_snr_loss([&est.0, &est.1], [&target.0, &target.1], eps).map_err(err)?;
    Ok((v, (g1, g2), swapped))
}

/// Full training objective on waveform estimates; the dict carries the
/// value, its three terms, the assignment and gradients for both estimates.
#[pyfunction]
#[pyo3(signature = (est1, est2, gt1, gt2, lambda_mag = 0.1, lambda_penalty = 0.02))]
fn objective<'py>(
    py: Python<'py>,
    est1: &AudioClip,
    est2: &AudioClip,
    gt1: &AudioClip,
    gt2: &AudioClip,
    lambda_mag: f64,
    lambda_penalty: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ObjectiveConfig::default();
    cfg.weights.lambda_mag = lambda_mag;
    cfg.weights.lambda_penalty = lambda_penalty;
    let t = total_loss([&est1.inner, &est2.inner], [&gt1.inner, &gt2.inner], &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("value", t.value)?;
    d.set_item("snr", t.snr)?;
    d.set_item("mag", t.mag)?;
    d.set_item("penalty", t.penalty)?;
    d.set_item("swapped", t.swapped)?;
    let [g1, g2] = t.grads;
    d.set_item("grads", (g1, g2))?;
    Ok(d)
}

/// Mask optimization on a two-tone mixture; one dict per step.
#[pyfunction]
#[pyo3(signature = (lambda_penalty = 0.02, steps = 500))]
fn demo_penalty<'py>(py: Python<'py>, lambda_penalty: f64, steps: usize) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = DemoConfig {
        steps,
        ..DemoConfig::default()
    };
    cfg.objective.weights.lambda_penalty = lambda_penalty;
    let rows = py
        .detach(|| {
            let [mix, s1, s2] = two_sine_mixture(
                unmixx_core::losses::DEMO_FREQS,
                unmixx_core::losses::DEMO_AMPLITUDE,
                unmixx_core::losses::DEMO_SECONDS,
                unmixx_core::losses::DEMO_SAMPLE_RATE,
            )?;
            optimize_masks_demo(&mix, &s1, &s2, &cfg)
        })
        .map_err(err)?;
    to_py(py, &rows)
}

/// Finite-difference checks of every analytic gradient.
#[pyfunction]
#[pyo3(signature = (seed = 7, trials = 100))]
fn grad_check<'py>(py: Python<'py>, seed: u64, trials: usize) -> PyResult<Bound<'py, PyAny>> {
    let cfg = GradCheckConfig {
        seed,
        trials,
        ..GradCheckConfig::default()
    };
    let reports = py.detach(|| run_grad_checks(&cfg)).map_err(err)?;
    to_py(py, &reports)
}

/// Built-in invariant checks; one dict per check.
#[pyfunction]
#[pyo3(signature = (seed = 7))]
fn run_selftest<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let results = py.detach(|| selftest::run_selftest(seed));
    to_py(py, &results)
}

#[pymodule]
fn unmixx(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("UnmixxError", m.py().get_type::<UnmixxError>())?;
    m.add_class::<AudioClip>()?;
    m.add_class::<Spectrogram>()?;
    m.add_class::<Stft>()?;
    m.add_class::<Separator>()?;
    m.add_function(wrap_pyfunction!(separate_ideal, m)?)?;
    m.add_function(wrap_pyfunction!(si_sdr, m)?)?;
    m.add_function(wrap_pyfunction!(sdr, m)?)?;
    m.add_function(wrap_pyfunction!(ssnr, m)?)?;
    m.add_function(wrap_pyfunction!(pssnr, m)?)?;
    m.add_function(wrap_pyfunction!(swap_sim, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_score, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_frame_score, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_mixtures, m)?)?;
    m.add_function(wrap_pyfunction!(snr_loss_grad, m)?)?;
    m.add_function(wrap_pyfunction!(pit_snr_loss_grad, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(demo_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}
