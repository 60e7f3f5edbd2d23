//! Musically informed mixing: tempo-matched, downbeat-aligned and
//! harmonically correlated song pairs turned into two-singer training mixtures.

mod beats;
mod pitch;

pub use beats::{estimate_beats, estimate_bpm, BeatConfig, BeatGrid};
pub use pitch::{estimate_f0, frame_overlap, harmonic_overlap_score, F0Config, F0Track, HarmonicConfig};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Per-song annotation file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub beats: Vec<f64>,
    pub downbeats: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<F0Track>,
}

impl Annotation {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AnnotatedSong {
    pub id: String,
    pub clip: AudioClip,
    pub beats: Vec<f64>,
    pub downbeats: Vec<f64>,
    pub f0: Option<F0Track>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl AnnotatedSong {
    pub fn new(id: impl Into<String>, clip: AudioClip, beats: Vec<f64>, downbeats: Vec<f64>, f0: Option<F0Track>) -> Result<Self> {
        let id = id.into();
        let duration = clip.duration_s();
        if !strictly_increasing(&beats) || !strictly_increasing(&downbeats) {
            return Err(Error::InvalidConfig(format!("{id}: beats and downbeats must be strictly increasing")));
        }
        if let Some(d) = downbeats.iter().find(|&&d| !(0.0..=duration).contains(&d)) {
            return Err(Error::InvalidConfig(format!("{id}: downbeat {d} s outside the {duration:.3} s clip")));
        }
        Ok(Self {
            id,
            clip,
            beats,
            downbeats,
            f0,
        })
    }

    pub fn from_annotation(clip: AudioClip, ann: Annotation) -> Result<Self> {
        Self::new(ann.id, clip, ann.beats, ann.downbeats, ann.f0)
    }

    pub fn bpm(&self) -> Result<f64> {
        estimate_bpm(&self.beats)
    }

    /// The annotated F0 track, or one estimated from the audio.
    pub fn f0_or_estimate(&mut self, cfg: &F0Config) -> Result<&F0Track> {
        if self.f0.is_none() {
            log::info!("{}: no f0 annotation, estimating from audio", self.id);
            self.f0 = Some(estimate_f0(&self.clip, cfg)?);
        }
        Ok(self.f0.as_ref().expect("just filled"))
    }
}

/// Loads `<stem>.wav` from `corpus` with `<stem>.json` from `annotations`.
/// Missing annotations fall back to [`estimate_beats`]; missing F0 tracks to
/// [`estimate_f0`]. Songs are returned sorted by id.
pub fn load_corpus(corpus: &Path, annotations: &Path, f0_cfg: &F0Config) -> Result<Vec<AnnotatedSong>> {
    let mut wavs: Vec<PathBuf> = std::fs::read_dir(corpus)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    if wavs.is_empty() {
        return Err(Error::Empty("corpus directory has no .wav files"));
    }
    let mut songs: Vec<AnnotatedSong> = wavs
        .par_iter()
        .map(|wav| -> Result<AnnotatedSong> {
            let stem = wav.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let clip = AudioClip::read_wav(wav)?;
            let ann_path = annotations.join(format!("{stem}.json"));
            let mut song = if ann_path.exists() {
                AnnotatedSong::from_annotation(clip, Annotation::load(&ann_path)?)?
            } else {
                log::warn!("{stem}: no annotation file, falling back to onset-based beat estimation");
                let grid = estimate_beats(&clip, &BeatConfig::default())?;
                AnnotatedSong::new(stem, clip, grid.beats, grid.downbeats, None)?
            };
            song.f0_or_estimate(f0_cfg)?;
            Ok(song)
        })
        .collect::<Result<_>>()?;
    songs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(songs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TempoGroup {
    pub bpm_center: f64,
    pub tolerance: f64,
    pub members: Vec<String>,
}

/// Greedy grouping over ascending BPM: a group is anchored at its slowest
/// song and a new one starts once a BPM exceeds anchor + tolerance. The
/// reported centre is the member mean.
pub fn group_by_tempo(songs: &[(String, f64)], tolerance: f64) -> Result<Vec<TempoGroup>> {
    if songs.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidConfig(format!("tempo tolerance {tolerance} must be >= 0")));
    }
    let mut sorted: Vec<&(String, f64)> = songs.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut groups: Vec<(f64, Vec<&(String, f64)>)> = Vec::new();
    for s in sorted {
        match groups.last_mut() {
            Some((anchor, members)) if s.1 <= *anchor + tolerance => members.push(s),
            _ => groups.push((s.1, vec![s])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(_, members)| TempoGroup {
            bpm_center: members.iter().map(|m| m.1).sum::<f64>() / members.len() as f64,
            tolerance,
            members: members.iter().map(|m| m.0.clone()).collect(),
        })
        .collect())
}

/// A random crop of `length_s` starting on an eligible downbeat.
pub fn crop_at_downbeat<R: Rng + ?Sized>(song: &AnnotatedSong, length_s: f64, rng: &mut R) -> Result<(AudioClip, f64)> {
    let sr = song.clip.sample_rate() as f64;
    let len = (length_s * sr).round() as usize;
    let eligible: Vec<f64> = song
        .downbeats
        .iter()
        .copied()
        .filter(|&d| (d * sr).round() as usize + len <= song.clip.len())
        .collect();
    let start = *eligible.choose(rng).ok_or_else(|| Error::SongTooShort {
        id: song.id.clone(),
        duration_s: song.clip.duration_s(),
        length_s,
    })?;
    Ok((song.clip.slice((start * sr).round() as usize, len), start))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixPair {
    pub song_a: String,
    pub song_b: String,
    pub start_a: f64,
    pub start_b: f64,
    pub length: f64,
    pub gain_a: f64,
    pub gain_b: f64,
    pub harmonic_score: f64,
}

impl MixPair {
    /// Deterministic tie-break key.
    pub fn pair_id(&self) -> String {
        format!("{}@{:.6}|{}@{:.6}", self.song_a, self.start_a, self.song_b, self.start_b)
    }
}

/// Keeps the `batch * keep` best-scoring candidates and samples `batch` of
/// them without replacement.
pub fn mine_batch<R: Rng + ?Sized>(
    candidates: &[MixPair],
    batch: usize,
    pool: usize,
    keep: usize,
    rng: &mut R,
) -> Result<Vec<MixPair>> {
    if batch == 0 || keep == 0 || keep >= pool {
        return Err(Error::InvalidConfig(format!("need B > 0 and 0 < m < M, got B={batch} M={pool} m={keep}")));
    }
    if candidates.len() < batch * pool {
        return Err(Error::PoolUnderfilled {
            have: candidates.len(),
            need: batch * pool,
        });
    }
    let mut ranked: Vec<&MixPair> = candidates.iter().collect();
    ranked.sort_by(|a, b| {
        b.harmonic_score
            .total_cmp(&a.harmonic_score)
            .then_with(|| a.pair_id().cmp(&b.pair_id()))
    });
    ranked.truncate(batch * keep);
    Ok(ranked.choose_multiple(rng, batch).map(|p| (*p).clone()).collect())
}

/// Mixture with its post-gain references; `mix[n] == gt1[n] + gt2[n]` exactly.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub mix: AudioClip,
    pub gt1: AudioClip,
    pub gt2: AudioClip,
    /// Common factor applied to all three to keep `|mix| <= 1` (1 if none).
    pub peak_scale: f64,
}

/// Peak level the mixture is normalized to when it would clip.
const PEAK_CEILING: f64 = 0.999;

pub fn make_mixture(seg_a: &AudioClip, seg_b: &AudioClip, gain_a: f64, gain_b: f64) -> Result<Mixture> {
    if seg_a.len() != seg_b.len() || seg_a.sample_rate() != seg_b.sample_rate() {
        return Err(Error::ShapeMismatch("segments differ in length or rate".into()));
    }
    if !(gain_a >= 0.0 && gain_b >= 0.0 && gain_a.is_finite() && gain_b.is_finite()) {
        return Err(Error::InvalidConfig(format!("gains ({gain_a}, {gain_b}) must be finite and >= 0")));
    }
    let sum = |a: &AudioClip, b: &AudioClip| -> Result<AudioClip> {
        AudioClip::new(a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect(), a.sample_rate())
    };
    let (mut gt1, mut gt2) = (seg_a.scaled(gain_a), seg_b.scaled(gain_b));
    let mut mix = sum(&gt1, &gt2)?;
    let mut peak_scale = 1.0;
    if mix.peak() > 1.0 {
        peak_scale = PEAK_CEILING / mix.peak();
        gt1 = gt1.scaled(peak_scale);
        gt2 = gt2.scaled(peak_scale);
        mix = sum(&gt1, &gt2)?;
    }
    Ok(Mixture {
        mix,
        gt1,
        gt2,
        peak_scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MimConfig {
    pub length_s: f64,
    /// Batch size B.
    pub batch: usize,
    /// Candidates per batch slot, M.
    pub pool: usize,
    /// Retained candidates per batch slot, m.
    pub keep: usize,
    pub tempo_tolerance: f64,
    /// Maximum level offset between the two sources, in dB.
    pub gain_range_db: f64,
    /// Common RMS both sources are normalized to before the offset.
    pub target_rms: f64,
    pub harmonic: HarmonicConfig,
    pub f0: F0Config,
}

impl Default for MimConfig {
    fn default() -> Self {
        Self {
            length_s: 4.0,
            batch: 8,
            pool: 16,
            keep: 8,
            tempo_tolerance: 4.0,
            gain_range_db: 3.0,
            target_rms: 0.1,
            harmonic: HarmonicConfig::default(),
            f0: F0Config::default(),
        }
    }
}

/// RMS below which a crop counts as silent.
pub const SILENCE_RMS: f64 = 1e-6;
/// Extra crops drawn after a silent one before giving up.
pub const MAX_CROP_RETRIES: usize = 5;

fn crop_audible<R: Rng + ?Sized>(song: &AnnotatedSong, length_s: f64, rng: &mut R) -> Result<(AudioClip, f64)> {
    for _ in 0..=MAX_CROP_RETRIES {
        let (seg, start) = crop_at_downbeat(song, length_s, rng)?;
        if seg.rms() >= SILENCE_RMS {
            return Ok((seg, start));
        }
        log::debug!("{}: silent crop at {start:.3} s, retrying", song.id);
    }
    Err(Error::SilentSegment(MAX_CROP_RETRIES))
}

/// Gains bringing both crops to `target_rms` and then apart by a uniform
/// offset in `[-range_db, range_db]` dB, split evenly between them.
pub fn loudness_gains<R: Rng + ?Sized>(rms_a: f64, rms_b: f64, target_rms: f64, range_db: f64, rng: &mut R) -> (f64, f64) {
    let offset_db = if range_db > 0.0 { rng.random_range(-range_db..=range_db) } else { 0.0 };
    let half = 10f64.powf(offset_db / 40.0);
    (target_rms / rms_a * half, target_rms / rms_b / half)
}

/// Mining output: the chosen pairs with their rendered mixtures.
pub struct MinedMixture {
    pub pair: MixPair,
    pub mixture: Mixture,
}

struct Candidate {
    pair: MixPair,
    seg_a: AudioClip,
    seg_b: AudioClip,
}

/// Draws `count` mixtures, `cfg.batch` at a time, from the corpus. All
/// randomness derives from `seed`; harmonic scoring runs in parallel.
pub fn generate_mixtures(songs: &mut [AnnotatedSong], count: usize, cfg: &MimConfig, seed: u64) -> Result<Vec<MinedMixture>> {
    if songs.len() < 2 {
        return Err(Error::InvalidConfig("mixing needs at least two songs".into()));
    }
    songs.sort_by(|a, b| a.id.cmp(&b.id));
    for s in songs.iter_mut() {
        s.f0_or_estimate(&cfg.f0)?;
    }
    let tempi: Vec<(String, f64)> = songs.iter().map(|s| Ok((s.id.clone(), s.bpm()?))).collect::<Result<_>>()?;
    let groups: Vec<TempoGroup> = group_by_tempo(&tempi, cfg.tempo_tolerance)?
        .into_iter()
        .filter(|g| g.members.len() >= 2)
        .collect();
    if groups.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no tempo group within ±{} BPM has two songs",
            cfg.tempo_tolerance
        )));
    }
    let index: BTreeMap<&str, &AnnotatedSong> = songs.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut candidates = Vec::with_capacity(cfg.batch * cfg.pool);
        for _ in 0..cfg.batch * cfg.pool {
            let group = groups.choose(&mut rng).expect("non-empty");
            let mut ids: Vec<&String> = group.members.iter().collect();
            ids.shuffle(&mut rng);
            let (a, b) = (index[ids[0].as_str()], index[ids[1].as_str()]);
            let (seg_a, start_a) = crop_audible(a, cfg.length_s, &mut rng)?;
            let (seg_b, start_b) = crop_audible(b, cfg.length_s, &mut rng)?;
            let (gain_a, gain_b) = loudness_gains(seg_a.rms(), seg_b.rms(), cfg.target_rms, cfg.gain_range_db, &mut rng);
            candidates.push(Candidate {
                pair: MixPair {
                    song_a: a.id.clone(),
                    song_b: b.id.clone(),
                    start_a,
                    start_b,
                    length: cfg.length_s,
                    gain_a,
                    gain_b,
                    harmonic_score: 0.0,
                },
                seg_a,
                seg_b,
            });
        }
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|c| {
                let fa = index[c.pair.song_a.as_str()].f0.as_ref().expect("filled above");
                let fb = index[c.pair.song_b.as_str()].f0.as_ref().expect("filled above");
                harmonic_overlap_score(fa.window(c.pair.start_a, c.pair.length), fb.window(c.pair.start_b, c.pair.length), &cfg.harmonic)
            })
            .collect::<Result<_>>()?;
        for (c, s) in candidates.iter_mut().zip(scores) {
            c.pair.harmonic_score = s;
        }
        let pairs: Vec<MixPair> = candidates.iter().map(|c| c.pair.clone()).collect();
        for chosen in mine_batch(&pairs, cfg.batch, cfg.pool, cfg.keep, &mut rng)? {
            if out.len() == count {
                break;
            }
            let c = candidates.iter().find(|c| c.pair == chosen).expect("selected from candidates");
            let mixture = make_mixture(&c.seg_a, &c.seg_b, chosen.gain_a, chosen.gain_b)?;
            let mut pair = chosen;
            pair.gain_a *= mixture.peak_scale;
            pair.gain_b *= mixture.peak_scale;
            out.push(MinedMixture { pair, mixture });
        }
    }
    Ok(out)
}
