//! Synthetic singing-like signals with exact annotations, for tests, the
//! self-test and demos where no real corpus is available.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioClip, WavFormat};
use crate::error::{Error, Result};
use crate::mim::{AnnotatedSong, Annotation, F0Track};

/// A fixed "singer": harmonic spectral envelope plus vibrato.
#[derive(Clone, Debug, PartialEq)]
pub struct VoiceTimbre {
    /// `(centre Hz, bandwidth in octaves, gain)` resonances.
    pub formants: Vec<(f64, f64, f64)>,
    /// Spectral tilt in dB per octave above 200 Hz.
    pub tilt_db_per_octave: f64,
    pub vibrato_hz: f64,
    pub vibrato_cents: f64,
    pub max_harmonics: usize,
}

impl VoiceTimbre {
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            formants: vec![
                (rng.random_range(450.0..900.0), 0.5, 1.0),
                (rng.random_range(1000.0..2200.0), 0.4, 0.6),
                (rng.random_range(2400.0..3200.0), 0.3, 0.3),
            ],
            tilt_db_per_octave: rng.random_range(-9.0..-5.0),
            vibrato_hz: rng.random_range(4.8..6.2),
            vibrato_cents: rng.random_range(15.0..35.0),
            max_harmonics: 24,
        }
    }

    /// Linear amplitude of a partial at `freq`.
    pub fn envelope(&self, freq: f64) -> f64 {
        let tilt = 10f64.powf(self.tilt_db_per_octave * (freq / 200.0).log2().max(0.0) / 20.0);
        let resonance: f64 = self
            .formants
            .iter()
            .map(|&(c, bw, g)| g * (-0.5 * ((freq / c).log2() / bw).powi(2)).exp())
            .sum();
        tilt * (0.15 + resonance)
    }
}

/// One sung note: MIDI pitch and duration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Note {
    pub midi: f64,
    pub dur_s: f64,
}

pub fn midi_to_hz(midi: f64) -> f64 {
    440.0 * 2f64.powf((midi - 69.0) / 12.0)
}

/// Pitch glide between legato notes, in seconds.
const GLIDE_S: f64 = 0.04;
/// Onset and offset fade of a rendered phrase, in seconds.
const EDGE_FADE_S: f64 = 0.02;
/// RMS of a rendered phrase.
pub const VOICE_RMS: f64 = 0.1;
pub const F0_HOP_S: f64 = 0.01;

/// Renders a legato phrase and its exact F0 track.
pub fn render_voice(notes: &[Note], timbre: &VoiceTimbre, sample_rate: u32) -> Result<(AudioClip, F0Track)> {
    if notes.is_empty() {
        return Err(Error::Empty("melody"));
    }
    let sr = sample_rate as f64;
    let total: f64 = notes.iter().map(|n| n.dur_s).sum();
    let len = (total * sr).round() as usize;
    // Note boundaries in seconds, with log-frequency glides centred on them.
    let mut bounds = Vec::with_capacity(notes.len());
    let mut acc = 0.0;
    for n in notes {
        acc += n.dur_s;
        bounds.push(acc);
    }
    let base_f0 = |t: f64| -> f64 {
        let i = bounds.iter().position(|&b| t < b).unwrap_or(notes.len() - 1);
        let here = notes[i].midi;
        let midi = if i + 1 < notes.len() && t > bounds[i] - GLIDE_S / 2.0 {
            let x = (t - (bounds[i] - GLIDE_S / 2.0)) / GLIDE_S;
            here + (notes[i + 1].midi - here) * x
        } else if i > 0 && t < bounds[i - 1] + GLIDE_S / 2.0 {
            let x = (t - (bounds[i - 1] - GLIDE_S / 2.0)) / GLIDE_S;
            notes[i - 1].midi + (here - notes[i - 1].midi) * x
        } else {
            here
        };
        midi_to_hz(midi)
    };
    let f0_at = |t: f64| base_f0(t) * 2f64.powf(timbre.vibrato_cents * (TAU * timbre.vibrato_hz * t).sin() / 1200.0);

    let nyquist_guard = 0.45 * sr;
    let mut phase = 0.0;
    let mut samples = Vec::with_capacity(len);
    let fade = (EDGE_FADE_S * sr) as usize;
    for n in 0..len {
        let t = n as f64 / sr;
        let f0 = f0_at(t);
        let mut v = 0.0;
        for k in 1..=timbre.max_harmonics {
            let fk = k as f64 * f0;
            if fk >= nyquist_guard {
                break;
            }
            v += timbre.envelope(fk) * (k as f64 * phase).sin();
        }
        let edge = n.min(len - 1 - n);
        let gain = if edge < fade { edge as f64 / fade as f64 } else { 1.0 };
        samples.push(gain * v);
        phase = (phase + TAU * f0 / sr) % TAU;
    }
    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        samples.iter_mut().for_each(|v| *v *= VOICE_RMS / rms);
    }
    let frames = (total / F0_HOP_S).floor() as usize;
    let f0 = F0Track::new(F0_HOP_S, (0..frames).map(|i| f0_at(i as f64 * F0_HOP_S)).collect())?;
    Ok((AudioClip::new(samples, sample_rate)?, f0))
}

/// Random-walk melody on a major scale, notes of one or two beats.
pub fn random_melody<R: Rng + ?Sized>(rng: &mut R, seconds: f64, bpm: f64, tonic_midi: f64) -> Vec<Note> {
    const MAJOR: [f64; 7] = [0.0, 2.0, 4.0, 5.0, 7.0, 9.0, 11.0];
    let beat = 60.0 / bpm;
    let mut degree: i32 = rng.random_range(0..7);
    let mut notes = Vec::new();
    let mut t = 0.0;
    while t < seconds - 1e-9 {
        let beats = if rng.random_bool(0.6) { 1.0 } else { 2.0 };
        let dur = (beats * beat).min(seconds - t);
        let octave = degree.div_euclid(7) as f64;
        let midi = tonic_midi + 12.0 * octave + MAJOR[degree.rem_euclid(7) as usize];
        notes.push(Note { midi, dur_s: dur });
        t += dur;
        degree = (degree + rng.random_range(-2..=2)).clamp(-3, 10);
    }
    notes
}

/// A synthetic annotated song: exact beats, downbeats every fourth beat and
/// the renderer's F0 track.
pub fn synthetic_song(id: &str, seed: u64, seconds: f64, bpm: f64, sample_rate: u32) -> Result<AnnotatedSong> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let timbre = VoiceTimbre::seeded(rng.random());
    let tonic = rng.random_range(55.0..64.0f64).round();
    let melody = random_melody(&mut rng, seconds, bpm, tonic);
    let (clip, f0) = render_voice(&melody, &timbre, sample_rate)?;
    let beat = 60.0 / bpm;
    let beats: Vec<f64> = (0..).map(|k| k as f64 * beat).take_while(|&b| b < seconds).collect();
    let downbeats = beats.iter().step_by(4).copied().collect();
    AnnotatedSong::new(id, clip, beats, downbeats, Some(f0))
}

/// Songs clustered around two tempi so that every tempo group has members
/// to pair.
pub fn synthetic_corpus(n_songs: usize, seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<AnnotatedSong>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_songs)
        .map(|i| {
            let centre = if i % 2 == 0 { 96.0 } else { 124.0 };
            let bpm = centre + rng.random_range(-1.5..1.5);
            synthetic_song(&format!("song{i:03}"), rng.random(), seconds, bpm, sample_rate)
        })
        .collect()
}

/// Writes `<id>.wav` (PCM16) to `audio_dir` and `<id>.json` to `ann_dir`.
pub fn write_corpus(songs: &[AnnotatedSong], audio_dir: &Path, ann_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(audio_dir)?;
    std::fs::create_dir_all(ann_dir)?;
    for s in songs {
        s.clip.write_wav(audio_dir.join(format!("{}.wav", s.id)), WavFormat::Pcm16)?;
        Annotation {
            id: s.id.clone(),
            beats: s.beats.clone(),
            downbeats: s.downbeats.clone(),
            f0: s.f0.clone(),
        }
        .save(ann_dir.join(format!("{}.json", s.id)))?;
    }
    Ok(())
}

/// One voice singing two independent melodies: the same-singer case.
pub fn same_singer_pair(seed: u64, seconds: f64, sample_rate: u32) -> Result<[AudioClip; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let timbre = VoiceTimbre::seeded(rng.random());
    let bpm = rng.random_range(80.0..130.0);
    let first = random_melody(&mut rng, seconds, bpm, 57.0);
    let second = random_melody(&mut rng, seconds, bpm, 57.0);
    Ok([
        render_voice(&first, &timbre, sample_rate)?.0,
        render_voice(&second, &timbre, sample_rate)?.0,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mim::{estimate_bpm, estimate_f0, F0Config};

    #[test]
    fn rendered_pitch_matches_annotation() {
        let notes = [Note { midi: 57.0, dur_s: 0.5 }, Note { midi: 64.0, dur_s: 0.5 }];
        let timbre = VoiceTimbre {
            vibrato_cents: 0.0,
            ..VoiceTimbre::seeded(1)
        };
        let (clip, f0) = render_voice(&notes, &timbre, 16_000).unwrap();
        assert_eq!(clip.len(), 16_000);
        assert!((clip.rms() - VOICE_RMS).abs() < 1e-12);
        assert!((f0.values[20] - 220.0).abs() < 1e-9);
        assert!((f0.values[80] - midi_to_hz(64.0)).abs() < 1e-9);
        let est = estimate_f0(&clip, &F0Config::default()).unwrap();
        assert!((est.values[15] - 220.0).abs() < 3.0, "{}", est.values[15]);
    }

    #[test]
    fn synthetic_song_annotations() {
        let s = synthetic_song("x", 3, 6.0, 100.0, 8000).unwrap();
        assert!((estimate_bpm(&s.beats).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(s.downbeats.len(), s.beats.len().div_ceil(4));
        assert!((s.clip.duration_s() - 6.0).abs() < 1e-3);
        let a = synthetic_song("x", 3, 6.0, 100.0, 8000).unwrap();
        assert_eq!(a.clip, s.clip);
    }

    #[test]
    fn same_singer_pair_is_distinct() {
        let [a, b] = same_singer_pair(0, 2.0, 8000).unwrap();
        assert_eq!(a.len(), b.len());
        let dot: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| x * y).sum();
        assert!(dot.abs() < 0.5 * a.energy());
    }
}
