//! Two-singer separation toolkit: cross-source attention, magnitude-penalty
//! losses with analytic gradients, musically informed mixing, and segmental
//! separation metrics.

pub mod attention;
pub mod audio;
pub mod bandsplit;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod mim;
pub mod selftest;
pub mod separator;
pub mod stft;
pub mod synth;
pub mod weights;

pub use audio::{AudioClip, WavFormat};
pub use error::{Error, Result};
