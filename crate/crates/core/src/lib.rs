//! Desk-scale simulator of an underwater acoustic communication link.
//!
//! The crate models the full physical layer of a shallow-water acoustic
//! modem: carrier construction (cosine/chirp QPSK and chirp
//! inter-displacement alphabets), an eigenray multipath channel with
//! Rayleigh fading, delay jitter, Doppler and white noise, passive
//! time-reversal-mirror equalization over a hydrophone array, matched-filter
//! demodulation, and a seeded Monte-Carlo harness that produces bit-error
//! rate tables and SNR waterfall data.

pub mod channel;
pub mod config;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod modem;
pub mod ptrm;
pub mod waveforms;

pub use error::{Error, Result};
