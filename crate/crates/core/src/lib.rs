//! Cyclostationary spectrum sensing and signal identification, desk scale.
//!
//! The crate covers the compute path of a sensing pipeline end to end:
//!
//! * [`waveform`] — synthetic baseband stand-ins for cellular signals (GMSK,
//!   DSSS, CP-OFDM, noise) plus a Rayleigh multipath + AWGN channel,
//! * [`scf`] — spectral correlation function estimation with the FFT
//!   accumulation method (FAM), and a direct brute-force estimator used to
//!   cross-check it,
//! * [`features`] — feature matrices for the classifier (I/Q, amplitude/phase,
//!   FFT, SCF crops) and normalization,
//! * [`nn`] — a from-scratch CNN (conv / leaky ReLU / max-pool / dense) with
//!   softmax cross-entropy, Adam, and early stopping,
//! * [`detect`] — occupancy decisions: a CFAR test on cyclic features and the
//!   CNN-based equivalent,
//! * [`metrics`] — confusion matrices, precision/recall/F1, and the CASE1 /
//!   CASE2 accuracy accounting.
//!
//! Everything here is pure computation over heap buffers: the crate is
//! `no_std` + `alloc`, deterministic for a given seed, and single-threaded.
//! File formats, experiment orchestration, and the CLI live in the companion
//! `cyclosense-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod detect;
mod error;
pub mod features;
pub mod fft;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod scf;
pub mod waveform;

pub use error::Error;
pub use num_complex;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
