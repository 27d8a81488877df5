//! # neuroband
//!
//! Spectrally selective EEG classification: ingest multi-channel recordings,
//! extract Welch band powers, wavelet band energies and spectral summaries,
//! then classify sessions with regularized QDA or a random forest under a
//! subject-disjoint, leak-free protocol.
//!
//! Pipeline stages, each its own module:
//!
//! ```text
//! EDF / CSV ──ingest──▶ Recording
//!   ──preprocess──▶ resample 256 Hz → band-pass 0.5–45 Hz → center → Epochs
//!   ──spectral──▶ Welch PSD → relative band powers + summaries (FFT_b, …)
//!   ──wavelet───▶ db4 DWT → level energies → band mapping (DWT_b)
//!   ──features──▶ 13-dim session vectors, subject-disjoint splits
//!   ──classify──▶ z-score → PCA → QDA / random forest (+ grid search)
//!   ──metrics───▶ macro Acc/Prec/Rec/F1/AUROC/AUPRC, confusion matrices
//! ```
//!
//! [`attention`] adds model-agnostic KL diagnostics over externally exported
//! attention maps, plus per-band signal splitting for downstream models.
//! [`pipeline`] wires everything into the operations the `neuroband` CLI
//! exposes.

pub mod attention;
pub mod classify;
pub mod dsp;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod spectral;
pub mod wavelet;

pub use ingest::{Manifest, Recording};
pub use preprocess::{Epoch, PreprocConfig};
pub use spectral::{BandDef, BandPowerSet, PsdEstimate, SpectralSummaries};
pub use wavelet::{WaveletDecomposition, WaveletEnergySet, WaveletSpec};
