//! Noisy ECG window denoising by learned filter selection.
//!
//! Each noisy window is filtered by a zero-phase elliptic low-pass mask and
//! by wavelet soft-thresholding over a sweep of parameters; the filter with
//! the higher SNR against the clean reference becomes the window's label.
//! Classifiers trained on those labels pick a filter for unseen windows.

pub mod classifiers;
pub mod dataset_io;
pub mod elliptic;
pub mod error;
pub mod features;
pub mod labeling;
pub mod pipeline;
pub mod rng;
pub mod signal;
pub mod transforms;
pub mod wavelet_filter;

pub use error::{Error, Result};
pub use signal::{NoiseConfig, NoiseMode, Signal, WindowedMatrix};
