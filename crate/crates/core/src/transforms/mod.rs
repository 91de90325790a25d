//! Forward/inverse transforms used by the two filter paths: the real FFT
//! for the elliptic mask and the multilevel DWT for wavelet shrinkage.

pub mod dwt;
pub mod fft;
#[rustfmt::skip]
mod filters;
pub mod wavelet;

pub use dwt::{dwt, dwt_with, idwt, max_level, Boundary, WaveletCoeffs};
pub use fft::{fft_real, ifft_real, RealFft, SpectrumHalf};
pub use wavelet::{registry, registry_csv, registry_hash, wavelet, Wavelet, WAVELET_COUNT};
