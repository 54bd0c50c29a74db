//! Spectral estimation for replicated nonstationary time series.
//!
//! A replicated locally stationary wavelet process is an ensemble of
//! trials whose second-order structure evolves both within each trial
//! (over time) and across trials (over replicates). This crate provides:
//!
//! - discrete non-decimated wavelets, autocorrelation wavelets and the
//!   inner-product matrix used for bias correction ([`wavelet`]);
//! - the non-decimated transform and raw (cross-)periodograms
//!   ([`transform`]);
//! - replicate/time smoothing and corrected spectral estimates
//!   ([`spectral`]);
//! - replicate-coherence estimation between trial pairs ([`coherence`]);
//! - an ensemble simulator with optionally correlated innovations
//!   ([`simulate`]);
//! - a Monte-Carlo harness for MSE/bias benchmarking ([`evaluate`]);
//! - CSV/JSON ingestion, preprocessing and export ([`io`]).
//!
//! Scale indexing is 1-based with scale 1 the finest; series length `T`
//! and replicate count `R` are powers of two for the estimation entry
//! points. Rescaled time is `z = k/T` and rescaled replicate `nu = r/R`.

pub mod coherence;
pub mod error;
mod fft;
pub mod evaluate;
pub mod io;
pub mod simulate;
pub mod spectral;
pub mod transform;
pub mod wavelet;

pub use error::{Error, Result};
pub use wavelet::{
    build_discrete_wavelets, inner_product_matrix, DiscreteWaveletSet, FamilyId,
    InnerProductMatrix, WaveletFamily,
};
