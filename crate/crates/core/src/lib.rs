//! Regularised frequency-domain estimation for high-dimensional multivariate
//! point processes.
//!
//! The pipeline runs: event streams ([`hawkes`] simulation or files read via
//! [`io`]) -> mean-corrected tapered Fourier transforms ([`taper`]) ->
//! multi-taper periodograms ([`periodogram`]) -> penalized Whittle estimates
//! of the inverse spectral density and partial-coherence graphs ([`rse`]),
//! with tuning-parameter selection in [`tuning`] and Monte Carlo study
//! harnesses in [`experiments`].

pub mod error;
pub mod experiments;
pub mod hawkes;
pub mod hermitian;
pub mod io;
pub mod periodogram;
pub mod rse;
pub mod seed;
pub mod taper;
pub mod tuning;

pub use error::{Error, Result};
pub use hawkes::{EdgeSet, EventData, HawkesModel, PresetId};
pub use hermitian::{HermitianMatrix, NormKind};
pub use periodogram::{FrequencyTag, SpectralMatrix};
pub use rse::{PartialCoherenceGraph, Penalty, RseConfig, RseResult};
pub use taper::TaperSet;
