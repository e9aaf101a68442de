//! Space-only, space-time and spectral proper orthogonal decomposition of
//! snapshot time series.
//!
//! The pipeline is `SnapshotSeries` → `DataMatrix` (or lag correlations) →
//! `ModeSet`, with `FrequencyModeSet` for the spectral variant and the
//! `analysis` module for convergence metrics and seeded trial studies.

pub mod analysis;
pub mod cli;
pub mod correlation;
pub mod decomposition;
pub mod embedding;
pub mod error;
pub mod spod;
pub mod timeseries;

pub use correlation::{
    assemble_block_toeplitz, hankel_correlation, lag_correlations, CorrelationKind, LagCorrelationSet,
    SpaceTimeCorrelation,
};
pub use decomposition::{
    space_only_pod, spacetime_pod, spacetime_pod_toeplitz, weighted_svd_modes, Method, ModeSet, WeightSpec,
};
pub use embedding::{build_embedded, reshape_mode, DataMatrix, EmbeddingSpec};
pub use error::{Error, Result};
pub use spod::{spod, FrequencyModeSet, SpodSpec, Window};
pub use timeseries::{generate, GeneratorKind, GeneratorSpec, SnapshotSeries};
