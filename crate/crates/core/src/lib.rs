//! Fusion of multi-lead ECG (and other multivariate) recordings into a single
//! reconstructed phase-space trajectory.
//!
//! * [`embedding`]: delay embedding and (m, τ) estimation.
//! * [`fis`]: the fuzzy systems rating each lead's motion.
//! * [`lwlpa`]: local weighted linear prediction and the weighted affine fit.
//! * [`nfda`]: step-wise fuzzy-weighted trajectory fusion.
//! * [`vcgprep`]: constant-lead screening and the inverse Dower transform.
//! * [`synthgen`]: synthetic VCG and SNR-calibrated noise.
//! * [`recordio`]: record files and segmentation.
//! * [`pipeline`]: the record-level glue used by the CLI.

pub mod embedding;
mod error;
pub mod fis;
pub mod lwlpa;
pub mod nfda;
pub mod pipeline;
pub mod recordio;
pub mod synthgen;
pub mod vcgprep;

pub use embedding::{delay_embed, EmbeddingParams, TimeSeries, Trajectory};
pub use error::{Error, Result};
pub use fis::{build_fis_alpha, build_fis_d, FuzzySystem};
pub use nfda::{disorder_metric, fuse, FusionConfig};
pub use vcgprep::MultiLeadRecord;
