//! Feature extraction and clustering of aeroacoustic source spectra
//! measured at several Mach numbers.
//!
//! The pipeline runs per source from gridded spectra to a fixed-length
//! feature vector ([`features`]), then over all sources through log
//! transform, standardization and kernel PCA ([`kpca`]) into density-based
//! clustering ([`clustering`]). [`evaluation`] compares the result with expert
//! labels and [`synthgen`] produces sources with known ground truth.

pub mod canonical;
pub mod clustering;
pub mod data_model;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod kpca;
pub mod numeric;
pub mod pipeline;
pub mod power_scaling;
pub mod self_similarity;
pub mod spatial_shape;
pub mod spectra_prep;
pub mod synthgen;
pub mod tonality;

pub use data_model::{load_bundle, write_bundle, Bundle, SourceRecord, SpectrumSample};
pub use error::{Error, Result};
