//! Prediction of motion artifacts on sampled displays.
//!
//! A moving stimulus is rendered both as continuous motion and as it appears
//! on a display with a finite capture rate, hold interval, pixel response,
//! fill factor and colour layout. Both are transformed to the
//! spatiotemporal frequency domain, filtered by a luminance-dependent
//! contrast-sensitivity model and transformed back, and the difference
//! between the two percepts is classified as flicker, judder, edge banding,
//! motion blur or colour breakup. A separate path predicts depth errors on
//! time-interlaced stereoscopic displays.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csf;
pub mod error;
pub mod params;
pub mod pipeline;
pub mod scalar;
pub mod spectrum;
pub mod stereo;
pub mod stimulus;

pub use error::{Error, Result};
pub use params::{
    AngleConvention, ArtifactThresholds, Backend, DisplayParams, EyeOrder, GridSpec, RgbMode, RunConfig,
    RunMode, StereoParams, StereoTiming, StimulusParams, ViewingParams,
};
pub use scalar::Real;

pub type Raster = stimulus::SpaceTimeRaster<f64>;
pub type Raster32 = stimulus::SpaceTimeRaster<f32>;
pub type Spectrum = spectrum::Spectrum<f64>;
pub type Spectrum32 = spectrum::Spectrum<f32>;
pub type CsfModel = csf::CsfModel<f64>;
pub type RunResult = pipeline::RunResult<f64>;
pub type ComparisonResult = pipeline::ComparisonResult<f64>;
