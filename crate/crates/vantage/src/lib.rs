//! Viewpoint-token conditioned image generation at desk scale.
//!
//! The pipeline: a five-parameter object-centric camera pose is encoded into
//! a fixed-length vector, mapped by a small MLP into one token embedding,
//! and spliced into a toy caption's token sequence. A procedurally rendered
//! two-part dataset trains a small denoising generator on those sequences; a
//! convolutional pose regressor then measures how well generated images
//! follow the requested viewpoint.
//!
//! Core math is generic over the scalar type ([`scalar::Real`], f32 or f64);
//! the aliases below pin the conventional instantiations: f64 for geometry
//! and metrics, f32 for trained models.

pub mod conditioning;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod generator;
pub mod geometry;
pub mod nn;
pub mod regressor;
pub mod stats;
pub mod render;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Geometry and metrics default to f64.
pub type Pose = geometry::CameraPose<f64>;
pub type Frame = geometry::CameraFrame<f64>;
pub type Ranges = geometry::SamplingRanges<f64>;
pub type Encoding = geometry::encoding::ViewpointEncoding<f64>;

/// Trained models default to f32.
pub type Mlp32 = conditioning::ViewpointMlp<f32>;
pub type Vocab32 = conditioning::Vocabulary<f32>;
