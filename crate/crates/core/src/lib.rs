//! Dominant-hand prediction from paired wrist-worn physiological streams.
//!
//! The pipeline runs ingest → timeline → features → selection → models, with
//! [`synth`] providing paired datasets whose ground truth is known. Numeric
//! stages are generic over [`Scalar`]; the aliases below fix `f64`.

pub mod config;
pub mod contextlog;
pub mod domain;
pub mod error;
pub mod features;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod models;
pub mod scalar;
pub mod selection;
pub mod synth;
pub mod timeline;
pub mod vocab;

pub use domain::{Channel, DeviceSetting, Hand, HandRole, TimeOfDay, WearFlag};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use vocab::Vocabulary;

pub type FeatureMatrix64 = matrix::FeatureMatrix<f64>;
pub type FeatureMatrix32 = matrix::FeatureMatrix<f32>;
pub type TrainedModel64 = models::TrainedModel<f64>;
pub type TrainedModel32 = models::TrainedModel<f32>;
pub type Dense64 = models::Dense<f64>;
