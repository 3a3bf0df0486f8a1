//! Chest X-ray report label mining and weakly supervised localization
//! scoring.
//!
//! Text side: reports are split into sections and sentences, disease
//! concepts are matched against a lexicon, dependency-path rules mark them
//! negated or uncertain, and the survivors become per-report label vectors.
//! Numeric side: pooling and losses for multi-label scoring, heatmap
//! composition, box generation, and the evaluation metrics. The numeric
//! code is generic over [`num::Scalar`] (`f32` or `f64`); aliases for both
//! are below.

pub mod concept;
pub mod error;
pub mod eval;
pub mod finding;
pub mod labeler;
pub mod localize;
pub mod negation;
pub mod num;
pub mod pooling;
pub mod report;
pub mod selftest;
pub mod stats;

pub use error::{Error, Result};
pub use finding::{Finding, LabelSet};
pub use num::Scalar;

pub type Heatmap32 = localize::Heatmap<f32>;
pub type Heatmap64 = localize::Heatmap<f64>;
pub type BBox32 = localize::BBox<f32>;
pub type BBox64 = localize::BBox<f64>;
pub type Detection32 = localize::Detection<f32>;
pub type Detection64 = localize::Detection<f64>;
pub type LabelScorePair32 = pooling::LabelScorePair<f32>;
pub type LabelScorePair64 = pooling::LabelScorePair<f64>;
pub type ActivationTensor32 = pooling::ActivationTensor<f32>;
pub type ActivationTensor64 = pooling::ActivationTensor<f64>;
pub type PredictionWeights32 = pooling::PredictionWeights<f32>;
pub type PredictionWeights64 = pooling::PredictionWeights<f64>;
