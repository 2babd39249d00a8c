//! Sign-language-to-text toolkit: keypoint ingestion and normalization,
//! stochastic frame augmentation / skip sampling, a recurrent
//! encoder-decoder translator with additive attention, translation
//! metrics, and a synthetic corpus generator for end-to-end checks.

pub mod error;
pub mod keypoint;
pub mod normalize;
pub mod select;
pub mod metrics;
pub mod corpus;
pub mod features;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};
