//! Numerics, differential privacy, sample release, credibility and adversary
//! models for fair decentralized deep learning with differential privacy.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common instantiations.

pub mod adversary;
pub mod credibility;
pub mod error;
pub mod ids;
pub mod numerics;
pub mod privacy;
pub mod samplegen;
pub mod scalar;

pub use error::{Error, Result};
pub use ids::PartyId;
pub use scalar::Scalar;

pub type Matrix32 = numerics::Matrix<f32>;
pub type Matrix64 = numerics::Matrix<f64>;
pub type Dataset32 = numerics::Dataset<f32>;
pub type Dataset64 = numerics::Dataset<f64>;
pub type MlpModel32 = numerics::MlpModel<f32>;
pub type MlpModel64 = numerics::MlpModel<f64>;
pub type DenseGradient32 = numerics::DenseGradient<f32>;
pub type DenseGradient64 = numerics::DenseGradient<f64>;
pub type SparseUpdate32 = numerics::SparseUpdate<f32>;
pub type SparseUpdate64 = numerics::SparseUpdate<f64>;
pub type CredibilityList64 = credibility::CredibilityList<f64>;
