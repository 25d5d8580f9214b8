//! Feed-forward regression networks trained with Levenberg-Marquardt, plus a
//! Monte-Carlo harness that sweeps hidden-layer sizes and activations and
//! picks the architecture with the best distribution of validation errors.
//!
//! The numerical core ([`numerics`], [`network`], [`training`]) is generic
//! over the floating-point type through [`numerics::Scalar`]; the aliases
//! below fix it to `f64`, which is what the data pipeline and the selection
//! harness use.

pub mod data;
pub mod network;
pub mod numerics;
pub mod selection;
pub mod training;

pub type DenseMatrix = numerics::DenseMatrix<f64>;
pub type BoxStats = numerics::BoxStats<f64>;
pub type Network = network::Network<f64>;
pub type ParamVector = network::ParamVector<f64>;
pub type SampleSet = training::SampleSet<f64>;
pub type TrainingRecord = training::TrainingRecord<f64>;
pub type ErrorVector = training::ErrorVector<f64>;

pub use data::{Dataset, Normalizer, SplitFractions, SplitIndices};
pub use network::{Activation, Architecture};
pub use training::{StopReason, TrainConfig};
