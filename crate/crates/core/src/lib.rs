//! Spatiotemporal statistics and Markov-chain modelling of geolocated
//! transaction records.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the precision for common uses.

pub mod cli;
pub mod fit;
pub mod geostats;
pub mod graph;
pub mod ingest;
pub mod markov;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sweep;
pub mod synth;

pub type EmpiricalF64 = geostats::EmpiricalDistribution<f64>;
pub type EmpiricalF32 = geostats::EmpiricalDistribution<f32>;
pub type TransitionF64 = markov::TransitionMatrix<f64>;
pub type TransitionF32 = markov::TransitionMatrix<f32>;
pub type KsResultF64 = fit::KsResult<f64>;
pub type KsResultF32 = fit::KsResult<f32>;
pub type PowerLawFitF64 = fit::PowerLawFit<f64>;
pub type PowerLawFitF32 = fit::PowerLawFit<f32>;
pub type MarkovModelF64 = markov::MarkovModel<f64>;
pub type MarkovModelF32 = markov::MarkovModel<f32>;
