//! Simulation and theory toolkit for training linear classifiers on synthesized
//! labels that have been filtered by a verifier.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`] samples Gaussian mixtures and noisy Zipf data,
//! * [`labelers`] produces synthesized labels,
//! * [`pruning`] filters them and tallies survival counts,
//! * [`orthant`] holds the normal / bivariate-normal kernel used for the
//!   closed-form keep rates,
//! * [`theory`] evaluates breakdown points and the reduced KKT fixed point,
//! * [`trainer`] fits ridge-regularized logistic regression,
//! * [`hutter`] runs the label-noise Zipf scaling experiment,
//! * [`proxy`] estimates keep rates from similarity scores,
//! * [`experiments`] wires everything into reproducible CSV sweeps.
//!
//! Monte Carlo loops and sweep cells go through [`exec`], which uses rayon when
//! the `parallel` feature is enabled and a plain loop otherwise. Results never
//! depend on which path runs.

pub mod distributions;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod hutter;
pub mod labelers;
pub mod orthant;
pub mod proxy;
pub mod pruning;
pub mod rng;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Execution;
