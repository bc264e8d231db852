//! Kernel estimation for dependent (2-mixing) time series and panels.
//!
//! The crate provides
//! - even kernels of order up to 8 and their multiplicative products ([`kernels`]),
//! - seeded simulators for linear, ARCH(∞), stochastic volatility and panel designs ([`processes`]),
//! - the Rosenblatt–Parzen density estimator, the Nadaraya–Watson regression estimator and the
//!   panel common-mean estimator ([`estimators`]),
//! - closed-form bandwidth and rate exponents under mixing assumptions ([`theory`]),
//! - a reproducible Monte Carlo harness that fits empirical MSE decay exponents ([`experiments`]).
//!
//! Everything numeric except the simulators is generic over [`Scalar`]; the aliases below fix the
//! common `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimators;
pub mod experiments;
pub mod kernels;
pub mod processes;
pub mod sample;
pub mod scalar;
pub mod seed;
pub mod table;
pub mod theory;

pub use scalar::Scalar;

pub type Kernel = kernels::Kernel<f64>;
pub type Kernel32 = kernels::Kernel<f32>;
pub type Sample = sample::Sample<f64>;
pub type PanelSample = sample::PanelSample<f64>;
pub type EstimatorConfig = estimators::EstimatorConfig<f64>;
pub type EstimateResult = estimators::EstimateResult<f64>;
pub type ModelSpec = theory::ModelSpec<f64>;
pub type BandwidthPlan = theory::BandwidthPlan<f64>;
