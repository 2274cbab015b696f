//! Coverage of cache-assisted coordinated multi-point (CoMP) transmission
//! from clustered ground small cells to an aerial user.
//!
//! The Monte Carlo engine ([`sir_mc`]) samples networks and composes the SIR
//! under several serving schemes; [`analytic`] evaluates the moment-matched
//! upper bound through the interference Laplace transform.
//!
//! Every numerical routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod analytic;
pub mod caching;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod num;
pub mod params;
pub mod rng;
pub mod sir_mc;
pub mod stats;

pub use error::{Error, Result};
pub use num::Real;
pub use params::{BlockageDenominator, Numerics, SystemParams};
pub use sir_mc::Scheme;

pub type Params = SystemParams<f64>;
pub type ParamsF32 = SystemParams<f32>;
pub type Link = channel::LinkModel<f64>;
pub type Field = analytic::InterferenceField<f64>;
pub type Sample = sir_mc::SirSample<f64>;
pub type Estimate = sir_mc::CoverageEstimate<f64>;
pub type Bound = analytic::AnalyticEstimate<f64>;
