//! Deterministic agent-based computational economics engine.
//!
//! Two structured substrates ([`landscape`] NK fitness landscapes and
//! [`automaton`] cellular automata), adaptive [`search`] over binary
//! configurations, multi-unit [`organization`]s with coordination modes,
//! their mid- and long-term [`adaptation`], an agentized
//! [`hiddenaction`] principal-agent model, and the Monte-Carlo
//! [`harness`] that drives all of them from declarative configs.
//!
//! The numeric core is generic over [`Scalar`] (`f64` or `f32`); the
//! aliases below fix the common choices.

// parameter checks are written as `!(x >= 0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod automaton;
pub mod error;
pub mod harness;
pub mod hiddenaction;
pub mod landscape;
pub mod organization;
pub mod rng;
pub mod scalar;
pub mod search;

pub use error::{Error, Result};
pub use landscape::{Configuration, InteractionPattern, LandscapeSpec};
pub use rng::Stream;
pub use scalar::Scalar;

pub type Landscape = landscape::Landscape<f64>;
pub type LandscapeF32 = landscape::Landscape<f32>;
pub type OrgDesign = organization::OrgDesign<f64>;
pub type Evaluator = search::Evaluator<f64>;
pub type Propensities = adaptation::Propensities<f64>;
pub type LearningParams = adaptation::LearningParams<f64>;
pub type GrowthStudy = adaptation::GrowthStudy<f64>;
pub type ModelParams = hiddenaction::ModelParams<f64>;
