//! Viral-concentration trajectory modelling and outbreak-testing simulation.
//!
//! The crate is split along the pipeline:
//!
//! * [`kinetics`] – the piecewise-linear log₁₀ trajectory and population sampling.
//! * [`testmodels`] – LFD logistic and PCR limit-of-detection result models.
//! * [`inference`] – hierarchical censored-data model fitted by adaptive
//!   Metropolis-within-Gibbs.
//! * [`outbreak`] – Poisson branching-process simulator emitting infections in time order.
//! * [`strategies`] – the five testing strategies run over an outbreak.
//! * [`kpi`] – Monte Carlo evaluation over posterior draws and sensitivity sweeps.

pub mod dist;
pub mod inference;
pub mod kinetics;
pub mod kpi;
pub mod outbreak;
pub mod seed;
pub mod strategies;
pub mod testmodels;

mod error;

pub use error::ParamError;
