//! trustlab: synthetic judge-advisor experiments, advice-reliability
//! estimation models, advice-value analytics and an agent-based model of
//! trust formation and bias polarization.
//!
//! The library is organized around the pipeline the binary drives:
//!
//! * [`core`] — probabilities, sides, confidence reports, deterministic
//!   RNG streams;
//! * [`judge`] — the synthetic observer and its 2-down-1-up staircase;
//! * [`advisors`] — the virtual-advisor policies of the three experiments;
//! * [`models`] — the Accuracy/Consensus/Confidence reliability estimators
//!   and the Bayesian confidence update;
//! * [`infogain`] — information-gain analytics and Type-2 AUROC;
//! * [`metrics`] — influence, confidence change and the correlation harness;
//! * [`session`] — whole-session simulation;
//! * [`abm`] — the trust network, its dynamics and the sweep harness;
//! * [`cli`] — run configuration, validation and output pipelines.

pub mod abm;
pub mod advisors;
pub mod cli;
pub mod core;
pub mod infogain;
pub mod judge;
pub mod metrics;
pub mod models;
pub mod session;

pub(crate) mod output;
