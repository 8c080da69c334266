//! Desk-scale harness for the lifecycle of a trustworthy traffic-classifier xApp.
//!
//! The pieces line up with the stages an operator walks through:
//!
//! - [`matsim`] generates labeled multi-access (5G / WiFi / LiFi) traffic windows.
//! - [`model`] trains and serializes the 25 → 64 → 64 → 64 → 2 ReLU classifier.
//! - [`verify`] certifies logit bands under L∞ input perturbation (IBP and CROWN).
//! - [`explain`] attributes predictions to input features with Shapley values.
//! - [`aiplane`] runs the orchestration / cognition / monitoring deployment protocol.
//! - [`pipeline`] chains everything into an MLOps run with a publish/reject gate.
//! - [`store`] is the content-addressed artifact repository and metrics log.

pub mod aiplane;
pub mod clock;
pub mod dataset;
pub mod explain;
pub mod matsim;
pub mod model;
pub mod numfmt;
pub mod pipeline;
pub mod store;
pub mod verify;

pub use dataset::{Dataset, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
pub use model::MlpModel;
