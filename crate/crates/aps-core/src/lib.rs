//! Closed-loop artificial pancreas simulation and safety-monitoring toolkit.
//!
//! The crate wires together a virtual-patient glucose model, reference insulin
//! controllers, a software fault-injection engine, bounded-time STL rule
//! evaluation, blood-glucose risk labeling, threshold learning with a
//! bound-constrained quasi-Newton optimizer, and a family of runtime safety
//! monitors with a hazard-mitigation policy. Campaigns of simulations are
//! deterministic under a fixed seed and persist as per-scenario CSV traces
//! with JSON sidecars, so every evaluation metric can be recomputed offline.

pub mod controller;
pub mod error;
pub mod fault;
pub mod glucose;
pub mod io;
pub mod learn;
pub mod metrics;
pub mod monitor;
pub mod pipeline;
pub mod risk;
pub mod scs;
pub mod sim;
pub mod stl;

pub use error::{Error, Result};
pub use risk::Hazard;
