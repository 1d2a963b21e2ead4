//! Simulation and HVAC scheduling for a single-zone building with
//! phase-change material in its envelope.

pub mod control;
pub mod data;
pub mod metrics;
pub mod optimizer;
pub mod par;
pub mod runner;
pub mod surrogate;
pub mod thermal;
pub mod trajectory;
