//! Automatic fault detection for photovoltaic plants.
//!
//! Measured AC power is compared with a performance model (or reduced to a
//! performance ratio), the deviations are grouped and classified with
//! control charts or 1-D k-means, and the resulting daily alerts are scored
//! against a maintenance-ticket calendar.

pub mod clustering;
pub mod deviation;
pub mod energy_loss;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod ingestion;
pub mod models;
pub mod pipeline;
pub mod spc;
pub mod synthetic;

pub use error::{Error, Result};
