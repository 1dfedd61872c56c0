//! Real-time recession forecasting.
//!
//! Penalized and class-weighted logistic regression fitted by coordinate
//! descent, blocked time-series cross-validation with cost-sensitive
//! thresholds, vintage-faithful expanding-window backtests, classification
//! metrics, and turning-point dating of a principal-component factor.

pub mod backtest;
pub mod cv;
pub mod data_io;
pub mod dating;
pub mod error;
pub mod glm;
pub mod metrics;
pub mod month;
pub mod numfmt;
pub mod preprocess;
pub mod synthgen;

pub use error::{Error, Result};
pub use month::Month;
