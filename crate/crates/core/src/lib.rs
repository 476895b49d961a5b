//! Core of the rugged-landscape choice experiment platform.
//!
//! - [`landscape`]: generation, framing and validation of toroidal landscapes
//! - [`helper`]: the simulated-annealing teammate that drives the right dial
//! - [`session`]: treatment assignment, task lifecycle and the event log
//! - [`metrics`] and [`stats`]: behavioural metrics and summary statistics
//! - [`synth`]: scripted participants for cohort simulation
//! - [`export`]: layered-grid export of finished tasks

pub mod error;
pub mod events;
pub mod export;
pub mod grid;
pub mod helper;
pub mod landscape;
pub mod metrics;
pub mod session;
pub mod stats;
pub mod synth;

pub use error::*;
pub use grid::{dial_letter, toroidal_l1, DialSetting, Torus};
