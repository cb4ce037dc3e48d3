//! Structural information in 1D elastodynamic models.
//!
//! A layered bar is simulated on a staggered velocity-stress grid. Pairs of
//! runs with a system parameter nudged up and down give differential wave
//! fields, from which information densities, fluxes and sources are
//! evaluated and balanced, and sensor-side information is reported in
//! Cbit units.

pub mod balance;
pub mod cbit;
pub mod config;
pub mod difffield;
pub mod error;
pub mod model;
pub mod output;
pub mod pipeline;
pub mod presets;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
