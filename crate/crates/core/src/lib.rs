//! Radio coverage prediction on raster terrain.
//!
//! Path loss per transmitter combines free-space, line-of-sight and
//! diffraction terms over a terrain and clutter raster, shaped by an
//! antenna diagram. Coverage is the best-server received power per cell.
//! Transmitters can be computed serially or farmed out to workers by the
//! [`runtime`].

pub mod antenna;
pub mod bench;
pub mod cli;
pub mod engine;
mod error;
pub mod propagation;
pub mod runtime;
pub mod store;
pub mod synthetic;
pub mod terrain;

pub use error::{Error, Result};
