//! Simulation and effective-model toolkit for parametrically driven iSWAP and bSWAP gates
//! between two fixed-frequency transmons coupled through a flux-modulated tunable coupler.

pub mod cli;
pub mod device;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod spectroscopy;

pub use error::{Error, Result};
