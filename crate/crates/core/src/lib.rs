//! Simulation and verification toolkit for quantum stochastic filtering.
//!
//! The crate integrates linear (likelihood-carrying) and nonlinear
//! (posterior) stochastic wave and master equations for diffusive and
//! counting observation, provides an exact symbolic quantum Itô algebra, and
//! ships closed-form qubit, instantaneous-measurement, hidden-variable and
//! blackbody-spectrum models that act as oracles for the integrators.

pub mod bell_hidden;
pub mod cat_model;
pub mod cli;
pub mod error;
pub mod ito_algebra;
pub mod noise;
pub mod qubit_model;
pub mod spectra;
pub mod statespace;
pub mod trajectories;

pub use error::{Error, Result};
pub use statespace::{BlochVector, DensityMatrix, Operator, StateVector, C64};
