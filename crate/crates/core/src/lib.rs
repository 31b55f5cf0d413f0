//! Perfect state transfer along dipolar spin-1/2 chains.
//!
//! The crate computes how much amplitude a chain can deliver from a sender
//! block to an extended receiver, solves for the local restoring unitary that
//! turns that amplitude into an exact copy of the sender state, and checks
//! the whole protocol by direct state-vector simulation.
//!
//! Library APIs use 0-based sites; configuration files and the command line
//! use 1-based sites.

pub mod basis;
pub mod chain;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod lambda;
pub mod protocol;
pub mod reproduce;
pub mod restore;

pub use error::{PstError, Result};

/// Complex double.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
