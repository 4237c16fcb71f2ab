//! Near-expiry behaviour of American puts under exponential Lévy models:
//! model definitions, Fourier European pricing, a PIDE obstacle solver with
//! free-boundary extraction, closed-form asymptotic laws, and the auxiliary
//! Brownian stopping problem that fixes the `d < 0` rate constant.

pub mod asymptotics;
pub mod error;
pub mod european;
pub mod harness;
pub mod levy;
pub mod pide;
pub mod quadrature;
pub mod stopping;

pub use error::{Error, Result};
