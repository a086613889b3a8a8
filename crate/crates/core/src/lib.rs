//! Numerical toolkit for coupled spin-oscillators and coupled angular
//! momenta on symplectic and b-symplectic manifolds.

pub mod classify;
pub mod cli;
pub mod eig;
pub mod error;
pub mod exec;
pub mod flow;
pub mod geometry;
pub mod imaging;
pub mod loci;
pub mod sampling;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
