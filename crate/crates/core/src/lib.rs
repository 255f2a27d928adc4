//! Exact-arithmetic laboratory for frequency pyramids over `R/QZ`,
//! prime-labeled path graphs and global frequency recovery.

pub mod error;
pub mod fixtures;
pub mod graph;
pub mod primes;
pub mod pyramid;
pub mod rational;
pub mod recover;
pub mod synth;
pub mod torus;

pub use error::{Error, Result};
pub use rational::Rational;
pub use torus::{Modulus, TorusPoint};
