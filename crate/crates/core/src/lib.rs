//! Exact nonlinearity of Boolean functions and neural networks that learn it.
//!
//! [`boolfn`] holds truth tables and their algebra, [`transform`] the Walsh
//! spectrum and nonlinearity oracles, [`dataset`] seeded example generation,
//! [`neural`] a small dense-network engine and [`experiments`] the scripted
//! runs built on top of them.

pub mod boolfn;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod neural;
pub mod rng;
pub mod transform;

pub use boolfn::{sign_encode, AnfCoefficients, SignVector, TruthTable};
pub use dataset::{Dataset, Example, SplitTag, Task};
pub use error::{Error, Result};
pub use neural::{LayerSpec, Network, TrainConfig, WeightInit};
pub use transform::{fwt, nonlinearity, walsh_naive, HadamardMatrix, WalshSpectrum};
