//! Classical simulation and verification of deep multi-scale entanglement
//! renormalization (DMERA) circuits.
//!
//! The numeric kernels are generic over `f32` and `f64`; the aliases below
//! fix the common double-precision choice.

pub mod assignment;
pub mod circuit;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod models;
pub mod optimizer;
pub mod pauli;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};

/// Double-precision density matrix.
pub type DensityMatrix = engine::DensityMatrix<f64>;
/// Double-precision state vector.
pub type StateVector = engine::StateVector<f64>;
/// Double-precision per-location channels.
pub type Channels = engine::Channels<f64>;
/// Double-precision trajectory result.
pub type TrajectoryResult = engine::TrajectoryResult<f64>;
/// Double-precision paired trajectory result.
pub type PairedResult = engine::PairedResult<f64>;
