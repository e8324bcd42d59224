//! Numerical laboratory for optimal transport and matchings of stationary
//! point processes on periodic windows.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: the periodic box, toroidal distances and overlap volumes.
//! * [`process`]: seeded samplers (Poisson, lattices, Ginibre) and the point
//!   set text format.
//! * [`rpcm`]: analytic reduced pair correlation models and derived
//!   quantities (structure factor, tail functions, number variance).
//! * [`spectral`]: scattering intensity, Fourier coefficients of rescaled
//!   samples and Monte Carlo spectral/variance estimates.
//! * [`transport`]: exact assignment, semidiscrete min-cost flow, Sinkhorn,
//!   stable and dyadic matchings.
//! * [`bounds`]: closed-form rate functions and Fourier-analytic upper bounds.

pub mod bounds;
pub mod error;
pub mod fmt;
pub mod geometry;
pub mod process;
pub mod quad;
pub mod rng;
pub mod rpcm;
pub mod spectral;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::Window;
pub use process::{PointSet, ProcessSpec};
pub use rpcm::RpcmModel;
pub use transport::{CostFn, MatchResult};
