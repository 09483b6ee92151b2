//! Sparse coloured random graphs near criticality: samplers, empirical pair
//! measures, large-deviation rate functionals with their Legendre duality,
//! exact counting oracles, and importance-sampled Monte Carlo estimators.

pub mod error;
pub mod graph;
pub mod legendre;
pub mod measures;
pub mod montecarlo;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use types::{Kernel, PairMeasure, TestFunction, TypeLaw};
