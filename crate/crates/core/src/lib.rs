//! Conditional restricted Boltzmann machines for structured output
//! prediction.

pub mod bits;
pub mod data;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod training;

pub use bits::{BitVector, CandidateSet};
pub use error::{CrbmError, Result};
pub use model::{CrbmParams, Gradient};
