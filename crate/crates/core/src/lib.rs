//! Oblivious routing from random walks.
//!
//! A splittable policy built from forward and reversed walk steps, a
//! Valiant-style path sampler with a packet simulator, an unsplittable
//! reduction for general demands, and the tooling to measure all of them
//! against the optimal congestion.

pub mod error;
pub mod eval;
pub mod expansion;
pub mod generators;
pub mod graph;
pub mod packet;
pub mod paths;
pub mod seed;
pub mod spectral;
pub mod splittable;
pub mod unsplittable;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{build_graph, Capacity, Graph};
pub use seed::SeedTree;
pub use spectral::{lazify_if_needed, DistributionVector, SpectralProfile, TransitionMatrix};
