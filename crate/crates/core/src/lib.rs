pub mod coarsen;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod grid;
pub mod mwis;
pub mod partition;
pub mod qubo;
pub mod rng;
pub mod tree;
pub mod validity;

pub use error::{Error, Result};
