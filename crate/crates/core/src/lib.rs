//! Recursive max-linear models on DAGs: simulation, causal order learning
//! from scalings of the spectral measure, and recovery of the coefficient
//! matrix.

pub mod asymptotics;
pub mod dag;
pub mod error;
pub mod identification;
pub mod io;
pub mod learning;
pub mod model;
pub mod pipeline;
pub mod spectral;

pub use dag::{CausalOrder, Dag, EdgeWeights, Generations};
pub use error::{Error, Result};
pub use model::{MlMatrix, SampleMatrix};
pub use nalgebra;
