pub mod cooccurrence;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod matrix_io;
pub mod pipeline;
pub mod prior;
pub mod sampler;
pub mod spectral;

pub use error::{Error, Result};
