//! Partially distinguishable identical particles: reduced states, wave and
//! particle measures, interference visibilities and their complementarity.

pub mod combinatorics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod measures;
pub mod state_file;
pub mod states;
pub mod tolerances;

pub use error::{Error, Result};
