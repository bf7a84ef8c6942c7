//! Simulation of continuously monitored open systems whose memory is carried
//! by a finite auxiliary subsystem. The composite dynamics are exact; the
//! reduced engines reproduce them from the principal degrees of freedom plus
//! a memory integral, and the harness cross-checks every formulation against
//! independent references.

pub mod algebra;
pub mod cli;
pub mod engines;
pub mod error;
pub mod harness;
pub mod model_io;
pub mod models;
pub mod output;
pub mod sde;
pub mod superop;

pub use algebra::{BlockState, CMat, CVec, ModelSpec, C64};
pub use error::{Error, Result};
