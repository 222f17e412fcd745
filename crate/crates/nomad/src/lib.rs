//! Files, dataset synthesis and the command-line front end for NOMAD. The
//! algorithms live in [`nomad_core`].

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod external;
pub mod pipeline;
pub mod synth;
pub mod tables;
pub mod wav;

pub use error::{Error, Result};
