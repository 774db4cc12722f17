//! Std companion of `kosm-core`: CSV and JSON file formats, `.kosm` IO, the
//! synthetic listing generator, the HTTP inference service and the `kosm`
//! command line.

pub mod checkpoint;
pub mod cli;
pub mod csvio;
pub mod lite;
pub mod pipeline;
pub mod service;
pub mod synth;
