pub mod cli;
pub mod codes;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod features;
pub mod filters;
pub mod io;
pub mod linalg;
pub mod structures;
pub mod synth;
pub mod trainer;
