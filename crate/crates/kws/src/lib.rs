pub mod alignment_file;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod kwsf;
pub mod label_file;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
