//! Datasets, training runs, blind transform search and evaluation for the
//! watermark faker, on top of `wmfaker-core`.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod search;
pub mod synth;
pub mod train;

pub use error::{LabError, Result};
