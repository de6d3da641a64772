#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod codecs;
pub mod dct;
pub mod error;
pub mod faker;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{CoverImage, PayloadKind, WatermarkPayload};
