#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attrreg;
pub mod attributes;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod explore;
pub mod metrics;
pub mod numgrad;
pub mod vae;

pub use error::{Error, Result};
