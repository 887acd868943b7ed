#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod datagen;
pub mod domain;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod response;
pub mod train;

pub use error::{Error, Result};
