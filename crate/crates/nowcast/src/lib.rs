//! File formats, synthetic data, the batch pipeline and the command-line
//! front end of the nowcasting engine. The algorithms live in
//! `nowcast-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod synthpop;

pub use crate::error::{Error, Result};
