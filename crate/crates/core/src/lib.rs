//! Core of an income-distribution nowcasting engine.
//!
//! A baseline income survey is reweighted toward a fresher labour-force
//! panel, income components are indexed to the analysis month, transition
//! propensities fitted on the panel are aligned onto the survey, and a
//! parameterised tax-transfer system turns the result into household
//! disposable income. The change in any distributional outcome between the
//! baseline month and an analysis month is then split into an income-shock
//! effect and a policy-response effect, bounded by two counterfactuals.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! synthetic data generator and the batch pipeline live in the `nowcast`
//! crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod decompose;
pub mod design;
mod error;
pub mod glm;
pub mod indexation;
mod linalg;
mod math;
pub mod reweight;
pub mod rng;
pub mod stats;
pub mod taxben;
pub mod transitions;

pub use crate::error::{Error, Result};
