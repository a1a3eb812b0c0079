#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod error;
pub mod field;
pub mod frontsim;
pub mod logistic;
pub mod profiles;
pub mod reaction;
pub mod report;
pub mod spectral;
pub mod verify;

pub use error::{KppError, Result};
pub mod artifacts;
pub mod config;
pub mod experiment;
pub mod plot;
