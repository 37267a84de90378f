//! Blind SIMO channel identifiability under `l1` / `lp` sparsity criteria.

pub mod channel_model;
pub mod cli;
pub mod error;
pub mod identifiability;
pub mod lp_core;
pub mod probability;
pub mod sparse_select;
pub mod subspace;

pub use error::{Error, Result};
