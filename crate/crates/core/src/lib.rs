#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod async_engine;
pub mod bsm;
pub mod direct;
pub mod error;
pub mod freq;
pub mod problem;
pub mod stehfest;
pub mod steps;
pub mod sync_iter;
pub mod tridiag;

pub use error::{Error, Result};
