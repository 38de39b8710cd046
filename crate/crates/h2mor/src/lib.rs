#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod h2space;
pub mod numkit;
pub mod ph2;
pub mod ratfit;
pub mod systems;

pub use error::{Error, Result};
pub use num_complex::Complex64;
