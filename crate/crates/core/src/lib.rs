#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod estimators;
pub mod kernels;
pub mod params;
pub mod paths;
pub mod polaron;
pub mod quad;
pub mod special;
pub mod table;

pub use error::{Error, Result};
pub use params::{Model, ModelParams};
