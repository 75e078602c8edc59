// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod christoffel;
pub mod compare;
pub mod config;
pub mod error;
pub mod fk_transform;
pub mod global_matrix;
pub mod interp;
pub mod linalg;
pub mod materials;
pub mod outlier_filter;
pub mod wavefield;

pub use error::{Error, Result};
