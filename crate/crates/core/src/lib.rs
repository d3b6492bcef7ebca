// `!(x > y)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod edgeworth;
pub mod error;
pub mod gibbs;
pub mod mc;
pub mod model;
pub mod model_file;
pub mod quad;
pub mod report;
pub mod roots;
pub mod tilt;

pub use error::{Error, Result};
