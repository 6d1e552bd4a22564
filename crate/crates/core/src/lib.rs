//! Global polynomial optimization over boxes with SOS relaxations and branch and bound.

// `!(a < b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bnb;
pub mod box_quadratic;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod parser;
pub mod poly;
pub mod problem;
pub mod relax;
pub mod sdp;

pub use error::{Error, Result};
pub use parser::parse_problem;
