#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::excessive_precision
)]

pub mod baselines;
pub mod cli;
pub mod concentration;
pub mod data;
pub mod error;
pub mod hypotheses;
pub mod pacbayes;
pub mod recursion;
pub mod rng;
pub mod validate;

pub use error::{Error, Result};
