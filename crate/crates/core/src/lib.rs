// negated float comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod losses;
pub mod models;
pub mod neural;
pub mod optim;
pub mod oracle;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
