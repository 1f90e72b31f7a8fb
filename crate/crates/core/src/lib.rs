// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod dpi;
pub mod ed;
pub mod ef;
pub mod error;
pub mod info;
pub mod linalg;
pub mod optim;
pub mod quantum;
pub mod random;

pub use error::{Error, Result};
