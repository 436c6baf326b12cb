// `!(x > 0.0)` is used throughout to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod fock;
pub mod measurement;
pub mod protocol;
pub mod tomography;
pub mod trajectory;

pub use error::{Error, Result};
