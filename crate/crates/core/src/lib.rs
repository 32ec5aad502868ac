#![no_std]
// Negated comparisons are how NaN inputs get rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod lift;
pub mod map;
pub mod pipeline;
pub mod radar;
pub mod registration;
pub mod sim;

pub use error::{Error, Result};
