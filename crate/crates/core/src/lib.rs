#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod chem;
pub mod curation;
pub mod eval;
pub mod featurize;
pub mod mmp;
pub mod models;
pub mod nn;
pub mod split;
pub mod twin;
