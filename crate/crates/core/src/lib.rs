#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod kernels;
pub mod model;
pub mod nulldist;
pub mod power;
pub mod scan;
pub mod simgen;
pub mod ustat;
