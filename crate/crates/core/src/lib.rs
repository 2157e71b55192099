// NaN-rejecting comparisons are written as negations on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domain;
pub mod energy;
pub mod error;
pub mod field;
pub mod galerkin;
pub mod limit;
pub mod loads;
pub mod math3;
pub mod nonlinear;
mod nullable;
pub mod poly;
