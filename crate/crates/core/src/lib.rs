#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arena;
pub mod compliance;
pub mod geometry;
pub mod ledger;
pub mod nonstationarity;
pub mod primitives;
pub mod solver;
