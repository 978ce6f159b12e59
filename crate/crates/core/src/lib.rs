//! Numerical and exact solvers for scalar convex conservation laws, with
//! tools for measuring the metric entropy of their solution sets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod entropy;
pub mod exact;
pub mod flux;
pub mod lab;
pub mod profiles;
pub mod schemes;
pub mod targets;
