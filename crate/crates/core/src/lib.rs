#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod corrector;
pub mod error;
pub mod expr;
pub mod field;
pub mod fit;
pub mod geometry;
pub mod harness;
pub mod kernel;
pub mod mesh;
pub mod fem;
pub mod quadrature;
pub mod report;
