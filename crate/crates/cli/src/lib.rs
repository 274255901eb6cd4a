//! Configuration-driven driver for the `fracsys` solvers.

pub mod config;
pub mod expr;
pub mod run;
