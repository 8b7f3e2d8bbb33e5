//! Batch driver for the shallow water model: configuration and run orchestration.

pub mod config;
pub mod run;
