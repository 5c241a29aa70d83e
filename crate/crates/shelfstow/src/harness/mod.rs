//! Verification, benchmarking, rendering and simulation around the solvers.

pub mod bench;
pub mod config;
pub mod oracle;
pub mod render;
pub mod sim;
pub mod verify;
