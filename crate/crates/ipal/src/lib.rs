//! File formats, benchmark harness, curriculum trainer and CLI glue around
//! the `ipal-core` solver.

pub mod bench;
pub mod ckpt;
pub mod qps;
pub mod qptxt;
pub mod train;

pub use ipal_core as core;
