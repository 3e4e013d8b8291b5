#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod das;
pub mod delay_line;
pub mod demux;
pub mod error;
pub mod forward;
pub mod frontend;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod phantom;
pub mod pipeline;
pub mod signal;
pub mod tensor;

pub use config::SimConfig;
pub use error::{Error, Result};
