//! Learned reconstruction from composite signals.

pub mod adam;
pub mod conv;
pub mod gradcheck;
pub mod graph;
pub mod lstm;
pub mod model;
pub mod train;

pub use graph::{Graph, Reduction, Var};
pub use model::{Model, ModelConfig};
pub use train::{Sample, TrainConfig};
