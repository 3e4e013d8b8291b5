pub mod dataset;
pub mod files;
pub mod patd;

pub use patd::{load_tensors, save_tensors};
