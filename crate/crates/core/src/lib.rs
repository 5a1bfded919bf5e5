pub mod action;
pub mod error;
pub mod fock;
pub mod grid;
pub mod levy;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Cutoff, ModelParams, Vec2};
