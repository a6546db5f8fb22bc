//! Neural networks for text with hand-derived gradients.

pub mod cnn;
pub mod error;
pub mod han;
pub mod interpret;
pub mod math;
pub mod plot;
pub mod recurrent;
pub mod seq2seq;
pub mod synth;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use math::Matrix;
