//! Recurrent cells, stacks, bidirectional encoders and the language model.

pub mod cell;
pub mod lm;

pub use cell::{BiEncoder, CellKind, EncoderRun, Gate, RecurrentLayer, RecurrentStack, StackGrads, StackRun, StackState, StepCache};
pub use lm::{InputEncoding, LanguageModel, LmConfig, LmOutput, OutputHead};
