pub mod eval;
pub mod generate;
pub mod gradcheck;
pub mod inspect;
pub mod synth;
pub mod train;
pub mod translate;
