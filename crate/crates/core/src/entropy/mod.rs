//! The digital branch: differentiable quantization, a learned
//! Gaussian-mixture symbol distribution, integer frequency tables and a
//! bit-exact range coder.

pub mod coder;
pub mod freq;
pub mod gmm;
pub mod quantize;

pub use coder::{arith_decode, arith_encode, Bitstream};
pub use freq::{build_freq_table, FreqTable, SymbolAlphabet};
pub use gmm::{GmmEntropyModel, RateTerm};
pub use quantize::{quantize_eval, quantize_train, row_symbols};
