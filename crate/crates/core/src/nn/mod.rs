//! Minimal differentiable kernels: dense products, softmax, cross-entropy,
//! an LSTM layer with backpropagation through time, and parameter storage
//! with plain SGD and Adam updates.

pub mod lstm;
pub mod ops;
pub mod params;
pub mod tensor;

pub use lstm::{LstmCache, LstmLayer};
pub use ops::{cross_entropy, entropy, softmax, softmax_rows};
pub use params::{sgd_step, Adam, Optimizer, ParamStore, Sgd};
pub use tensor::{transpose01, Matrix, Tensor3};
