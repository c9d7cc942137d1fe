//! Small CPU neural-network layers with hand-written backward passes.
//!
//! Convolutions lower to GEMM through im2col. Everything is single-threaded
//! and deterministic: identical inputs and weights give bit-identical
//! outputs on one machine.

pub mod activation;
pub mod conv;
pub mod init;
pub mod layer;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod optim;
pub mod scalar;
pub mod tensor;

pub use activation::{LeakyRelu, Relu, Reshape, Tanh};
pub use conv::{Conv2d, ConvTranspose2d};
pub use layer::{Layer, ParamMut, Sequential};
pub use linear::Linear;
pub use norm::BatchNorm;
pub use optim::Adam;
pub use scalar::Scalar;
pub use tensor::Tensor;
