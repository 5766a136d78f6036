//! Dense tensors, reverse-mode differentiation, RMSProp and a seeded RNG.

pub mod graph;
pub mod optim;
pub mod params;
pub mod real;
pub mod rng;
pub mod tensor;

pub use graph::{kl_gaussian_value, Activation, Graph, Padding, Var, LOG_EPS};
pub use optim::{RmsProp, RmsPropConfig};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use real::{DType, Real};
pub use rng::SeededRng;
pub use tensor::Tensor;
