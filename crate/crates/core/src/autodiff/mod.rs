//! Small reverse-mode differentiation engine over dense `f64` tensors.
//!
//! A [`Graph`] records every operation in creation order, which is already a
//! topological order; [`Graph::backward`] walks it in reverse and accumulates
//! gradients additively. Layers the classifier needs (1-D convolution, max
//! pooling, inverted dropout, LSTM, dense, softmax cross-entropy, L2 penalty)
//! are fused ops with hand-written backward rules.

mod adam;
pub mod checkpoint;
mod graph;
mod gradcheck;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{softmax, Graph, Mode, Var};
pub use tensor::{NamedTensor, Tensor};
